#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "ptgan/accountant.hpp"
#include "ptgan/data_io.hpp"
#include "ptgan/nn.hpp"
#include "ptgan/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() /
                 ("ptgan_cli_" + std::to_string(getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string binary() {
  const char* env = std::getenv("PTGAN_BIN");
  REQUIRE_MESSAGE(env != nullptr, "PTGAN_BIN must point at the CLI binary");
  return env;
}

RunResult run(const std::string& args) {
  const fs::path out_file = work_dir() / "stdout.txt";
  const fs::path err_file = work_dir() / "stderr.txt";
  const std::string cmd = binary() + " " + args + " > " + out_file.string() +
                          " 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

// Shared tiny dataset + trained output, built once for the pipeline cases.
const fs::path& dataset_csv() {
  static const fs::path path = [] {
    const fs::path p = work_dir() / "mixture.csv";
    const RunResult r = run("synth-data --classes 2 --per-class 20 --dim 2 "
                            "--separation 4 --seed 3 --out " +
                            p.string());
    REQUIRE(r.exit_code == 0);
    return p;
  }();
  return path;
}

std::string tiny_train_args() {
  return "--set k=3 --set n_c=4 --set n_g=4 --set n_s=1 --set n_k=1 "
         "--set noise_dim=3 --set noise_multiplier=5 --set sigma2=5 "
         "--set mu_cap=1 --set learning_rate=0.01 --set percent=0.5 "
         "--set seed=7";
}

}  // namespace

TEST_CASE("accountant subcommand reports the library's own numbers") {
  const RunResult r = run(
      "accountant --n_c 128 --n_d 60000 --noise_multiplier 0.4 --n_g 128 "
      "--sigma2 300 --steps 1 --dp_delta 1e-5");
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);

  ptgan::gdp::AccountingParams params;
  params.n_c = 128;
  params.n_d = 60000;
  params.noise_multiplier = 0.4;
  params.n_g = 128;
  params.sigma2 = 300.0;
  const auto total = ptgan::gdp::total_mu(params, 1);
  CHECK(j["mu"].get<double>() == total.mu);
  CHECK(j["epsilon"].get<double>() ==
        ptgan::train::epsilon_or_inf(total.mu, 1e-5));
  CHECK(j["delta"].get<double>() == 1e-5);
  ptgan::gdp::SubsampledGaussianSpec sub;
  sub.sampling_rate = 128.0 / 60000.0;
  sub.noise_multiplier = 0.4;
  sub.steps = 1;
  CHECK(j["breakdown"]["mu_c"].get<double>() ==
        ptgan::gdp::subsampled_mu(sub).mu);
  ptgan::gdp::GnmaxSpec gn;
  gn.queries_per_step = 128;
  gn.sigma2 = 300.0;
  gn.steps = 1;
  CHECK(j["breakdown"]["mu_g"].get<double>() == ptgan::gdp::gnmax_mu(gn).mu);
}

TEST_CASE("synth-data writes a loadable CSV") {
  const fs::path& csv = dataset_csv();
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "label,x0,x1");
  const ptgan::data::Dataset ds = ptgan::data::load_csv(csv.string());
  CHECK(ds.size() == 40);
  CHECK(ds.num_classes() == 2);
}

TEST_CASE("train produces metrics, manifest, and a loadable generator") {
  const fs::path out = work_dir() / "run_full";
  const RunResult r =
      run("train --data " + dataset_csv().string() + " " + tiny_train_args() +
          " --unsafe-full-checkpoint --out " + out.string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  CHECK(r.out.find("rounds:") != std::string::npos);

  // Metrics: header plus one row per completed round.
  std::ifstream metrics(out / "metrics.csv");
  std::string line;
  std::getline(metrics, line);
  CHECK(line == ptgan::train::metrics_csv_header());
  std::size_t rows = 0;
  while (std::getline(metrics, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows >= 1);

  const json manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["config"]["seed"] == "7");
  CHECK(manifest["config"]["classes"] == "2");  // resolved from the data
  CHECK(manifest["config"]["sigma1"] == "5");   // resolved from sigma2
  CHECK(manifest["data"]["labeled"].get<int>() == 20);
  CHECK(manifest["data"]["unlabeled"].get<int>() == 20);
  CHECK(manifest["privacy"]["mu"].get<double>() >= 1.0);
  CHECK(manifest["rounds_completed"].get<int>() ==
        static_cast<int>(rows));
  CHECK(manifest["outputs"]["generator"] == "generator.json");
  CHECK(manifest["outputs"]["student"] == "student.json");

  const auto generator =
      ptgan::nn::load_network((out / "generator.json").string());
  CHECK(generator.layer_dims.front() == 3 + 2);  // noise_dim + classes
  CHECK(generator.layer_dims.back() == 2);
  CHECK(fs::exists(out / "classifier.json"));
  CHECK(fs::exists(out / "student.json"));
  CHECK(fs::exists(out / "teacher_0.json"));
  CHECK(fs::exists(out / "teacher_2.json"));
}

TEST_CASE("without the unsafe flag only the generator is checkpointed") {
  const fs::path out = work_dir() / "run_safe";
  const RunResult r = run("train --data " + dataset_csv().string() + " " +
                          tiny_train_args() + " --out " + out.string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  CHECK(fs::exists(out / "generator.json"));
  CHECK(!fs::exists(out / "student.json"));
  CHECK(!fs::exists(out / "classifier.json"));
  CHECK(!fs::exists(out / "teacher_0.json"));
  const json manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(!manifest["outputs"].contains("student"));
}

TEST_CASE("evaluate scores a trained generator against real data") {
  const fs::path out = work_dir() / "run_safe";
  if (!fs::exists(out / "generator.json")) {
    const RunResult setup = run("train --data " + dataset_csv().string() +
                                " " + tiny_train_args() + " --out " +
                                out.string());
    REQUIRE(setup.exit_code == 0);
  }
  const RunResult r = run("evaluate --generator " +
                          (out / "generator.json").string() + " --test " +
                          dataset_csv().string() +
                          " --samples 100 --epochs 3 --seed 1");
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  const json j = json::parse(r.out);
  CHECK(j["n_synthetic"].get<int>() == 100);
  CHECK(j["n_test"].get<int>() == 40);
  const double acc = j["accuracy"].get<double>();
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  CHECK(j["per_class_accuracy"].size() == 2);
}

TEST_CASE("config files load and --set overrides win") {
  const fs::path cfg_path = work_dir() / "train.cfg";
  {
    std::ofstream cfg(cfg_path);
    cfg << "# tiny run\n"
        << "k = 3\nn_c = 4\nn_g = 4\nn_s = 1\nn_k = 1\n"
        << "noise_dim = 3\nnoise_multiplier = 5\nsigma2 = 5\n"
        << "mu_cap = 1\nlearning_rate = 0.01\npercent = 0.5\n"
        << "seed = 5\n";
  }
  const fs::path out = work_dir() / "run_cfg";
  const RunResult r =
      run("train --data " + dataset_csv().string() + " --config " +
          cfg_path.string() + " --set seed=9 --out " + out.string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  const json manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["config"]["seed"] == "9");   // flag beat the file
  CHECK(manifest["config"]["mu_cap"] == "1"); // file beat the default
}

TEST_CASE("aggregate-sim prints a one-row CSV") {
  const RunResult gen = run(
      "aggregate-sim --votes 60:40 --sigma1 1 --sigma2 10 --threshold 0 "
      "--origin generator --trials 20000 --seed 3");
  REQUIRE(gen.exit_code == 0);
  std::istringstream lines(gen.out);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header == "votes,pass_rate,p_real");
  REQUIRE(row.rfind("60:40,", 0) == 0);
  std::istringstream cells(row.substr(6));
  double pass_rate = -1.0;
  double p_real = -1.0;
  char comma = 0;
  cells >> pass_rate >> comma >> p_real;
  CHECK(pass_rate == 1.0);  // a zero threshold gate always passes
  CHECK(p_real == doctest::Approx(0.9214).epsilon(0.02));

  const RunResult cls = run(
      "aggregate-sim --votes 60:40 --origin classifier --trials 50 --seed 1");
  REQUIRE(cls.exit_code == 0);
  CHECK(cls.out.find("60:40,1,1\n") != std::string::npos);
}

TEST_CASE("exit codes distinguish usage, runtime, and success") {
  CHECK(run("--help").exit_code == 0);
  CHECK(run("accountant --help").exit_code == 0);
  CHECK(run("not-a-command").exit_code == 2);
  CHECK(run("train --bogus-flag").exit_code == 2);
  CHECK(run("synth-data --classes 2 --per-class 5").exit_code == 2);  // no --out
  CHECK(run("").exit_code == 2);  // a subcommand is required

  const RunResult no_data = run("train --set seed=1");
  CHECK(no_data.exit_code == 1);
  CHECK(no_data.err.rfind("error: ", 0) == 0);

  const RunResult bad_set =
      run("train --data " + dataset_csv().string() + " --set foo=1");
  CHECK(bad_set.exit_code == 1);
  CHECK(bad_set.err.find("unknown config key 'foo'") != std::string::npos);

  const RunResult bad_votes = run("aggregate-sim --votes 60");
  CHECK(bad_votes.exit_code == 1);
  CHECK(bad_votes.err.find("--votes expects REAL:FAKE") != std::string::npos);

  const RunResult missing_gen =
      run("evaluate --generator /nonexistent.json --test " +
          dataset_csv().string());
  CHECK(missing_gen.exit_code == 1);
}
