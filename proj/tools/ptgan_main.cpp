// Copyright 2026 The ptgan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ptgan/accountant.hpp"
#include "ptgan/aggregation.hpp"
#include "ptgan/data_io.hpp"
#include "ptgan/eval.hpp"
#include "ptgan/nn.hpp"
#include "ptgan/rng.hpp"
#include "ptgan/trainer.hpp"

namespace {

using nlohmann::json;

// JSON has no infinity; non-finite numbers are emitted as strings.
json json_number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

ptgan::data::Dataset load_input(const std::string& csv_path,
                                const std::string& idx_images,
                                const std::string& idx_labels,
                                bool no_normalize) {
  if (!csv_path.empty() && !idx_images.empty()) {
    throw ptgan::ConfigError("pass either --data or --idx-images, not both");
  }
  if (!csv_path.empty()) {
    ptgan::data::Dataset ds = ptgan::data::load_csv(csv_path);
    if (!no_normalize) ptgan::data::normalize_minmax(ds);
    return ds;
  }
  if (!idx_images.empty()) {
    if (idx_labels.empty()) {
      throw ptgan::ConfigError("--idx-images requires --idx-labels");
    }
    return ptgan::data::load_idx(idx_images, idx_labels);
  }
  throw ptgan::ConfigError("no input data: pass --data or --idx-images");
}

void apply_set_overrides(ptgan::train::TrainConfig& cfg,
                         const std::vector<std::string>& sets) {
  for (const std::string& entry : sets) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      throw ptgan::ConfigError("--set expects key=value, got '" + entry +
                               "'");
    }
    ptgan::train::apply_config_entry(cfg, entry.substr(0, eq),
                                     entry.substr(eq + 1));
  }
}

int run_accountant(std::int64_t n_c, std::int64_t n_d, double z,
                   std::int64_t n_g, double sigma2, std::int64_t steps,
                   double delta) {
  ptgan::gdp::SubsampledGaussianSpec grad_spec;
  grad_spec.sampling_rate =
      static_cast<double>(n_c) / static_cast<double>(n_d);
  grad_spec.noise_multiplier = z;
  grad_spec.steps = steps;
  ptgan::gdp::GnmaxSpec vote_spec;
  vote_spec.sigma2 = sigma2;
  vote_spec.queries_per_step = n_g;
  vote_spec.steps = steps;

  const ptgan::gdp::GdpBudget mu_c = ptgan::gdp::subsampled_mu(grad_spec);
  const ptgan::gdp::GdpBudget mu_g = ptgan::gdp::gnmax_mu(vote_spec);
  const ptgan::gdp::GdpBudget total = ptgan::gdp::total_mu(
      ptgan::gdp::AccountingParams{n_c, n_d, z, n_g, sigma2}, steps);

  json out;
  out["mu"] = json_number(total.mu);
  out["epsilon"] = json_number(ptgan::train::epsilon_or_inf(total.mu, delta));
  out["delta"] = delta;
  out["breakdown"]["mu_c"] = json_number(mu_c.mu);
  out["breakdown"]["mu_g"] = json_number(mu_g.mu);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_train(const std::string& csv_path, const std::string& idx_images,
              const std::string& idx_labels, bool no_normalize,
              const std::string& config_path,
              const std::vector<std::string>& sets, const std::string& out_dir,
              bool full_checkpoint) {
  ptgan::train::TrainConfig cfg;
  if (!config_path.empty()) {
    cfg = ptgan::train::parse_config_file(config_path, cfg);
  }
  apply_set_overrides(cfg, sets);

  const ptgan::data::Dataset full =
      load_input(csv_path, idx_images, idx_labels, no_normalize);
  ptgan::data::SplitSpec split_spec;
  split_spec.percent = cfg.percent;
  split_spec.seed = cfg.seed;
  auto [labeled, unlabeled] = ptgan::data::split(full, split_spec);
  // Resolve up front so the manifest records the effective settings (class
  // count inferred from the data, sigma1/threshold defaults filled in).
  cfg = ptgan::train::resolve_config(cfg, labeled, unlabeled);

  const ptgan::train::TrainResult result =
      ptgan::train::train(cfg, labeled, unlabeled);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  const fs::path metrics_path = fs::path(out_dir) / "metrics.csv";
  {
    std::ofstream metrics(metrics_path);
    if (!metrics) {
      throw std::runtime_error("cannot write " + metrics_path.string());
    }
    metrics << ptgan::train::metrics_csv_header() << "\n";
    for (const auto& row : result.report.rounds) {
      metrics << ptgan::train::metrics_csv_row(row) << "\n";
    }
  }

  json manifest;
  for (const auto& [key, value] : ptgan::train::config_entries(cfg)) {
    manifest["config"][key] = value;
  }
  manifest["data"]["labeled"] = labeled.size();
  manifest["data"]["unlabeled"] = unlabeled.size();
  manifest["data"]["dim"] = labeled.dim();
  manifest["privacy"]["mu"] = json_number(result.report.final_mu);
  manifest["privacy"]["epsilon"] = json_number(result.report.final_epsilon);
  manifest["privacy"]["dp_delta"] = cfg.dp_delta;
  manifest["privacy"]["student_steps"] = result.report.student_steps;
  manifest["rounds_completed"] = result.report.rounds_completed;
  manifest["outputs"]["metrics"] = "metrics.csv";
  manifest["outputs"]["generator"] = "generator.json";
  if (full_checkpoint) {
    manifest["outputs"]["classifier"] = "classifier.json";
    manifest["outputs"]["student"] = "student.json";
    manifest["outputs"]["teachers"] = result.ensemble.teachers.size();
  }
  const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
  {
    std::ofstream out(manifest_path);
    if (!out) {
      throw std::runtime_error("cannot write " + manifest_path.string());
    }
    out << manifest.dump(2) << "\n";
  }

  ptgan::nn::save_network(result.generator,
                          (fs::path(out_dir) / "generator.json").string());
  if (full_checkpoint) {
    ptgan::nn::save_network(result.classifier,
                            (fs::path(out_dir) / "classifier.json").string());
    ptgan::nn::save_network(result.student,
                            (fs::path(out_dir) / "student.json").string());
    for (std::size_t i = 0; i < result.ensemble.teachers.size(); ++i) {
      ptgan::nn::save_network(
          result.ensemble.teachers[i],
          (fs::path(out_dir) / ("teacher_" + std::to_string(i) + ".json"))
              .string());
    }
  }

  std::cout << "rounds: " << result.report.rounds_completed
            << "  student steps: " << result.report.student_steps
            << "  mu: " << result.report.final_mu << "  epsilon("
            << cfg.dp_delta << "): " << result.report.final_epsilon << "\n"
            << "wrote " << metrics_path.string() << ", "
            << manifest_path.string() << ", "
            << (fs::path(out_dir) / "generator.json").string() << "\n";
  return 0;
}

int run_evaluate(const std::string& generator_path,
                 const std::string& csv_path, const std::string& idx_images,
                 const std::string& idx_labels, bool no_normalize,
                 std::int64_t samples, std::int64_t epochs,
                 std::uint64_t seed) {
  const ptgan::nn::DenseNetwork generator =
      ptgan::nn::load_network(generator_path);
  const ptgan::data::Dataset test =
      load_input(csv_path, idx_images, idx_labels, no_normalize);
  if (!test.labeled()) {
    throw ptgan::ConfigError("the test set must be labeled");
  }
  const std::int64_t m = test.num_classes();
  const std::int64_t noise_dim =
      static_cast<std::int64_t>(generator.input_dim()) - m;
  if (noise_dim < 1) {
    throw ptgan::ConfigError(
        "generator input width leaves no room for noise given " +
        std::to_string(m) + " classes");
  }
  const ptgan::data::Dataset synthetic = ptgan::eval::generate_dataset(
      generator, static_cast<std::size_t>(samples), m, noise_dim, seed);
  const ptgan::eval::EvalReport report =
      ptgan::eval::evaluate(synthetic, test, epochs, seed);

  json out;
  out["accuracy"] = report.accuracy;
  out["auroc_macro"] = json_number(report.auroc_macro);
  out["per_class_accuracy"] = report.per_class_accuracy;
  out["n_synthetic"] = report.n_synthetic;
  out["n_test"] = report.n_test;
  out["seed"] = report.seed;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_aggregate_sim(const std::string& votes_text, double sigma1,
                      double sigma2, double threshold,
                      const std::string& origin_text, std::int64_t trials,
                      std::uint64_t seed) {
  const auto colon = votes_text.find(':');
  if (colon == std::string::npos) {
    throw ptgan::ConfigError("--votes expects REAL:FAKE, got '" + votes_text +
                             "'");
  }
  ptgan::pate::VoteHistogram votes;
  try {
    votes.count_real = std::stoll(votes_text.substr(0, colon));
    votes.count_fake = std::stoll(votes_text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ptgan::ConfigError("--votes expects REAL:FAKE, got '" + votes_text +
                             "'");
  }
  if (votes.count_real < 0 || votes.count_fake < 0 || votes.total() < 1) {
    throw ptgan::ConfigError("vote counts must be non-negative, total >= 1");
  }
  ptgan::pate::SampleOrigin origin;
  if (origin_text == "generator") {
    origin = ptgan::pate::SampleOrigin::kFromGenerator;
  } else if (origin_text == "classifier") {
    origin = ptgan::pate::SampleOrigin::kFromClassifier;
  } else {
    throw ptgan::ConfigError("--origin must be generator or classifier");
  }
  if (trials < 1) throw ptgan::ConfigError("--trials must be >= 1");

  ptgan::pate::HyGnmaxConfig cfg;
  cfg.threshold = threshold;
  cfg.sigma1 = sigma1;
  cfg.sigma2 = sigma2;
  cfg.teacher_count = votes.total();
  ptgan::pate::validate_hygnmax_config(cfg, /*warn=*/true);

  ptgan::RngStream rng(seed);
  std::int64_t passed = 0;
  std::int64_t real = 0;
  for (std::int64_t t = 0; t < trials; ++t) {
    const ptgan::pate::Decision decision =
        ptgan::pate::hygnmax(votes, origin, cfg, rng);
    if (decision == ptgan::pate::Decision::kAbstain) continue;
    passed += 1;
    if (decision == ptgan::pate::Decision::kReal) real += 1;
  }
  const double pass_rate =
      static_cast<double>(passed) / static_cast<double>(trials);
  const double p_real =
      passed > 0 ? static_cast<double>(real) / static_cast<double>(passed)
                 : std::nan("");

  char row[128];
  std::snprintf(row, sizeof(row), "%lld:%lld,%.17g,%.17g",
                static_cast<long long>(votes.count_real),
                static_cast<long long>(votes.count_fake), pass_rate, p_real);
  std::cout << "votes,pass_rate,p_real\n" << row << "\n";
  return 0;
}

int run_synth_data(std::int64_t classes, std::int64_t per_class,
                   std::int64_t dim, double separation, std::uint64_t seed,
                   const std::string& out_path) {
  const ptgan::data::Dataset ds =
      ptgan::data::synth_mixture(classes, per_class, dim, separation, seed);
  ptgan::data::write_csv(ds, out_path);
  std::cout << "wrote " << ds.size() << " rows (" << classes << " classes, "
            << dim << " dims) to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving conditional GAN training with a teacher "
               "jury and a Gaussian DP accountant"};
  app.require_subcommand(1);

  // accountant -----------------------------------------------------------
  auto* acct = app.add_subcommand(
      "accountant", "Price a training schedule in mu-GDP and (eps, delta)");
  std::int64_t acct_n_c = 128;
  std::int64_t acct_n_d = 0;
  double acct_z = 0.4;
  std::int64_t acct_n_g = 128;
  double acct_sigma2 = 300.0;
  std::int64_t acct_steps = 1;
  double acct_delta = 1e-5;
  acct->add_option("--n_c", acct_n_c, "Gradient batch size")->required();
  acct->add_option("--n_d", acct_n_d, "Adversarial pool size")->required();
  acct->add_option("--noise_multiplier", acct_z, "DPSGD noise multiplier z")
      ->required();
  acct->add_option("--n_g", acct_n_g, "Jury queries per step")->required();
  acct->add_option("--sigma2", acct_sigma2, "Vote release noise")->required();
  acct->add_option("--steps", acct_steps, "Student steps T");
  acct->add_option("--dp_delta", acct_delta, "Delta for the epsilon report");

  // train ------------------------------------------------------------------
  auto* train_cmd =
      app.add_subcommand("train", "Train generator/classifier/student "
                                  "against a private teacher jury");
  std::string train_csv, train_idx_images, train_idx_labels;
  std::string train_config, train_out = "out";
  std::vector<std::string> train_sets;
  bool train_no_normalize = false;
  bool train_full_checkpoint = false;
  train_cmd->add_option("--data", train_csv, "Labeled CSV dataset");
  train_cmd->add_option("--idx-images", train_idx_images, "IDX image file");
  train_cmd->add_option("--idx-labels", train_idx_labels, "IDX label file");
  train_cmd->add_flag("--no-normalize", train_no_normalize,
                      "Skip min-max normalization of CSV features");
  train_cmd->add_option("--config", train_config,
                        "Config file (key = value lines)");
  train_cmd->add_option("--set", train_sets,
                        "Config override key=value (repeatable, wins over "
                        "--config)");
  train_cmd->add_option("--out", train_out, "Output directory");
  train_cmd->add_flag(
      "--unsafe-full-checkpoint", train_full_checkpoint,
      "Also write classifier/student/teacher weights. These saw private "
      "data directly; only the generator checkpoint carries the DP "
      "guarantee");

  // evaluate ---------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Train a fresh classifier on generator output and score "
                  "it on real held-out data");
  std::string eval_generator, eval_csv, eval_idx_images, eval_idx_labels;
  bool eval_no_normalize = false;
  std::int64_t eval_samples = 2000;
  std::int64_t eval_epochs = 20;
  std::uint64_t eval_seed = 1;
  eval_cmd->add_option("--generator", eval_generator,
                       "Generator checkpoint (JSON)")
      ->required();
  eval_cmd->add_option("--test", eval_csv, "Labeled CSV test set");
  eval_cmd->add_option("--idx-images", eval_idx_images, "IDX image file");
  eval_cmd->add_option("--idx-labels", eval_idx_labels, "IDX label file");
  eval_cmd->add_flag("--no-normalize", eval_no_normalize,
                     "Skip min-max normalization of CSV features");
  eval_cmd->add_option("--samples", eval_samples,
                       "Synthetic training set size");
  eval_cmd->add_option("--epochs", eval_epochs, "Evaluator training epochs");
  eval_cmd->add_option("--seed", eval_seed, "Synthesis/evaluator seed");

  // aggregate-sim -----------------------------------------------------------
  auto* sim_cmd = app.add_subcommand(
      "aggregate-sim", "Monte Carlo the jury release for a fixed vote tally");
  std::string sim_votes;
  double sim_sigma1 = 50.0;
  double sim_sigma2 = 300.0;
  double sim_threshold = 70.0;
  std::string sim_origin = "generator";
  std::int64_t sim_trials = 10000;
  std::uint64_t sim_seed = 1;
  sim_cmd->add_option("--votes", sim_votes, "Tally as REAL:FAKE")->required();
  sim_cmd->add_option("--sigma1", sim_sigma1, "Confidence gate noise");
  sim_cmd->add_option("--sigma2", sim_sigma2, "Release noise");
  sim_cmd->add_option("--threshold", sim_threshold, "Confidence gate T_e");
  sim_cmd->add_option("--origin", sim_origin,
                      "Query origin: generator or classifier");
  sim_cmd->add_option("--trials", sim_trials, "Simulation trials");
  sim_cmd->add_option("--seed", sim_seed, "Simulation seed");

  // synth-data ---------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand(
      "synth-data", "Write a Gaussian mixture benchmark dataset as CSV");
  std::int64_t synth_classes = 4;
  std::int64_t synth_per_class = 1000;
  std::int64_t synth_dim = 2;
  double synth_sep = 6.0;
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  synth_cmd->add_option("--classes", synth_classes, "Mixture components");
  synth_cmd->add_option("--per-class", synth_per_class, "Samples per class");
  synth_cmd->add_option("--dim", synth_dim, "Feature dimensions");
  synth_cmd->add_option("--separation", synth_sep, "Center distance scale");
  synth_cmd->add_option("--seed", synth_seed, "Sampling seed");
  synth_cmd->add_option("--out", synth_out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*acct) {
      return run_accountant(acct_n_c, acct_n_d, acct_z, acct_n_g, acct_sigma2,
                            acct_steps, acct_delta);
    }
    if (*train_cmd) {
      return run_train(train_csv, train_idx_images, train_idx_labels,
                       train_no_normalize, train_config, train_sets,
                       train_out, train_full_checkpoint);
    }
    if (*eval_cmd) {
      return run_evaluate(eval_generator, eval_csv, eval_idx_images,
                          eval_idx_labels, eval_no_normalize, eval_samples,
                          eval_epochs, eval_seed);
    }
    if (*sim_cmd) {
      return run_aggregate_sim(sim_votes, sim_sigma1, sim_sigma2,
                               sim_threshold, sim_origin, sim_trials,
                               sim_seed);
    }
    if (*synth_cmd) {
      return run_synth_data(synth_classes, synth_per_class, synth_dim,
                            synth_sep, synth_seed, synth_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
