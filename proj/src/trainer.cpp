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

#include "ptgan/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ptgan::train {
namespace {

constexpr std::size_t kHiddenWidth = 64;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double_value(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value +
                      "' as a number");
  }
  return out;
}

std::int64_t parse_int_value(const std::string& key, const std::string& value) {
  std::int64_t out = 0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value +
                      "' as an integer");
  }
  return out;
}

std::uint64_t parse_uint_value(const std::string& key,
                               const std::string& value) {
  std::uint64_t out = 0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value +
                      "' as an unsigned integer");
  }
  return out;
}

bool parse_bool_value(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': cannot parse '" + value +
                    "' as a bool (use true/false/1/0)");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Matrix from a list of equal-length feature rows.
nn::RealTensor feature_batch(const std::vector<std::vector<double>>& xs) {
  const std::size_t n = xs.size();
  const std::size_t d = n == 0 ? 0 : xs[0].size();
  nn::RealTensor t = nn::RealTensor::matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) t.at(i, j) = xs[i][j];
  }
  return t;
}

std::vector<std::vector<double>> tensor_rows(const nn::RealTensor& t) {
  std::vector<std::vector<double>> rows(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const auto r = t.row(i);
    rows[i].assign(r.begin(), r.end());
  }
  return rows;
}

// Draws `count` (label, noise) pairs for the generator, label first so a
// consumer that only needs labels stays aligned with one that needs both.
void sample_generator_batch(RngStream& rng, std::size_t count,
                            std::int64_t noise_dim, std::int64_t num_classes,
                            std::vector<std::vector<double>>& zs,
                            std::vector<std::int64_t>& ys) {
  zs.assign(count, {});
  ys.assign(count, 0);
  for (std::size_t j = 0; j < count; ++j) {
    ys[j] = static_cast<std::int64_t>(
        rng.uniform_index(static_cast<std::size_t>(num_classes)));
    zs[j].resize(static_cast<std::size_t>(noise_dim));
    for (auto& v : zs[j]) v = rng.gaussian();
  }
}

std::vector<std::int64_t> argmax_rows(const nn::RealTensor& t) {
  std::vector<std::int64_t> out(t.rows(), 0);
  for (std::size_t i = 0; i < t.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < t.cols(); ++c) {
      if (t.at(i, c) > t.at(i, best)) best = c;
    }
    out[i] = static_cast<std::int64_t>(best);
  }
  return out;
}

pate::HyGnmaxConfig jury_config(const TrainConfig& cfg) {
  pate::HyGnmaxConfig jury;
  jury.threshold = cfg.threshold;
  jury.sigma1 = cfg.sigma1;
  jury.sigma2 = cfg.sigma2;
  jury.teacher_count = cfg.k;
  return jury;
}

void check_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(name) + " must be positive and finite");
  }
}

void check_count(std::int64_t v, const char* name) {
  if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
}

void check_features_in_range(const data::Dataset& ds) {
  constexpr double kSlack = 1.0 + 1e-9;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.features[i]) {
      if (!std::isfinite(v) || v < -kSlack || v > kSlack) {
        throw ConfigError("dataset '" + ds.name +
                          "' has a feature outside [-1, 1]; normalize first");
      }
    }
  }
}

}  // namespace

void apply_config_entry(TrainConfig& cfg, const std::string& key,
                        const std::string& value) {
  if (key == "alpha") {
    cfg.alpha = parse_double_value(key, value);
  } else if (key == "alpha_p") {
    cfg.alpha_p = parse_double_value(key, value);
  } else if (key == "n_c") {
    cfg.n_c = parse_int_value(key, value);
  } else if (key == "n_g") {
    cfg.n_g = parse_int_value(key, value);
  } else if (key == "n_s") {
    cfg.n_s = parse_int_value(key, value);
  } else if (key == "n_k") {
    cfg.n_k = parse_int_value(key, value);
  } else if (key == "k") {
    cfg.k = parse_int_value(key, value);
  } else if (key == "mu_cap") {
    cfg.mu_cap = parse_double_value(key, value);
  } else if (key == "dp_delta") {
    cfg.dp_delta = parse_double_value(key, value);
  } else if (key == "clip_bound") {
    cfg.clip_bound = parse_double_value(key, value);
  } else if (key == "noise_multiplier") {
    cfg.noise_multiplier = parse_double_value(key, value);
  } else if (key == "sigma1") {
    cfg.sigma1 = parse_double_value(key, value);
  } else if (key == "sigma2") {
    cfg.sigma2 = parse_double_value(key, value);
  } else if (key == "threshold") {
    cfg.threshold = parse_double_value(key, value);
  } else if (key == "learning_rate") {
    cfg.learning_rate = parse_double_value(key, value);
  } else if (key == "classes") {
    cfg.classes = parse_int_value(key, value);
  } else if (key == "noise_dim") {
    cfg.noise_dim = parse_int_value(key, value);
  } else if (key == "percent") {
    cfg.percent = parse_double_value(key, value);
  } else if (key == "warmup_rounds") {
    cfg.warmup_rounds = parse_int_value(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_uint_value(key, value);
  } else if (key == "classifier_uses_labeled") {
    cfg.classifier_uses_labeled = parse_bool_value(key, value);
  } else if (key == "non_saturating_generator") {
    cfg.non_saturating_generator = parse_bool_value(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

TrainConfig parse_config_file(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": missing key before '='");
    }
    try {
      apply_config_entry(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return base;
}

std::vector<std::pair<std::string, std::string>> config_entries(
    const TrainConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("alpha", format_double(cfg.alpha));
  out.emplace_back("alpha_p", format_double(cfg.alpha_p));
  out.emplace_back("n_c", std::to_string(cfg.n_c));
  out.emplace_back("n_g", std::to_string(cfg.n_g));
  out.emplace_back("n_s", std::to_string(cfg.n_s));
  out.emplace_back("n_k", std::to_string(cfg.n_k));
  out.emplace_back("k", std::to_string(cfg.k));
  out.emplace_back("mu_cap", format_double(cfg.mu_cap));
  out.emplace_back("dp_delta", format_double(cfg.dp_delta));
  out.emplace_back("clip_bound", format_double(cfg.clip_bound));
  out.emplace_back("noise_multiplier", format_double(cfg.noise_multiplier));
  out.emplace_back("sigma1", format_double(cfg.sigma1));
  out.emplace_back("sigma2", format_double(cfg.sigma2));
  out.emplace_back("threshold", format_double(cfg.threshold));
  out.emplace_back("learning_rate", format_double(cfg.learning_rate));
  out.emplace_back("classes", std::to_string(cfg.classes));
  out.emplace_back("noise_dim", std::to_string(cfg.noise_dim));
  out.emplace_back("percent", format_double(cfg.percent));
  out.emplace_back("warmup_rounds", std::to_string(cfg.warmup_rounds));
  out.emplace_back("seed", std::to_string(cfg.seed));
  out.emplace_back("classifier_uses_labeled",
                   cfg.classifier_uses_labeled ? "true" : "false");
  out.emplace_back("non_saturating_generator",
                   cfg.non_saturating_generator ? "true" : "false");
  return out;
}

TrainConfig resolve_config(TrainConfig cfg, const data::Dataset& labeled,
                           const data::Dataset& unlabeled) {
  if (!labeled.labeled()) {
    throw ConfigError("the labeled set must carry labels");
  }
  if (labeled.size() == 0 || unlabeled.size() == 0) {
    throw ConfigError("both the labeled set and the unlabeled pool must be "
                      "non-empty");
  }
  if (labeled.dim() != unlabeled.dim() || labeled.dim() == 0) {
    throw ConfigError("labeled and unlabeled feature widths disagree");
  }
  check_features_in_range(labeled);
  check_features_in_range(unlabeled);

  if (cfg.classes == 0) cfg.classes = labeled.num_classes();
  if (cfg.classes < 2) throw ConfigError("classes must be >= 2");
  for (std::int64_t y : *labeled.labels) {
    if (y < 0 || y >= cfg.classes) {
      throw ConfigError("label " + std::to_string(y) +
                        " outside [0, classes)");
    }
  }

  check_count(cfg.n_c, "n_c");
  check_count(cfg.n_g, "n_g");
  check_count(cfg.n_s, "n_s");
  check_count(cfg.n_k, "n_k");
  check_count(cfg.k, "k");
  check_count(cfg.noise_dim, "noise_dim");
  if (cfg.warmup_rounds < 0) throw ConfigError("warmup_rounds must be >= 0");
  if (static_cast<std::size_t>(cfg.k) > labeled.size()) {
    throw ConfigError("need at least one labeled example per teacher (k = " +
                      std::to_string(cfg.k) + ", labeled = " +
                      std::to_string(labeled.size()) + ")");
  }
  if (static_cast<std::size_t>(cfg.n_c) > unlabeled.size()) {
    throw ConfigError("n_c exceeds the unlabeled pool size");
  }

  if (!(cfg.alpha > 0.0) || !(cfg.alpha < 1.0)) {
    throw ConfigError("alpha must be in (0, 1)");
  }
  if (cfg.alpha_p < 0.0 || !std::isfinite(cfg.alpha_p)) {
    throw ConfigError("alpha_p must be >= 0");
  }
  check_positive(cfg.mu_cap, "mu_cap");
  if (!(cfg.dp_delta > 0.0) || !(cfg.dp_delta < 1.0)) {
    throw ConfigError("dp_delta must be in (0, 1)");
  }
  check_positive(cfg.clip_bound, "clip_bound");
  if (cfg.noise_multiplier < 0.0 || !std::isfinite(cfg.noise_multiplier)) {
    throw ConfigError("noise_multiplier must be >= 0");
  }
  check_positive(cfg.learning_rate, "learning_rate");
  if (!(cfg.percent > 0.0) || cfg.percent > 1.0) {
    throw ConfigError("percent must be in (0, 1]");
  }

  if (cfg.sigma1 < 0.0) cfg.sigma1 = cfg.sigma2;
  if (cfg.threshold < 0.0) cfg.threshold = 0.7 * static_cast<double>(cfg.k);
  pate::validate_hygnmax_config(jury_config(cfg), /*warn=*/true);

  // Fail before training starts if the accountant cannot price a step.
  if (cfg.noise_multiplier > 0.0) {
    gdp::total_mu(accounting_params(cfg, labeled.size(), unlabeled.size()),
                  1);
  }
  return cfg;
}

std::vector<std::vector<std::size_t>> partition_labeled(std::size_t n_labeled,
                                                        std::int64_t k,
                                                        std::uint64_t seed) {
  if (k < 1) throw ConfigError("k must be >= 1");
  const std::size_t teachers = static_cast<std::size_t>(k);
  if (n_labeled < teachers) {
    throw ConfigError("fewer labeled examples than teachers");
  }
  std::vector<std::size_t> order(n_labeled);
  for (std::size_t i = 0; i < n_labeled; ++i) order[i] = i;
  RngStream rng(seed);
  rng.shuffle(order);
  const std::size_t shard_size = n_labeled / teachers;
  const std::size_t used = shard_size * teachers;
  if (used < n_labeled) {
    std::cerr << "warning: dropping " << (n_labeled - used) << " of "
              << n_labeled << " labeled examples so " << teachers
              << " teachers get equal shards\n";
  }
  std::vector<std::vector<std::size_t>> shards(teachers);
  for (std::size_t i = 0; i < teachers; ++i) {
    shards[i].assign(order.begin() + static_cast<std::ptrdiff_t>(i * shard_size),
                     order.begin() +
                         static_cast<std::ptrdiff_t>((i + 1) * shard_size));
  }
  return shards;
}

nn::RealTensor build_pair_batch(const std::vector<std::vector<double>>& xs,
                                const std::vector<std::int64_t>& ys,
                                std::int64_t num_classes) {
  if (xs.size() != ys.size()) {
    throw std::invalid_argument("build_pair_batch: xs/ys size mismatch");
  }
  const std::size_t n = xs.size();
  const std::size_t d = n == 0 ? 0 : xs[0].size();
  const std::size_t m = static_cast<std::size_t>(num_classes);
  nn::RealTensor t = nn::RealTensor::matrix(n, d + m);
  for (std::size_t i = 0; i < n; ++i) {
    if (xs[i].size() != d) {
      throw std::invalid_argument("build_pair_batch: ragged feature rows");
    }
    if (ys[i] < 0 || ys[i] >= num_classes) {
      throw std::invalid_argument("build_pair_batch: label out of range");
    }
    for (std::size_t j = 0; j < d; ++j) t.at(i, j) = xs[i][j];
    t.at(i, d + static_cast<std::size_t>(ys[i])) = 1.0;
  }
  return t;
}

nn::RealTensor build_generator_input(const std::vector<std::vector<double>>& zs,
                                     const std::vector<std::int64_t>& ys,
                                     std::int64_t num_classes) {
  return build_pair_batch(zs, ys, num_classes);
}

void train_teachers(TeacherEnsemble& ensemble,
                    const nn::DenseNetwork& generator,
                    const data::Dataset& labeled, const TrainConfig& cfg,
                    RngStream rng, TeacherRoundTrace* trace) {
  const std::size_t k = ensemble.teachers.size();
  if (ensemble.shards.size() != k) {
    throw std::invalid_argument("ensemble shard count != teacher count");
  }
  if (trace != nullptr) {
    trace->fake_z.assign(k, {});
    trace->fake_y.assign(k, {});
  }
  for (std::size_t i = 0; i < k; ++i) {
    RngStream teacher_rng = rng.split("teacher", i);
    const auto& shard = ensemble.shards[i];
    const std::size_t shard_size = shard.size();

    std::vector<std::vector<double>> real_xs(shard_size);
    std::vector<std::int64_t> real_ys(shard_size);
    for (std::size_t j = 0; j < shard_size; ++j) {
      real_xs[j] = labeled.features[shard[j]];
      real_ys[j] = (*labeled.labels)[shard[j]];
    }

    for (std::int64_t t = 0; t < cfg.n_k; ++t) {
      std::vector<std::vector<double>> zs;
      std::vector<std::int64_t> fake_ys;
      sample_generator_batch(teacher_rng, shard_size, cfg.noise_dim,
                             cfg.classes, zs, fake_ys);
      if (trace != nullptr) {
        trace->fake_z[i].push_back(zs);
        trace->fake_y[i].push_back(fake_ys);
      }
      const nn::RealTensor fake_x =
          nn::forward(generator, build_generator_input(zs, fake_ys,
                                                       cfg.classes));

      std::vector<std::vector<double>> xs = real_xs;
      std::vector<std::int64_t> ys = real_ys;
      std::vector<double> targets(shard_size, 1.0);
      const auto fake_rows = tensor_rows(fake_x);
      xs.insert(xs.end(), fake_rows.begin(), fake_rows.end());
      ys.insert(ys.end(), fake_ys.begin(), fake_ys.end());
      targets.insert(targets.end(), shard_size, 0.0);

      const nn::RealTensor batch = build_pair_batch(xs, ys, cfg.classes);
      const auto spec = nn::LossSpec::weighted_binary_log(targets, 1.0);
      const std::vector<double> grad =
          nn::batch_gradient(ensemble.teachers[i], batch, spec);
      // Teachers ascend the summed log score of correct calls.
      nn::apply_update(ensemble.teachers[i], grad, -cfg.learning_rate);
    }
  }
}

StudentStepStats student_step(nn::DenseNetwork& student,
                              const nn::DenseNetwork& classifier,
                              const nn::DenseNetwork& generator,
                              const TeacherEnsemble& ensemble,
                              const data::Dataset& labeled,
                              const data::Dataset& unlabeled,
                              const TrainConfig& cfg,
                              gdp::BudgetLedger& ledger, bool warmup,
                              RngStream rng, StudentStepTrace* trace) {
  StudentStepStats stats;
  if (gdp::ledger_exhausted(ledger)) {
    stats.refused = true;
    if (trace != nullptr) trace->refused = true;
    return stats;
  }
  if (trace != nullptr) {
    trace->warmup = warmup;
    trace->student_params_before = student.params;
  }
  const pate::HyGnmaxConfig jury = jury_config(cfg);
  const std::span<const nn::DenseNetwork> teachers(ensemble.teachers);

  // Classifier-origin pairs: sampled features, classifier-assigned labels.
  RngStream sample_rng = rng.split("sample");
  const std::vector<std::size_t> indices = sample_rng.sample_without_replacement(
      unlabeled.size(), static_cast<std::size_t>(cfg.n_c));
  std::vector<std::vector<double>> xs(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    xs[i] = unlabeled.features[indices[i]];
  }
  const std::vector<std::int64_t> labels =
      argmax_rows(nn::forward(classifier, feature_batch(xs)));

  RngStream jury_rng = rng.split("jury");
  std::vector<double> targets(xs.size(), 0.0);
  std::vector<pate::VoteHistogram> classifier_votes;
  if (!warmup) {
    classifier_votes.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      pate::PairSample sample{xs[i], labels[i],
                              pate::SampleOrigin::kFromClassifier};
      const pate::VoteHistogram votes = pate::collect_votes(teachers, sample);
      classifier_votes.push_back(votes);
      const pate::Decision decision =
          pate::hygnmax(votes, sample.origin, jury, jury_rng);
      targets[i] = decision == pate::Decision::kReal ? 1.0 : 0.0;
      stats.margin_sum +=
          std::abs(static_cast<double>(votes.count_real - votes.count_fake)) /
          static_cast<double>(cfg.k);
      stats.margin_count += 1;
    }
  }

  const nn::RealTensor batch1 = build_pair_batch(xs, labels, cfg.classes);
  const auto spec1 = nn::LossSpec::weighted_binary_log(targets, cfg.alpha);
  const std::vector<double> losses1 =
      nn::per_example_loss(student, batch1, spec1);
  for (double l : losses1) stats.loss1 += l;
  const nn::PerExampleGrads raw = nn::per_example_backward(student, batch1,
                                                           spec1);
  const nn::PerExampleGrads clipped =
      dpsgd::clip_per_example(raw, cfg.clip_bound);
  dpsgd::ClipNoiseConfig noise_cfg;
  noise_cfg.clip_bound = cfg.clip_bound;
  noise_cfg.noise_multiplier = cfg.noise_multiplier;
  noise_cfg.batch_size = cfg.n_c;
  RngStream dpsgd_rng = rng.split("dpsgd");
  std::vector<double> noise;
  const std::vector<double> private_grad = dpsgd::dpsgd_gradient(
      clipped, noise_cfg, dpsgd_rng, trace != nullptr ? &noise : nullptr);
  if (trace != nullptr) {
    trace->sample_indices = indices;
    trace->classifier_labels = labels;
    trace->classifier_votes = classifier_votes;
    trace->classifier_targets = targets;
    trace->loss1_raw_grads = raw;
    trace->loss1_clipped_grads = clipped;
    trace->dpsgd_noise = noise;
    trace->dpsgd_output = private_grad;
  }

  // Generator-origin pairs: only jury-approved decisions reach the loss.
  std::vector<double> survivor_grad(student.param_count(), 0.0);
  if (!warmup) {
    RngStream gen_rng = rng.split("gen");
    std::vector<std::vector<double>> zs;
    std::vector<std::int64_t> gen_ys;
    sample_generator_batch(gen_rng, static_cast<std::size_t>(cfg.n_g),
                           cfg.noise_dim, cfg.classes, zs, gen_ys);
    const nn::RealTensor gen_x = nn::forward(
        generator, build_generator_input(zs, gen_ys, cfg.classes));
    const auto gen_rows = tensor_rows(gen_x);
    stats.generator_queries = cfg.n_g;

    std::vector<std::vector<double>> survivor_xs;
    std::vector<std::int64_t> survivor_ys;
    std::vector<double> survivor_targets;
    std::vector<pate::VoteHistogram> gen_votes;
    std::vector<pate::Decision> gen_decisions;
    for (std::size_t j = 0; j < gen_rows.size(); ++j) {
      pate::PairSample sample{gen_rows[j], gen_ys[j],
                              pate::SampleOrigin::kFromGenerator};
      const pate::VoteHistogram votes = pate::collect_votes(teachers, sample);
      const pate::Decision decision =
          pate::hygnmax(votes, sample.origin, jury, jury_rng);
      gen_votes.push_back(votes);
      gen_decisions.push_back(decision);
      stats.margin_sum +=
          std::abs(static_cast<double>(votes.count_real - votes.count_fake)) /
          static_cast<double>(cfg.k);
      stats.margin_count += 1;
      if (decision == pate::Decision::kAbstain) {
        stats.abstained += 1;
        continue;
      }
      survivor_xs.push_back(gen_rows[j]);
      survivor_ys.push_back(gen_ys[j]);
      survivor_targets.push_back(decision == pate::Decision::kReal ? 1.0
                                                                   : 0.0);
    }
    if (!survivor_xs.empty()) {
      const nn::RealTensor batch2 =
          build_pair_batch(survivor_xs, survivor_ys, cfg.classes);
      const auto spec2 = nn::LossSpec::weighted_binary_log(
          survivor_targets, 1.0 - cfg.alpha);
      stats.loss2 = nn::loss_value(student, batch2, spec2);
      survivor_grad = nn::batch_gradient(student, batch2, spec2);
    }
    if (trace != nullptr) {
      trace->gen_z = zs;
      trace->gen_y = gen_ys;
      trace->gen_votes = gen_votes;
      trace->gen_decisions = gen_decisions;
    }
  }

  std::vector<double> combined = private_grad;
  for (std::size_t p = 0; p < combined.size(); ++p) {
    combined[p] += survivor_grad[p];
  }
  if (trace != nullptr) {
    trace->loss2_grad = survivor_grad;
    trace->combined_grad = combined;
  }
  // The student ascends its utility, so the update negates the loss step.
  nn::apply_update(student, combined, -cfg.learning_rate);

  if (cfg.noise_multiplier == 0.0) {
    // The accountant has no price for a noiseless release; the honest charge
    // is an unbounded one, which exhausts any cap after a single step.
    ledger.steps_taken += 1;
    ledger.mu_spent = std::numeric_limits<double>::infinity();
    ledger.history.emplace_back(ledger.steps_taken, ledger.mu_spent);
  } else {
    gdp::ledger_charge(ledger, accounting_params(cfg, labeled.size(),
                                                 unlabeled.size()));
  }
  stats.charged = true;
  return stats;
}

double classifier_step(nn::DenseNetwork& classifier,
                       const nn::DenseNetwork& student,
                       const nn::DenseNetwork& generator,
                       const data::Dataset& labeled,
                       const data::Dataset& unlabeled, const TrainConfig& cfg,
                       RngStream rng, ClassifierStepTrace* trace) {
  if (trace != nullptr) trace->classifier_params_before = classifier.params;
  const std::size_t pool_size =
      unlabeled.size() + (cfg.classifier_uses_labeled ? labeled.size() : 0);

  RngStream pool_rng = rng.split("pool");
  const std::vector<std::size_t> pool_indices =
      pool_rng.sample_without_replacement(
          pool_size, std::min(pool_size, static_cast<std::size_t>(cfg.n_c)));
  std::vector<std::vector<double>> pool_xs(pool_indices.size());
  for (std::size_t i = 0; i < pool_indices.size(); ++i) {
    const std::size_t idx = pool_indices[i];
    pool_xs[i] = idx < unlabeled.size()
                     ? unlabeled.features[idx]
                     : labeled.features[idx - unlabeled.size()];
  }

  // Adversarial term: the exact expectation of log(1 - S(d, y)) under the
  // classifier's own label distribution. The per-class coefficients are
  // constants with respect to the classifier, so the objective is a linear
  // functional of its softmax output.
  const nn::RealTensor d_batch = feature_batch(pool_xs);
  const std::size_t m = static_cast<std::size_t>(cfg.classes);
  nn::RealTensor coefficients =
      nn::RealTensor::matrix(pool_xs.size(), m);
  for (std::size_t y = 0; y < m; ++y) {
    const std::vector<std::int64_t> ys(pool_xs.size(),
                                       static_cast<std::int64_t>(y));
    const nn::RealTensor scores =
        nn::forward(student, build_pair_batch(pool_xs, ys, cfg.classes));
    for (std::size_t i = 0; i < pool_xs.size(); ++i) {
      coefficients.at(i, y) = nn::clamped_log(1.0 - scores.at(i, 0));
    }
  }
  const auto adversarial_spec =
      nn::LossSpec::softmax_expectation(coefficients);
  const double adversarial_value =
      nn::loss_value(classifier, d_batch, adversarial_spec);
  const std::vector<double> adversarial_grad =
      nn::batch_gradient(classifier, d_batch, adversarial_spec);

  // Supervised anchor on the labeled set.
  RngStream labeled_rng = rng.split("labeled");
  const std::size_t labeled_count =
      std::min(labeled.size(), static_cast<std::size_t>(cfg.n_c));
  const std::vector<std::size_t> labeled_indices =
      labeled_rng.sample_without_replacement(labeled.size(), labeled_count);
  std::vector<std::vector<double>> lab_xs(labeled_count);
  std::vector<std::int64_t> lab_ys(labeled_count);
  for (std::size_t i = 0; i < labeled_count; ++i) {
    lab_xs[i] = labeled.features[labeled_indices[i]];
    lab_ys[i] = (*labeled.labels)[labeled_indices[i]];
  }
  const nn::RealTensor lab_batch = feature_batch(lab_xs);
  const auto ce_spec = nn::LossSpec::cross_entropy(lab_ys);
  const double ce_value = nn::loss_value(classifier, lab_batch, ce_spec);
  const std::vector<double> ce_grad =
      nn::batch_gradient(classifier, lab_batch, ce_spec);

  // Pseudo-label anchor on generator output, against the conditioning label.
  double pseudo_value = 0.0;
  std::vector<double> pseudo_grad(classifier.param_count(), 0.0);
  std::vector<std::vector<double>> gen_zs;
  std::vector<std::int64_t> gen_ys;
  if (cfg.alpha_p > 0.0) {
    RngStream gen_rng = rng.split("gen");
    sample_generator_batch(gen_rng, static_cast<std::size_t>(cfg.n_g),
                           cfg.noise_dim, cfg.classes, gen_zs, gen_ys);
    const nn::RealTensor gen_x = nn::forward(
        generator, build_generator_input(gen_zs, gen_ys, cfg.classes));
    const auto pseudo_spec = nn::LossSpec::cross_entropy(gen_ys);
    pseudo_value = nn::loss_value(classifier, gen_x, pseudo_spec);
    pseudo_grad = nn::batch_gradient(classifier, gen_x, pseudo_spec);
  }

  std::vector<double> grad(classifier.param_count(), 0.0);
  for (std::size_t p = 0; p < grad.size(); ++p) {
    grad[p] = cfg.alpha * adversarial_grad[p] + ce_grad[p] +
              cfg.alpha_p * pseudo_grad[p];
  }
  nn::apply_update(classifier, grad, cfg.learning_rate);
  if (trace != nullptr) {
    trace->pool_indices = pool_indices;
    trace->labeled_indices = labeled_indices;
    trace->gen_z = gen_zs;
    trace->gen_y = gen_ys;
    trace->applied_grad = grad;
  }
  return cfg.alpha * adversarial_value + ce_value + cfg.alpha_p * pseudo_value;
}

double generator_step(nn::DenseNetwork& generator,
                      const nn::DenseNetwork& student, const TrainConfig& cfg,
                      RngStream rng, GeneratorStepTrace* trace) {
  if (trace != nullptr) trace->generator_params_before = generator.params;
  RngStream gen_rng = rng.split("gen");
  std::vector<std::vector<double>> zs;
  std::vector<std::int64_t> ys;
  sample_generator_batch(gen_rng, static_cast<std::size_t>(cfg.n_g),
                         cfg.noise_dim, cfg.classes, zs, ys);

  const nn::RealTensor gen_input =
      build_generator_input(zs, ys, cfg.classes);
  const nn::ForwardTrace gen_trace = nn::forward_trace(generator, gen_input);
  const nn::RealTensor& fake_x = gen_trace.post.back();

  const nn::RealTensor pair_batch =
      build_pair_batch(tensor_rows(fake_x), ys, cfg.classes);
  const nn::ForwardTrace student_trace =
      nn::forward_trace(student, pair_batch);
  const nn::RealTensor& scores = student_trace.post.back();

  const std::size_t n = static_cast<std::size_t>(cfg.n_g);
  const double weight = 1.0 - cfg.alpha;
  double objective = 0.0;
  nn::RealTensor dscore = nn::RealTensor::matrix(n, 1);
  for (std::size_t j = 0; j < n; ++j) {
    const double s = scores.at(j, 0);
    if (cfg.non_saturating_generator) {
      objective += -weight * nn::clamped_log(s);
      dscore.at(j, 0) = -weight * nn::clamped_dlog(s);
    } else {
      objective += weight * nn::clamped_log(1.0 - s);
      dscore.at(j, 0) = -weight * nn::clamped_dlog(1.0 - s);
    }
  }

  const nn::BackpropResult through_student =
      nn::backward_from_output(student, student_trace, dscore);
  const std::size_t d = generator.output_dim();
  nn::RealTensor dfake = nn::RealTensor::matrix(n, d);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < d; ++c) {
      dfake.at(j, c) = through_student.input_grads.at(j, c);
    }
  }
  const nn::BackpropResult through_generator =
      nn::backward_from_output(generator, gen_trace, dfake);
  std::vector<double> grad(generator.param_count(), 0.0);
  for (const auto& g : through_generator.param_grads.grads) {
    for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += g[p];
  }
  nn::apply_update(generator, grad, cfg.learning_rate);
  if (trace != nullptr) {
    trace->gen_z = zs;
    trace->gen_y = ys;
    trace->applied_grad = grad;
  }
  return objective;
}

std::string metrics_csv_header() {
  return "round,mu_spent,epsilon,loss_d,loss_c,loss_g,abstain_rate,"
         "teacher_margin_mean";
}

std::string metrics_csv_row(const RoundMetrics& m) {
  std::string out = std::to_string(m.round);
  for (double v : {m.mu_spent, m.epsilon, m.loss_d, m.loss_c, m.loss_g,
                   m.abstain_rate, m.teacher_margin_mean}) {
    out += ',';
    out += format_double(v);
  }
  return out;
}

double epsilon_or_inf(double mu, double dp_delta) {
  if (mu <= 0.0) return 0.0;
  if (!std::isfinite(mu)) return std::numeric_limits<double>::infinity();
  try {
    return gdp::mu_to_epsilon(gdp::GdpBudget{mu}, dp_delta);
  } catch (const std::invalid_argument&) {
    return std::numeric_limits<double>::infinity();
  }
}

gdp::AccountingParams accounting_params(const TrainConfig& cfg,
                                        std::size_t n_labeled,
                                        std::size_t n_unlabeled) {
  gdp::AccountingParams params;
  params.n_c = cfg.n_c;
  params.n_d = static_cast<std::int64_t>(
      cfg.classifier_uses_labeled ? n_labeled + n_unlabeled : n_unlabeled);
  params.noise_multiplier = cfg.noise_multiplier;
  params.n_g = cfg.n_g;
  params.sigma2 = cfg.sigma2;
  return params;
}

TrainResult train(const TrainConfig& cfg, const data::Dataset& labeled,
                  const data::Dataset& unlabeled, RoundTrace* trace,
                  std::int64_t trace_round) {
  const TrainConfig rc = resolve_config(cfg, labeled, unlabeled);
  RngStream root(rc.seed);
  const std::size_t d = labeled.dim();
  const std::size_t m = static_cast<std::size_t>(rc.classes);
  const std::size_t noise = static_cast<std::size_t>(rc.noise_dim);

  TrainResult result;
  result.generator =
      nn::init_network({noise + m, kHiddenWidth, kHiddenWidth, d},
                       nn::Activation::kTanh, root.child_seed("init/generator"));
  result.classifier = nn::init_network(
      {d, kHiddenWidth, m}, nn::Activation::kSoftmaxOutput,
      root.child_seed("init/classifier"));
  result.student =
      nn::init_network({d + m, kHiddenWidth, 1}, nn::Activation::kSigmoid,
                       root.child_seed("init/student"));
  result.ensemble.shards =
      partition_labeled(labeled.size(), rc.k, root.child_seed("shards"));
  result.ensemble.teachers.reserve(static_cast<std::size_t>(rc.k));
  for (std::int64_t i = 0; i < rc.k; ++i) {
    result.ensemble.teachers.push_back(nn::init_network(
        {d + m, kHiddenWidth, 1}, nn::Activation::kSigmoid,
        root.child_seed("init/teacher", static_cast<std::uint64_t>(i))));
  }
  result.ledger.mu_cap = rc.mu_cap;

  std::int64_t round = 0;
  while (!gdp::ledger_exhausted(result.ledger)) {
    const bool recording = trace != nullptr && round == trace_round;
    if (recording) {
      trace->round = round;
      trace->generator_before = result.generator.params;
      trace->classifier_before = result.classifier.params;
      trace->student_before = result.student.params;
      trace->teachers_before.clear();
      for (const auto& t : result.ensemble.teachers) {
        trace->teachers_before.push_back(t.params);
      }
    }

    train_teachers(result.ensemble, result.generator, labeled, rc,
                   root.split("teachers", static_cast<std::uint64_t>(round)),
                   recording ? &trace->teacher_trace : nullptr);

    const bool warmup = round < rc.warmup_rounds;
    RoundMetrics metrics;
    metrics.round = round;
    double loss_d_sum = 0.0;
    std::int64_t charged_steps = 0;
    std::int64_t queries = 0;
    std::int64_t abstained = 0;
    double margin_sum = 0.0;
    std::int64_t margin_count = 0;
    for (std::int64_t s = 0; s < rc.n_s; ++s) {
      StudentStepTrace* step_trace =
          recording ? &trace->student_steps.emplace_back() : nullptr;
      const StudentStepStats stats = student_step(
          result.student, result.classifier, result.generator,
          result.ensemble, labeled, unlabeled, rc, result.ledger, warmup,
          root.split("student",
                     static_cast<std::uint64_t>(result.report.student_steps)),
          step_trace);
      if (stats.refused) break;
      result.report.student_steps += 1;
      charged_steps += 1;
      loss_d_sum += stats.loss1 + stats.loss2;
      queries += stats.generator_queries;
      abstained += stats.abstained;
      margin_sum += stats.margin_sum;
      margin_count += stats.margin_count;
    }

    metrics.loss_c = classifier_step(
        result.classifier, result.student, result.generator, labeled,
        unlabeled, rc,
        root.split("classifier", static_cast<std::uint64_t>(round)),
        recording ? &trace->classifier_trace : nullptr);
    metrics.loss_g = generator_step(
        result.generator, result.student, rc,
        root.split("generator", static_cast<std::uint64_t>(round)),
        recording ? &trace->generator_trace : nullptr);

    metrics.mu_spent = result.ledger.mu_spent;
    metrics.epsilon = epsilon_or_inf(result.ledger.mu_spent, rc.dp_delta);
    metrics.loss_d =
        charged_steps > 0 ? loss_d_sum / static_cast<double>(charged_steps)
                          : 0.0;
    metrics.abstain_rate =
        queries > 0 ? static_cast<double>(abstained) /
                          static_cast<double>(queries)
                    : 0.0;
    metrics.teacher_margin_mean =
        margin_count > 0 ? margin_sum / static_cast<double>(margin_count)
                         : 0.0;
    result.report.rounds.push_back(metrics);
    result.report.rounds_completed += 1;
    round += 1;
  }

  result.report.final_mu = result.ledger.mu_spent;
  result.report.final_epsilon =
      epsilon_or_inf(result.ledger.mu_spent, rc.dp_delta);
  return result;
}

}  // namespace ptgan::train
