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

#ifndef PTGAN_TRAINER_HPP_
#define PTGAN_TRAINER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ptgan/accountant.hpp"
#include "ptgan/aggregation.hpp"
#include "ptgan/data_io.hpp"
#include "ptgan/dpsgd.hpp"
#include "ptgan/nn.hpp"
#include "ptgan/rng.hpp"

namespace ptgan::train {

// Full knob set of a training run. Config-file keys use exactly these field
// names. sigma1 < 0 means "use sigma2"; threshold < 0 means "use 0.7 * k";
// classes == 0 means "infer from the labeled set".
struct TrainConfig {
  double alpha = 0.5;        // generator share of the adversarial mass, (0,1)
  double alpha_p = 0.1;      // weight of the classifier's generator-sample CE
  std::int64_t n_c = 128;    // classifier-origin pairs per student step
  std::int64_t n_g = 128;    // generator-origin pairs per student step
  std::int64_t n_s = 5;      // student steps per round
  std::int64_t n_k = 5;      // teacher steps per round
  std::int64_t k = 100;      // teacher count
  double mu_cap = 1.0;       // privacy budget mu_0
  double dp_delta = 1e-5;    // delta at which epsilon is reported
  double clip_bound = 1.0;         // DPSGD R
  double noise_multiplier = 0.4;   // DPSGD z (0 = noiseless test mode)
  double sigma1 = -1.0;            // confidence-gate noise
  double sigma2 = 300.0;           // vote-release noise
  double threshold = -1.0;         // confidence gate T_e
  double learning_rate = 1e-4;
  std::int64_t classes = 0;        // m
  std::int64_t noise_dim = 8;
  double percent = 0.8;            // unlabeled fraction at split time
  std::int64_t warmup_rounds = 0;
  std::uint64_t seed = 42;
  bool classifier_uses_labeled = true;
  bool non_saturating_generator = false;
};

// Flat key = value file, one pair per line, '#' comments. Keys are exactly
// the TrainConfig field names; unknown keys are errors. Values parsed on top
// of `base` so flags can override afterwards.
TrainConfig parse_config_file(const std::string& path, TrainConfig base);
void apply_config_entry(TrainConfig& cfg, const std::string& key,
                        const std::string& value);
// The config as flat key/value pairs (for manifests), in declaration order.
std::vector<std::pair<std::string, std::string>> config_entries(
    const TrainConfig& cfg);

// Fills the sigma1/threshold/classes defaults from the data and validates
// everything (ConfigError on violations).
TrainConfig resolve_config(TrainConfig cfg, const data::Dataset& labeled,
                           const data::Dataset& unlabeled);

struct TeacherEnsemble {
  std::vector<nn::DenseNetwork> teachers;
  std::vector<std::vector<std::size_t>> shards;  // indices into the labeled set
};

// Deterministic shuffle of [0, n_labeled), truncated to k * floor(n/k) and
// cut into k equal shards. Warns on stderr when the remainder is dropped.
std::vector<std::vector<std::size_t>> partition_labeled(std::size_t n_labeled,
                                                        std::int64_t k,
                                                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Optional step instrumentation. Every random draw a step consumes is
// recorded, along with the privacy-relevant intermediates, so tests can
// replay a round against an independent reference and assert that nothing
// reaches the student except through clipping+noise and jury decisions.

struct TeacherRoundTrace {
  // fake_z[i][t] / fake_y[i][t]: generator inputs teacher i consumed at its
  // t-th step this round.
  std::vector<std::vector<std::vector<std::vector<double>>>> fake_z;
  std::vector<std::vector<std::vector<std::int64_t>>> fake_y;
};

struct StudentStepTrace {
  bool refused = false;
  bool warmup = false;
  std::vector<std::size_t> sample_indices;  // into the unlabeled pool
  std::vector<std::int64_t> classifier_labels;
  std::vector<pate::VoteHistogram> classifier_votes;  // empty during warmup
  std::vector<double> classifier_targets;             // r for each pair
  nn::PerExampleGrads loss1_raw_grads;
  nn::PerExampleGrads loss1_clipped_grads;
  std::vector<double> dpsgd_noise;   // empty when z == 0
  std::vector<double> dpsgd_output;
  std::vector<std::vector<double>> gen_z;
  std::vector<std::int64_t> gen_y;
  std::vector<pate::VoteHistogram> gen_votes;
  std::vector<pate::Decision> gen_decisions;
  std::vector<double> loss2_grad;    // zeros when nothing survived
  std::vector<double> combined_grad;
  std::vector<double> student_params_before;
};

struct ClassifierStepTrace {
  std::vector<std::size_t> pool_indices;     // into unlabeled ++ labeled
  std::vector<std::size_t> labeled_indices;  // into the labeled set
  std::vector<std::vector<double>> gen_z;
  std::vector<std::int64_t> gen_y;
  std::vector<double> classifier_params_before;
  std::vector<double> applied_grad;
};

struct GeneratorStepTrace {
  std::vector<std::vector<double>> gen_z;
  std::vector<std::int64_t> gen_y;
  std::vector<double> generator_params_before;
  std::vector<double> applied_grad;
};

struct RoundTrace {
  std::int64_t round = -1;
  std::vector<double> generator_before, classifier_before, student_before;
  std::vector<std::vector<double>> teachers_before;
  TeacherRoundTrace teacher_trace;
  std::vector<StudentStepTrace> student_steps;
  ClassifierStepTrace classifier_trace;
  GeneratorStepTrace generator_trace;
};

// ---------------------------------------------------------------------------
// Training steps. Each takes the RngStream base for exactly this invocation;
// sub-streams are derived by name inside, so one step's draw count never
// shifts another's sequences.

// n_k plain steps per teacher on its own shard (warm start: parameters carry
// over between rounds). Real pairs come from the shard with target Real;
// fake pairs, resampled per step from the teacher's own stream, come from
// the frozen generator with target Fake. A teacher's update depends only on
// its shard, the generator, and its own stream.
void train_teachers(TeacherEnsemble& ensemble,
                    const nn::DenseNetwork& generator,
                    const data::Dataset& labeled, const TrainConfig& cfg,
                    RngStream rng, TeacherRoundTrace* trace = nullptr);

struct StudentStepStats {
  bool charged = false;
  bool refused = false;
  double loss1 = 0.0;
  double loss2 = 0.0;
  std::int64_t generator_queries = 0;
  std::int64_t abstained = 0;
  double margin_sum = 0.0;  // sum over queries of |count_real-count_fake|/k
  std::int64_t margin_count = 0;
};

// One private student update + one ledger charge. Refuses (returns
// refused=true, touches nothing) when the ledger is already exhausted.
// During warmup, classifier-origin targets are forced to Fake without
// querying the jury and the generator-origin branch is skipped entirely.
StudentStepStats student_step(nn::DenseNetwork& student,
                              const nn::DenseNetwork& classifier,
                              const nn::DenseNetwork& generator,
                              const TeacherEnsemble& ensemble,
                              const data::Dataset& labeled,
                              const data::Dataset& unlabeled,
                              const TrainConfig& cfg,
                              gdp::BudgetLedger& ledger, bool warmup,
                              RngStream rng,
                              StudentStepTrace* trace = nullptr);

// One descent step on the classifier objective:
//   alpha * sum_i E_{y ~ C(d_i)} [log(1 - S(d_i, y))]
//   + CE(classifier, labeled minibatch)
//   + alpha_p * CE(classifier, generator minibatch vs conditioning labels).
// The expectation over the classifier's own softmax is computed exactly
// (classes are enumerable), so the objective is deterministic and
// differentiable. The adversarial pool is unlabeled ++ labeled features when
// classifier_uses_labeled is set, else the unlabeled pool alone. When
// alpha_p == 0 the generator minibatch is not even sampled.
// Returns the objective value.
double classifier_step(nn::DenseNetwork& classifier,
                       const nn::DenseNetwork& student,
                       const nn::DenseNetwork& generator,
                       const data::Dataset& labeled,
                       const data::Dataset& unlabeled, const TrainConfig& cfg,
                       RngStream rng, ClassifierStepTrace* trace = nullptr);

// One descent step on (1 - alpha) * sum_j log(1 - S(G(z_j|y_j), y_j)),
// or the non-saturating variant -(1 - alpha) * sum_j log S(...) when
// configured. Returns the objective value.
double generator_step(nn::DenseNetwork& generator,
                      const nn::DenseNetwork& student, const TrainConfig& cfg,
                      RngStream rng, GeneratorStepTrace* trace = nullptr);

// ---------------------------------------------------------------------------
// Full run.

struct RoundMetrics {
  std::int64_t round = 0;
  double mu_spent = 0.0;
  double epsilon = 0.0;
  double loss_d = 0.0;
  double loss_c = 0.0;
  double loss_g = 0.0;
  double abstain_rate = 0.0;
  double teacher_margin_mean = 0.0;
};

// The metrics CSV column set, in order.
std::string metrics_csv_header();
std::string metrics_csv_row(const RoundMetrics& m);

struct RunReport {
  std::vector<RoundMetrics> rounds;
  double final_mu = 0.0;
  double final_epsilon = 0.0;
  std::int64_t student_steps = 0;
  std::int64_t rounds_completed = 0;
};

struct TrainResult {
  nn::DenseNetwork generator;
  nn::DenseNetwork classifier;
  nn::DenseNetwork student;
  TeacherEnsemble ensemble;
  gdp::BudgetLedger ledger;
  RunReport report;
};

// epsilon for the current spend, +inf when the spend admits no epsilon in
// the accountant's bracket (including mu = +inf in noiseless test mode).
double epsilon_or_inf(double mu, double dp_delta);

// The per-step accounting inputs a config implies. n_d is the full dataset
// size when classifier_uses_labeled is set, else the unlabeled pool size.
gdp::AccountingParams accounting_params(const TrainConfig& cfg,
                                        std::size_t n_labeled,
                                        std::size_t n_unlabeled);

// The whole loop: rounds of (teachers, n_s student steps, classifier step,
// generator step) until the budget ledger is exhausted. Cheap when mu_cap
// is small, unbounded when it is generous; every student step charges the
// ledger. If `trace` is non-null, the round with index `trace_round` is
// recorded into it.
TrainResult train(const TrainConfig& cfg, const data::Dataset& labeled,
                  const data::Dataset& unlabeled,
                  RoundTrace* trace = nullptr, std::int64_t trace_round = 0);

// Shared helpers (also used by tests and the eval harness): one-hot pair
// encodings and generator inputs.
nn::RealTensor build_pair_batch(const std::vector<std::vector<double>>& xs,
                                const std::vector<std::int64_t>& ys,
                                std::int64_t num_classes);
nn::RealTensor build_generator_input(const std::vector<std::vector<double>>& zs,
                                     const std::vector<std::int64_t>& ys,
                                     std::int64_t num_classes);

}  // namespace ptgan::train

#endif  // PTGAN_TRAINER_HPP_
