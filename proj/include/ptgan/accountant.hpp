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

#ifndef PTGAN_ACCOUNTANT_HPP_
#define PTGAN_ACCOUNTANT_HPP_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace ptgan::gdp {

// Gaussian differential privacy level. mu = 0 is perfect privacy; larger
// mu is weaker. All functions here are pure: same inputs, bit-identical
// outputs, no hidden state.
struct GdpBudget {
  double mu = 0.0;
};

struct EpsDelta {
  double epsilon = 0.0;
  double delta = 0.0;
};

// A run of T adaptive steps of the subsampled Gaussian mechanism
// (Poisson-style sampling rate p, noise multiplier z), accounted with the
// central-limit-theorem approximation mu = p * sqrt(T * (e^{1/z^2} - 1)).
struct SubsampledGaussianSpec {
  double sampling_rate = 0.0;    // p in (0, 1]
  double noise_multiplier = 0.0; // z > 0
  std::int64_t steps = 0;        // T >= 1
};

// T steps of GNMax vote aggregation: each answered query releases an argmax
// over two vote counts (sensitivity 1 each) noised with sigma2, costing
// sqrt(2)/sigma2 per query; queries_per_step queries are charged per step.
struct GnmaxSpec {
  double sigma2 = 0.0;            // > 0
  std::int64_t queries_per_step = 0;  // n_g >= 1
  std::int64_t steps = 0;             // T >= 1
};

// Standard normal CDF via the complementary error function.
// Absolute error <= 1e-12 over the whole real line (in practice a few ulp).
double standard_normal_cdf(double x);

// log(Phi(x)), stable for arbitrarily negative x (asymptotic expansion once
// erfc underflows). Used so e^eps * Phi(...) never overflows en route to a
// representable product.
double log_standard_normal_cdf(double x);

// Composition: mu = sqrt(sum of mu_i^2). Empty input composes to 0.
// Throws std::invalid_argument on negative or non-finite entries.
GdpBudget compose(std::span<const GdpBudget> budgets);
GdpBudget compose(const std::vector<GdpBudget>& budgets);

// The tight (eps, delta) curve of a mu-GDP mechanism:
//   delta(eps) = Phi(-eps/mu + mu/2) - e^eps * Phi(-eps/mu - mu/2),
// clamped into [0, 1]. mu = 0 maps to delta = 0 for every eps.
double mu_to_delta(const GdpBudget& budget, double epsilon);

// Inverse of the curve in eps: smallest eps >= 0 with
// delta(eps) <= delta_target, found by bisection on [0, 200] to an absolute
// tolerance of 1e-9. Returns 0 when delta_target >= delta(0). Throws
// std::invalid_argument when mu <= 0, delta_target <= 0, or no epsilon in
// [0, 200] reaches the target.
double mu_to_epsilon(const GdpBudget& budget, double delta_target);

// Inverse of the curve in mu: the mu whose delta(epsilon) equals delta.
// Bisection over mu; monotone because delta(eps) is strictly increasing
// in mu for fixed eps.
GdpBudget mu_for_eps_delta(double epsilon, double delta);

GdpBudget subsampled_mu(const SubsampledGaussianSpec& spec);
GdpBudget gnmax_mu(const GnmaxSpec& spec);

// Per-step accounting inputs of one training step: a subsampled Gaussian
// gradient release (batch n_c of a pool of n_d) plus n_g GNMax queries.
struct AccountingParams {
  std::int64_t n_c = 0;
  std::int64_t n_d = 0;
  double noise_multiplier = 0.0;
  std::int64_t n_g = 0;
  double sigma2 = 0.0;
};

// Total budget after `steps` training steps:
//   mu = sqrt((n_c/n_d)^2 * T * (e^{1/z^2} - 1) + 2 * n_g * T / sigma2^2),
// computed as compose({subsampled_mu, gnmax_mu}) so the two always agree
// bit for bit.
GdpBudget total_mu(const AccountingParams& params, std::int64_t steps);
GdpBudget total_mu(std::int64_t n_c, std::int64_t n_d, double noise_multiplier,
                   std::int64_t n_g, double sigma2, std::int64_t steps);

// Running budget of a training run. mu_spent is always total_mu evaluated at
// T = steps_taken; history records (step, mu after that step).
struct BudgetLedger {
  double mu_spent = 0.0;
  double mu_cap = 0.0;
  std::int64_t steps_taken = 0;
  std::vector<std::pair<std::int64_t, double>> history;
};

// Charges one step: increments steps_taken and recomputes mu_spent from the
// closed form (no incremental drift).
void ledger_charge(BudgetLedger& ledger, const AccountingParams& params);

// True once mu_spent >= mu_cap (inclusive: landing exactly on the cap stops).
bool ledger_exhausted(const BudgetLedger& ledger);

}  // namespace ptgan::gdp

#endif  // PTGAN_ACCOUNTANT_HPP_
