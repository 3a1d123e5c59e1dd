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

#include "ptgan/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ptgan::gdp {
namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kLogSqrt2Pi = 0.9189385332046727;  // log(sqrt(2*pi))
constexpr double kEpsilonBracketHigh = 200.0;
constexpr double kEpsilonTolerance = 1e-9;

void check_finite_nonneg(double mu) {
  if (!std::isfinite(mu) || mu < 0.0) {
    throw std::invalid_argument("GDP budget mu must be finite and >= 0");
  }
}

}  // namespace

double standard_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / kSqrt2);
}

double log_standard_normal_cdf(double x) {
  if (x > -1.0) {
    return std::log(standard_normal_cdf(x));
  }
  if (x > -36.0) {
    // erfc(|x|/sqrt(2)) is still normal here (underflows near x = -37.6).
    return std::log(0.5) + std::log(std::erfc(-x / kSqrt2));
  }
  // Asymptotic expansion of the Mills ratio:
  //   Phi(x) ~ phi(x)/|x| * (1 - 1/x^2 + 3/x^4 - 15/x^6), x -> -inf.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) -
                        15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - kLogSqrt2Pi + std::log1p(series - 1.0);
}

GdpBudget compose(std::span<const GdpBudget> budgets) {
  double sum_sq = 0.0;
  for (const GdpBudget& b : budgets) {
    check_finite_nonneg(b.mu);
    sum_sq += b.mu * b.mu;
  }
  return GdpBudget{std::sqrt(sum_sq)};
}

GdpBudget compose(const std::vector<GdpBudget>& budgets) {
  return compose(std::span<const GdpBudget>(budgets));
}

double mu_to_delta(const GdpBudget& budget, double epsilon) {
  check_finite_nonneg(budget.mu);
  if (!std::isfinite(epsilon) || epsilon < 0.0) {
    throw std::invalid_argument("epsilon must be finite and >= 0");
  }
  const double mu = budget.mu;
  if (mu == 0.0) return 0.0;

  const double a = -epsilon / mu + mu / 2.0;
  const double b = -epsilon / mu - mu / 2.0;
  // e^eps * Phi(b) in log space: eps + log Phi(b) stays representable long
  // after either factor alone would overflow or underflow.
  const double term2 = std::exp(epsilon + log_standard_normal_cdf(b));
  const double delta = standard_normal_cdf(a) - term2;
  return std::clamp(delta, 0.0, 1.0);
}

double mu_to_epsilon(const GdpBudget& budget, double delta_target) {
  if (!std::isfinite(budget.mu) || budget.mu <= 0.0) {
    throw std::invalid_argument("mu_to_epsilon requires mu > 0");
  }
  if (!std::isfinite(delta_target) || delta_target <= 0.0) {
    throw std::invalid_argument("delta_target must be in (0, 1)");
  }
  if (mu_to_delta(budget, 0.0) <= delta_target) return 0.0;
  if (mu_to_delta(budget, kEpsilonBracketHigh) > delta_target) {
    std::ostringstream msg;
    msg << "no epsilon in [0, " << kEpsilonBracketHigh << "] reaches delta "
        << delta_target << " at mu " << budget.mu;
    throw std::invalid_argument(msg.str());
  }
  double lo = 0.0;
  double hi = kEpsilonBracketHigh;
  // delta(eps) is strictly decreasing, so plain bisection converges.
  while (hi - lo > kEpsilonTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mu_to_delta(budget, mid) > delta_target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

GdpBudget mu_for_eps_delta(double epsilon, double delta) {
  if (!std::isfinite(epsilon) || epsilon < 0.0) {
    throw std::invalid_argument("epsilon must be finite and >= 0");
  }
  if (!std::isfinite(delta) || delta <= 0.0 || delta >= 1.0) {
    throw std::invalid_argument("delta must be in (0, 1)");
  }
  double lo = 0.0;
  double hi = 1.0;
  while (mu_to_delta(GdpBudget{hi}, epsilon) < delta) {
    hi *= 2.0;
    if (hi > 1e6) {
      throw std::invalid_argument("no mu <= 1e6 matches the requested curve");
    }
  }
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (mu_to_delta(GdpBudget{mid}, epsilon) < delta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return GdpBudget{0.5 * (lo + hi)};
}

GdpBudget subsampled_mu(const SubsampledGaussianSpec& spec) {
  if (!(spec.sampling_rate > 0.0) || spec.sampling_rate > 1.0) {
    throw std::invalid_argument("sampling_rate must be in (0, 1]");
  }
  if (spec.steps < 1) {
    throw std::invalid_argument("steps must be >= 1");
  }
  if (!(spec.noise_multiplier > 0.0)) {
    throw std::invalid_argument("noise_multiplier must be > 0");
  }
  const double inv_z2 = 1.0 / (spec.noise_multiplier * spec.noise_multiplier);
  // e^{1/z^2} overflows a double for z below 1/sqrt(log(DBL_MAX)).
  const double min_z =
      1.0 / std::sqrt(std::log(std::numeric_limits<double>::max()));
  if (inv_z2 >= std::log(std::numeric_limits<double>::max())) {
    std::ostringstream msg;
    msg << "noise_multiplier " << spec.noise_multiplier
        << " too small: e^(1/z^2) overflows; minimum supported z is about "
        << min_z;
    throw std::overflow_error(msg.str());
  }
  const double mu = spec.sampling_rate *
                    std::sqrt(static_cast<double>(spec.steps) *
                              std::expm1(inv_z2));
  if (!std::isfinite(mu)) {
    throw std::overflow_error("subsampled mu overflows a double");
  }
  return GdpBudget{mu};
}

GdpBudget gnmax_mu(const GnmaxSpec& spec) {
  if (!(spec.sigma2 > 0.0)) {
    throw std::invalid_argument("sigma2 must be > 0");
  }
  if (spec.queries_per_step < 1 || spec.steps < 1) {
    throw std::invalid_argument("queries_per_step and steps must be >= 1");
  }
  const double mu =
      std::sqrt(2.0 * static_cast<double>(spec.queries_per_step) *
                static_cast<double>(spec.steps)) /
      spec.sigma2;
  if (!std::isfinite(mu)) {
    throw std::overflow_error("gnmax mu overflows a double");
  }
  return GdpBudget{mu};
}

GdpBudget total_mu(const AccountingParams& params, std::int64_t steps) {
  if (params.n_c < 1 || params.n_d < 1 || params.n_c > params.n_d) {
    throw std::invalid_argument("need 1 <= n_c <= n_d");
  }
  const SubsampledGaussianSpec sub{
      static_cast<double>(params.n_c) / static_cast<double>(params.n_d),
      params.noise_multiplier, steps};
  const GnmaxSpec gn{params.sigma2, params.n_g, steps};
  const GdpBudget parts[2] = {subsampled_mu(sub), gnmax_mu(gn)};
  return compose(std::span<const GdpBudget>(parts, 2));
}

GdpBudget total_mu(std::int64_t n_c, std::int64_t n_d, double noise_multiplier,
                   std::int64_t n_g, double sigma2, std::int64_t steps) {
  return total_mu(AccountingParams{n_c, n_d, noise_multiplier, n_g, sigma2},
                  steps);
}

void ledger_charge(BudgetLedger& ledger, const AccountingParams& params) {
  ledger.steps_taken += 1;
  ledger.mu_spent = total_mu(params, ledger.steps_taken).mu;
  ledger.history.emplace_back(ledger.steps_taken, ledger.mu_spent);
}

bool ledger_exhausted(const BudgetLedger& ledger) {
  return ledger.mu_spent >= ledger.mu_cap;
}

}  // namespace ptgan::gdp
