#pragma once

// Bivariate Poisson distribution, its EM regression fit and the
// diagonal-inflated mixture.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "wcsim/dataio.hpp"
#include "wcsim/error.hpp"
#include "wcsim/glm.hpp"

namespace wcsim {

/// (Y1, Y2) = (X1 + X0, X2 + X0) with independent Poisson X1, X2, X0.
struct BivariateRates {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda0 = 0.0;

  BivariateRates scaled(double f) const { return {lambda1 * f, lambda2 * f, lambda0 * f}; }
};

/// Mixture weight p on a diagonal component with mass theta[k] at k:k, k = 0, 1, 2.
struct DiagonalInflation {
  double p = 0.0;
  std::array<double, 3> theta{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  double mass(int y1, int y2) const {
    return (y1 == y2 && y1 >= 0 && y1 <= 2) ? theta[static_cast<std::size_t>(y1)] : 0.0;
  }
};

namespace detail {

// Log of the k-th summand of the bivariate pmf (without the exp(-sum) factor).
inline double bivpois_log_term(int y1, int y2, int k, double l1, double l2, double l0) {
  auto xlogy = [](int x, double lam) { return x == 0 ? 0.0 : x * std::log(lam); };
  return xlogy(y1 - k, l1) + xlogy(y2 - k, l2) + xlogy(k, l0) - std::lgamma(y1 - k + 1.0) -
         std::lgamma(y2 - k + 1.0) - std::lgamma(k + 1.0);
}

struct PosteriorShared {
  double log_pmf;
  double expected_x0;  // E[X0 | Y1 = y1, Y2 = y2]
};

inline PosteriorShared bivpois_posterior(int y1, int y2, const BivariateRates& r) {
  const int kmax = r.lambda0 > 0.0 ? std::min(y1, y2) : 0;
  double top = -std::numeric_limits<double>::infinity();
  std::array<double, 64> small{};
  std::vector<double> big;
  double* t = small.data();
  if (kmax + 1 > static_cast<int>(small.size())) {
    big.resize(static_cast<std::size_t>(kmax) + 1);
    t = big.data();
  }
  for (int k = 0; k <= kmax; ++k) {
    t[k] = bivpois_log_term(y1, y2, k, r.lambda1, r.lambda2, r.lambda0);
    top = std::max(top, t[k]);
  }
  double sum = 0.0, ksum = 0.0;
  for (int k = 0; k <= kmax; ++k) {
    const double e = std::exp(t[k] - top);
    sum += e;
    ksum += k * e;
  }
  return {-(r.lambda1 + r.lambda2 + r.lambda0) + top + std::log(sum), ksum / sum};
}

}  // namespace detail

inline double bivpois_log_pmf(int y1, int y2, const BivariateRates& r) {
  if (y1 < 0 || y2 < 0) return -std::numeric_limits<double>::infinity();
  return detail::bivpois_posterior(y1, y2, r).log_pmf;
}

inline double bivpois_pmf(int y1, int y2, const BivariateRates& r) {
  return std::exp(bivpois_log_pmf(y1, y2, r));
}

/// Mixture (1 - p) BP(r) + p Diag(theta).
inline double inflated_pmf(int y1, int y2, const BivariateRates& r, const DiagonalInflation& d) {
  return (1.0 - d.p) * bivpois_pmf(y1, y2, r) + d.p * d.mass(y1, y2);
}

namespace detail {
/// Simulated goals per side are truncated here; far above any observed score.
inline constexpr int kMaxGoals = 30;

template <class URBG>
int poisson_draw(double mean, URBG& rng) {
  if (std::isnan(mean)) throw Error("goal rate is NaN");
  if (!(mean > 0.0)) return 0;
  if (mean > 1e4) return kMaxGoals;
  return std::min(std::poisson_distribution<int>(mean)(rng), kMaxGoals);
}
}  // namespace detail

template <class URBG>
std::pair<int, int> bivpois_sample(const BivariateRates& r, URBG& rng) {
  const int x1 = detail::poisson_draw(r.lambda1, rng);
  const int x2 = detail::poisson_draw(r.lambda2, rng);
  const int x0 = detail::poisson_draw(r.lambda0, rng);
  return {x1 + x0, x2 + x0};
}

/// Team-level bivariate regression: log mu = a10 + a11 elo, log nu = a20 + a21 elo,
/// log tau = a30.
struct BivariateTeamFit {
  std::array<double, 2> mu_coeffs{};
  std::array<double, 2> nu_coeffs{};
  double tau_coeff = 0.0;
  double loglik = 0.0;
  double aic = 0.0;
  int iterations = 0;
  bool tau_at_lower_bound = false;
  std::vector<double> loglik_trace;

  double mu(double elo) const { return std::exp(mu_coeffs[0] + mu_coeffs[1] * elo); }
  double nu(double elo) const { return std::exp(nu_coeffs[0] + nu_coeffs[1] * elo); }
  double tau() const { return std::exp(tau_coeff); }

  BivariateRates rates_against(double opponent_elo) const {
    return {mu(opponent_elo), nu(opponent_elo), tau()};
  }
};

struct InflatedFit {
  BivariateTeamFit base;
  DiagonalInflation inflation;
  double aic = 0.0;
};

struct EmOptions {
  int max_iterations = 500;
  double tolerance = 1e-8;
  double tau_start = 0.1;
  double tau_floor = 1e-8;
  double inflation_start = 0.1;
};

inline constexpr std::size_t kMinBivariateObservations = 6;

/// Observed-data log-likelihood of coefficients (a10, a11, a20, a21, a30).
inline double bivpois_loglik(const std::array<double, 5>& c, std::span<const Observation> obs,
                             const DiagonalInflation* inflation = nullptr) {
  double ll = 0.0;
  for (const auto& o : obs) {
    BivariateRates r{std::exp(c[0] + c[1] * o.opponent_elo), std::exp(c[2] + c[3] * o.opponent_elo),
                     std::exp(c[4])};
    if (inflation) ll += std::log(inflated_pmf(o.goals_for, o.goals_against, r, *inflation));
    else ll += bivpois_log_pmf(o.goals_for, o.goals_against, r);
  }
  return ll;
}

namespace detail {

struct EmState {
  BivariateTeamFit fit;
  DiagonalInflation inflation{0.0, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
};

inline double em_loglik(const EmState& s, std::span<const Observation> obs, bool inflate) {
  std::array<double, 5> c{s.fit.mu_coeffs[0], s.fit.mu_coeffs[1], s.fit.nu_coeffs[0],
                          s.fit.nu_coeffs[1], s.fit.tau_coeff};
  return bivpois_loglik(c, obs, inflate ? &s.inflation : nullptr);
}

// One EM update: E-step at `s`, exact M-step. Returns the new state.
inline EmState em_step(const EmState& s, std::span<const Observation> obs, bool inflate,
                       const Eigen::MatrixXd& elo, const EmOptions& opts) {
  const auto n = static_cast<Eigen::Index>(obs.size());
  Eigen::VectorXd x1(n), x2(n), w(n);
  std::array<double, 3> diag_resp{};
  double resp_total = 0.0, shared = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = obs[static_cast<std::size_t>(i)];
    const auto rates = s.fit.rates_against(o.opponent_elo);
    const auto post = bivpois_posterior(o.goals_for, o.goals_against, rates);
    double diag = 0.0;
    if (inflate) {
      const double dm = s.inflation.p * s.inflation.mass(o.goals_for, o.goals_against);
      if (dm > 0.0) {
        const double bp = (1.0 - s.inflation.p) * std::exp(post.log_pmf);
        diag = dm / (dm + bp);
        diag_resp[static_cast<std::size_t>(o.goals_for)] += diag;
        resp_total += diag;
      }
    }
    w[i] = 1.0 - diag;
    x1[i] = std::max(0.0, o.goals_for - post.expected_x0);
    x2[i] = std::max(0.0, o.goals_against - post.expected_x0);
    shared += w[i] * post.expected_x0;
  }

  EmState next = s;
  Eigen::VectorXd start1(2), start2(2);
  start1 << s.fit.mu_coeffs[0], s.fit.mu_coeffs[1];
  start2 << s.fit.nu_coeffs[0], s.fit.nu_coeffs[1];
  const auto f1 = fit_poisson(elo, x1, w, {}, start1);
  const auto f2 = fit_poisson(elo, x2, w, {}, start2);
  next.fit.mu_coeffs = {f1.coefficients[0], f1.coefficients[1]};
  next.fit.nu_coeffs = {f2.coefficients[0], f2.coefficients[1]};
  const double tau = shared / w.sum();
  next.fit.tau_at_lower_bound = !(tau > opts.tau_floor);
  next.fit.tau_coeff = std::log(std::max(tau, opts.tau_floor));
  if (inflate) {
    next.inflation.p = resp_total / static_cast<double>(n);
    if (resp_total > 0.0)
      for (std::size_t k = 0; k < 3; ++k) next.inflation.theta[k] = diag_resp[k] / resp_total;
  }
  return next;
}

inline EmState run_em(EmState state, std::span<const Observation> obs, bool inflate,
                      const EmOptions& opts) {
  const auto n = static_cast<Eigen::Index>(obs.size());
  Eigen::MatrixXd elo(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) elo(i, 0) = obs[static_cast<std::size_t>(i)].opponent_elo;

  double ll = em_loglik(state, obs, inflate);
  state.fit.loglik_trace = {ll};
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    EmState next = em_step(state, obs, inflate, elo, opts);
    const double nll = em_loglik(next, obs, inflate);
    if (!std::isfinite(nll)) throw FitError("EM log-likelihood is not finite", state.fit.loglik_trace);
    if (nll < ll - 1e-9 * (1.0 + std::abs(ll)))
      throw FitError("EM log-likelihood decreased", state.fit.loglik_trace);
    next.fit.loglik_trace = std::move(state.fit.loglik_trace);
    next.fit.loglik_trace.push_back(nll);
    state = std::move(next);
    const double gain = nll - ll;
    ll = nll;
    if (gain < opts.tolerance) {
      ++it;
      break;
    }
  }
  state.fit.iterations = it;
  state.fit.loglik = ll;
  return state;
}

inline void check_bivariate_input(std::span<const Observation> obs) {
  if (obs.size() < kMinBivariateObservations)
    throw FitError("bivariate fit needs at least " + std::to_string(kMinBivariateObservations) +
                   " observations, got " + std::to_string(obs.size()));
  const double e0 = obs.front().opponent_elo;
  if (std::all_of(obs.begin(), obs.end(), [&](const Observation& o) { return o.opponent_elo == e0; }))
    throw FitError("rank-deficient design: constant opponent Elo");
}

}  // namespace detail

/// EM estimate of the team-level bivariate Poisson regression.
/// mu and nu start from independent Poisson fits, tau from `opts.tau_start`.
inline BivariateTeamFit fit_bivpois_em(std::span<const Observation> obs, const EmOptions& opts = {}) {
  detail::check_bivariate_input(obs);
  const auto n = static_cast<Eigen::Index>(obs.size());
  Eigen::MatrixXd elo(n, 1);
  Eigen::VectorXd gf(n), ga(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = obs[static_cast<std::size_t>(i)];
    elo(i, 0) = o.opponent_elo;
    gf[i] = o.goals_for;
    ga[i] = o.goals_against;
  }
  detail::EmState s;
  const auto a = fit_poisson(elo, gf);
  const auto b = fit_poisson(elo, ga);
  s.fit.mu_coeffs = {a.coefficients[0], a.coefficients[1]};
  s.fit.nu_coeffs = {b.coefficients[0], b.coefficients[1]};
  s.fit.tau_coeff = std::log(opts.tau_start);

  s = detail::run_em(std::move(s), obs, false, opts);
  s.fit.aic = 2.0 * 5 - 2.0 * s.fit.loglik;
  return s.fit;
}

/// Bivariate Poisson with optional diagonal inflation on 0:0, 1:1, 2:2.
/// The inflated EM starts from the converged plain fit with p = opts.inflation_start
/// and uniform theta. AIC counts 5 regression parameters plus p and two free theta.
inline InflatedFit fit_inflated_em(std::span<const Observation> obs, bool inflate,
                                   const EmOptions& opts = {}) {
  InflatedFit out;
  out.base = fit_bivpois_em(obs, opts);
  if (!inflate) {
    out.inflation = DiagonalInflation{0.0, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
    out.aic = out.base.aic;
    return out;
  }
  detail::EmState s;
  s.fit = out.base;
  s.fit.loglik_trace.clear();
  s.inflation = DiagonalInflation{opts.inflation_start, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
  s = detail::run_em(std::move(s), obs, true, opts);
  out.base = s.fit;
  out.inflation = s.inflation;
  out.aic = 2.0 * (5 + 3) - 2.0 * s.fit.loglik;
  out.base.aic = out.aic;
  return out;
}

/// Match rates for A vs B averaged from both teams' regressions.
inline BivariateRates combine_rates(const BivariateTeamFit& a, const BivariateTeamFit& b,
                                    double elo_a, double elo_b) {
  return {(a.mu(elo_b) + b.nu(elo_a)) / 2.0, (b.mu(elo_a) + a.nu(elo_b)) / 2.0,
          (a.tau() + b.tau()) / 2.0};
}

}  // namespace wcsim
