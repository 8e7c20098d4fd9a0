#pragma once

// Poisson regression with log link and its goodness-of-fit diagnostics.

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wcsim/error.hpp"

namespace wcsim {

/// Result of a Poisson GLM fit. Coefficients are on the caller's covariate
/// scale with the intercept first.
struct PoissonFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd std_errors;
  double loglik = 0.0;
  double aic = 0.0;
  std::size_t n_obs = 0;
  Eigen::VectorXd fitted_means;
  int iterations = 0;
  std::vector<double> trace;

  std::size_t n_params() const { return static_cast<std::size_t>(coefficients.size()); }

  double predict(std::span<const double> covariates) const {
    double eta = coefficients[0];
    for (std::size_t j = 0; j < covariates.size(); ++j) eta += coefficients[j + 1] * covariates[j];
    return std::exp(eta);
  }
};

struct DevianceReport {
  double null_deviance = 0.0;
  double residual_deviance = 0.0;
  std::size_t df_null = 0;
  std::size_t df_residual = 0;
  double p_value = 1.0;
};

struct GofReport {
  double chi_statistic = 0.0;
  std::size_t df = 0;
  double p_value = 1.0;
  std::size_t n_matches = 0;
};

struct GlmOptions {
  int max_iterations = 100;
  double rel_tolerance = 1e-10;
  /// Largest Newton step (in standardized coordinates) accepted as converged.
  double step_tolerance = 1e-7;
};

/// P[chi^2_df >= x].
inline double chi_square_upper_tail(double x, std::size_t df) {
  if (df == 0) throw Error("chi-square needs df >= 1");
  if (!(x > 0.0)) return 1.0;
  return boost::math::gamma_q(0.5 * static_cast<double>(df), 0.5 * x);
}

/// Poisson log-likelihood of counts `y` under means `mu`, optionally weighted.
inline double poisson_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu,
                             const Eigen::VectorXd& w) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double wi = w.size() ? w[i] : 1.0;
    if (wi == 0.0) continue;
    const double term = (y[i] > 0.0 ? y[i] * std::log(mu[i]) : 0.0) - mu[i] - std::lgamma(y[i] + 1.0);
    ll += wi * term;
  }
  return ll;
}

/// Maximum-likelihood Poisson regression by Newton/IRLS.
///
/// `covariates` is n x q without an intercept column; the fit has q+1
/// coefficients. Counts may be non-integer and weighted, which the EM
/// M-steps rely on. Covariates are centred and scaled internally and the
/// coefficients are mapped back, so a raw Elo column (~2000) is fine.
inline PoissonFit fit_poisson(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& counts,
                              const Eigen::VectorXd& weights = Eigen::VectorXd(),
                              const GlmOptions& opts = {},
                              const std::optional<Eigen::VectorXd>& start = std::nullopt) {
  const Eigen::Index n = counts.size();
  const Eigen::Index q = covariates.cols();
  const Eigen::Index p = q + 1;
  if (covariates.rows() != n) throw FitError("design and response lengths differ");
  if (weights.size() != 0 && weights.size() != n) throw FitError("weights length mismatch");
  if (n < 2) throw FitError("need at least 2 observations");

  Eigen::VectorXd w = weights.size() ? weights : Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(counts[i] >= 0.0) || !std::isfinite(counts[i])) throw FitError("counts must be non-negative");
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) throw FitError("weights must be non-negative");
  }
  const double wsum = w.sum();
  const double wy = w.dot(counts);
  if (!(wsum > 0.0)) throw FitError("all weights are zero");
  if (!(wy > 0.0)) throw FitError("all-zero response: intercept diverges");

  // Standardize covariates.
  Eigen::VectorXd center(q), scale(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    const double m = w.dot(covariates.col(j)) / wsum;
    const double var = (w.array() * (covariates.col(j).array() - m).square()).sum() / wsum;
    center[j] = m;
    scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  Eigen::MatrixXd z(n, p);
  z.col(0).setOnes();
  for (Eigen::Index j = 0; j < q; ++j)
    z.col(j + 1) = (covariates.col(j).array() - center[j]) / scale[j];

  {
    Eigen::MatrixXd wz = w.array().sqrt().matrix().asDiagonal() * z;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(wz);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw FitError("rank-deficient design");
  }

  auto to_raw = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd beta(p);
    beta[0] = b[0];
    for (Eigen::Index j = 0; j < q; ++j) {
      beta[j + 1] = b[j + 1] / scale[j];
      beta[0] -= b[j + 1] * center[j] / scale[j];
    }
    return beta;
  };
  auto to_std = [&](const Eigen::VectorXd& beta) {
    Eigen::VectorXd b(p);
    b[0] = beta[0];
    for (Eigen::Index j = 0; j < q; ++j) {
      b[j + 1] = beta[j + 1] * scale[j];
      b[0] += beta[j + 1] * center[j];
    }
    return b;
  };

  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  if (start && start->size() == p) b = to_std(*start);
  else b[0] = std::log(wy / wsum);

  auto loglik_at = [&](const Eigen::VectorXd& bb, Eigen::VectorXd& mu) {
    mu = (z * bb).array().exp().matrix();
    return poisson_loglik(counts, mu, w);
  };

  Eigen::VectorXd mu;
  double ll = loglik_at(b, mu);
  if (!std::isfinite(ll)) {
    b.setZero();
    b[0] = std::log(wy / wsum);
    ll = loglik_at(b, mu);
  }
  std::vector<double> trace{ll};
  Eigen::MatrixXd info(p, p);
  bool converged = false;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    Eigen::VectorXd grad = z.transpose() * (w.array() * (counts - mu).array()).matrix();
    info = z.transpose() * (w.array() * mu.array()).matrix().asDiagonal() * z;
    Eigen::VectorXd step = info.ldlt().solve(grad);
    if (!step.allFinite()) throw FitError("singular information matrix", trace);

    double factor = 1.0;
    Eigen::VectorXd nb, nmu;
    double nll = -std::numeric_limits<double>::infinity();
    for (int halving = 0; halving < 40; ++halving) {
      nb = b + factor * step;
      nll = loglik_at(nb, nmu);
      if (std::isfinite(nll) && nll >= ll - 1e-12 * std::abs(ll)) break;
      factor *= 0.5;
    }
    if (!std::isfinite(nll)) throw FitError("log-likelihood diverged", trace);
    const double change = std::abs(nll - ll) / (std::abs(ll) + opts.rel_tolerance);
    const double step_norm = (factor * step).cwiseAbs().maxCoeff();
    b = nb;
    mu = nmu;
    ll = nll;
    trace.push_back(ll);
    if (change < opts.rel_tolerance && step_norm < opts.step_tolerance) {
      converged = true;
      ++it;
      break;
    }
  }
  if (!converged)
    throw FitError("Poisson regression did not converge in " + std::to_string(opts.max_iterations) +
                       " iterations",
                   trace);

  PoissonFit fit;
  fit.coefficients = to_raw(b);
  fit.n_obs = static_cast<std::size_t>(n);
  fit.iterations = it;
  fit.trace = std::move(trace);

  // Fitted means and log-likelihood evaluated on the reported coefficients.
  Eigen::MatrixXd x(n, p);
  x.col(0).setOnes();
  x.rightCols(q) = covariates;
  fit.fitted_means = (x * fit.coefficients).array().exp().matrix();
  fit.loglik = poisson_loglik(counts, fit.fitted_means, w);
  fit.aic = 2.0 * static_cast<double>(p) - 2.0 * fit.loglik;

  info = z.transpose() * (w.array() * mu.array()).matrix().asDiagonal() * z;
  Eigen::MatrixXd cov_std = info.inverse();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(p, p);
  jac(0, 0) = 1.0;
  for (Eigen::Index j = 0; j < q; ++j) {
    jac(0, j + 1) = -center[j] / scale[j];
    jac(j + 1, j + 1) = 1.0 / scale[j];
  }
  fit.std_errors = (jac * cov_std * jac.transpose()).diagonal().cwiseSqrt();
  return fit;
}

/// Gradient of the (weighted) Poisson log-likelihood in the caller's coordinates.
inline Eigen::VectorXd poisson_gradient(const Eigen::MatrixXd& covariates,
                                        const Eigen::VectorXd& counts,
                                        const Eigen::VectorXd& coefficients,
                                        const Eigen::VectorXd& weights = Eigen::VectorXd()) {
  const Eigen::Index n = counts.size();
  Eigen::MatrixXd x(n, covariates.cols() + 1);
  x.col(0).setOnes();
  x.rightCols(covariates.cols()) = covariates;
  Eigen::VectorXd mu = (x * coefficients).array().exp().matrix();
  Eigen::VectorXd r = counts - mu;
  if (weights.size()) r = r.cwiseProduct(weights);
  return x.transpose() * r;
}

/// 2 * sum[x ln(x/mu) - (x - mu)], with the x = 0 term equal to 2 mu.
inline double poisson_deviance(std::span<const double> observed, std::span<const double> fitted) {
  double d = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double x = observed[i];
    const double m = fitted[i];
    d += (x > 0.0 ? x * std::log(x / m) : 0.0) - (x - m);
  }
  return 2.0 * d;
}

inline DevianceReport deviance_report(const PoissonFit& fit, const Eigen::VectorXd& counts) {
  const auto n = static_cast<std::size_t>(counts.size());
  if (n != fit.n_obs) throw Error("deviance_report: fit and observations differ in length");
  std::vector<double> x(counts.data(), counts.data() + n);
  std::vector<double> mu(fit.fitted_means.data(), fit.fitted_means.data() + n);
  const double mean = counts.mean();
  std::vector<double> mu0(n, mean);

  DevianceReport r;
  r.residual_deviance = poisson_deviance(x, mu);
  r.null_deviance = poisson_deviance(x, mu0);
  r.df_null = n - 1;
  r.df_residual = n > fit.n_params() ? n - fit.n_params() : 0;
  if (r.df_residual > 0) r.p_value = chi_square_upper_tail(r.residual_deviance, r.df_residual);
  else r.p_value = r.residual_deviance > 0.0 ? 0.0 : 1.0;
  return r;
}

/// Pearson statistic sum (x - mu)^2 / mu with df = n - n_params.
inline GofReport gof_chi_square(std::span<const double> observed, std::span<const double> fitted,
                                std::size_t n_params) {
  if (observed.size() <= n_params) throw FitError("overparameterized: df <= 0");
  GofReport g;
  g.n_matches = observed.size();
  g.df = observed.size() - n_params;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!(fitted[i] > 0.0)) throw FitError("fitted mean must be positive");
    const double r = observed[i] - fitted[i];
    g.chi_statistic += r * r / fitted[i];
  }
  g.p_value = chi_square_upper_tail(g.chi_statistic, g.df);
  return g;
}

inline GofReport gof_chi_square(const PoissonFit& fit, const Eigen::VectorXd& counts) {
  if (static_cast<std::size_t>(counts.size()) != fit.n_obs)
    throw Error("gof_chi_square: fit and observations differ in length");
  return gof_chi_square(std::span<const double>(counts.data(), fit.n_obs),
                        std::span<const double>(fit.fitted_means.data(), fit.n_obs),
                        fit.n_params());
}

}  // namespace wcsim
