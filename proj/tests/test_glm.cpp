#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "wcsim/glm.hpp"

using namespace wcsim;

namespace {

// Direct-formula oracles, written independently of the library.
double oracle_deviance(const std::vector<double>& x, const std::vector<double>& mu) {
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) d += 2.0 * mu[i];
    else d += 2.0 * (x[i] * std::log(x[i] / mu[i]) - x[i] + mu[i]);
  }
  return d;
}

double oracle_chi(const std::vector<double>& x, const std::vector<double>& mu) {
  double c = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) c += (x[i] - mu[i]) * (x[i] - mu[i]) / mu[i];
  return c;
}

double oracle_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double eta = beta[0];
    for (Eigen::Index j = 0; j < x.cols(); ++j) eta += beta[j + 1] * x(i, j);
    ll += y[i] * eta - std::exp(eta) - std::lgamma(y[i] + 1.0);
  }
  return ll;
}

struct Synthetic {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

Synthetic synthetic(std::size_t n, double b0, double b1, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(1500.0, 2100.0);
  Synthetic s{Eigen::MatrixXd(static_cast<Eigen::Index>(n), 1), Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  for (Eigen::Index i = 0; i < s.y.size(); ++i) {
    const double xi = u(rng);
    s.x(i, 0) = xi;
    std::poisson_distribution<int> pois(std::exp(b0 + b1 * xi));
    s.y[i] = pois(rng);
  }
  return s;
}

std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST(ChiSquare, UpperTail) {
  EXPECT_EQ(chi_square_upper_tail(0.0, 3), 1.0);
  EXPECT_NEAR(chi_square_upper_tail(2.0 * std::log(2.0), 2), 0.5, 1e-12);
  EXPECT_NEAR(chi_square_upper_tail(3.841, 1), 0.05, 5e-4);
  for (double x : {0.3, 1.7, 5.0, 12.0}) EXPECT_NEAR(chi_square_upper_tail(x, 2), std::exp(-x / 2), 1e-12);
  EXPECT_THROW(chi_square_upper_tail(1.0, 0), Error);
}

TEST(ChiSquare, MonotoneInStatistic) {
  for (std::size_t df : {1u, 4u, 30u}) {
    double prev = 1.0;
    for (double x = 0.0; x < 80.0; x += 0.5) {
      const double p = chi_square_upper_tail(x, df);
      EXPECT_LE(p, prev);
      prev = p;
    }
  }
}

TEST(FitPoisson, ConstantMean) {
  Eigen::MatrixXd x(6, 0);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(6, 3.0);
  const auto f = fit_poisson(x, y);
  ASSERT_EQ(f.coefficients.size(), 1);
  EXPECT_NEAR(f.coefficients[0], std::log(3.0), 1e-12);
}

TEST(FitPoisson, TwoPointInterpolation) {
  Eigen::MatrixXd x(6, 1);
  x << 1800, 1800, 1800, 2000, 2000, 2000;
  Eigen::VectorXd y(6);
  y << 1, 2, 3, 0, 1, 0;
  const auto f = fit_poisson(x, y);
  const double m1 = 2.0, m2 = 1.0 / 3.0;
  EXPECT_NEAR(f.coefficients[0] + f.coefficients[1] * 1800, std::log(m1), 1e-9);
  EXPECT_NEAR(f.coefficients[0] + f.coefficients[1] * 2000, std::log(m2), 1e-9);
}

TEST(FitPoisson, RecoversSyntheticWithinThreeSe) {
  const auto s = synthetic(10000, 0.5, -0.001, 2024);
  const auto f = fit_poisson(s.x, s.y);
  EXPECT_LT(std::abs(f.coefficients[0] - 0.5), 3 * f.std_errors[0]);
  EXPECT_LT(std::abs(f.coefficients[1] + 0.001), 3 * f.std_errors[1]);
}

TEST(FitPoisson, GradientVanishesAtOptimum) {
  const auto s = synthetic(300, 0.8, -0.0009, 7);
  const auto f = fit_poisson(s.x, s.y);
  EXPECT_LT(poisson_gradient(s.x, s.y, f.coefficients).norm(), 1e-8);
}

TEST(FitPoisson, LocalOptimalityProbe) {
  const auto s = synthetic(200, 0.3, -0.0005, 11);
  const auto f = fit_poisson(s.x, s.y);
  const double ll = oracle_loglik(s.x, s.y, f.coefficients);
  EXPECT_NEAR(ll, f.loglik, 1e-8 * std::abs(ll));
  for (Eigen::Index j = 0; j < f.coefficients.size(); ++j)
    for (double d : {-1e-3, 1e-3}) {
      Eigen::VectorXd b = f.coefficients;
      b[j] += d;
      EXPECT_GE(f.loglik, oracle_loglik(s.x, s.y, b));
    }
}

TEST(FitPoisson, AnalyticGradientMatchesFiniteDifferences) {
  const auto s = synthetic(120, 0.3, -0.0005, 3);
  Eigen::MatrixXd xs = s.x / 1000.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 10; ++k) {
    Eigen::VectorXd b(2);
    b << u(rng), u(rng);
    const auto g = poisson_gradient(xs, s.y, b);
    for (Eigen::Index j = 0; j < 2; ++j) {
      Eigen::VectorXd hi = b, lo = b;
      hi[j] += 1e-5;
      lo[j] -= 1e-5;
      const double fd = (oracle_loglik(xs, s.y, hi) - oracle_loglik(xs, s.y, lo)) / 2e-5;
      EXPECT_NEAR(g[j], fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(FitPoisson, AicIdentityAndFittedMeans) {
  const auto s = synthetic(50, 0.2, -0.0004, 9);
  const auto f = fit_poisson(s.x, s.y);
  EXPECT_EQ(f.aic, 2.0 * 2 - 2.0 * f.loglik);
  for (Eigen::Index i = 0; i < s.y.size(); ++i)
    EXPECT_DOUBLE_EQ(f.fitted_means[i], std::exp(f.coefficients[0] + f.coefficients[1] * s.x(i, 0)));
}

TEST(FitPoisson, Deterministic) {
  const auto s = synthetic(80, 0.2, -0.0004, 19);
  const auto a = fit_poisson(s.x, s.y);
  const auto b = fit_poisson(s.x, s.y);
  EXPECT_EQ(a.coefficients, b.coefficients);
  EXPECT_EQ(a.loglik, b.loglik);
}

TEST(FitPoisson, Errors) {
  Eigen::MatrixXd x(4, 1);
  x << 1900, 1900, 1900, 1900;
  Eigen::VectorXd y(4);
  y << 1, 2, 0, 1;
  EXPECT_THROW(fit_poisson(x, y), FitError);

  Eigen::MatrixXd x2(4, 1);
  x2 << 1800, 1900, 2000, 2100;
  GlmOptions one;
  one.max_iterations = 1;
  try {
    fit_poisson(x2, y, {}, one);
    FAIL();
  } catch (const FitError& e) {
    EXPECT_FALSE(e.trace().empty());
  }
  EXPECT_THROW(fit_poisson(x2, Eigen::VectorXd::Zero(4)), FitError);
  Eigen::VectorXd neg = y;
  neg[0] = -1;
  EXPECT_THROW(fit_poisson(x2, neg), FitError);
}

TEST(Deviance, PerfectFitIsZero) {
  std::vector<double> x{0, 1, 2, 5};
  std::vector<double> mu{1e-300, 1, 2, 5};
  EXPECT_NEAR(poisson_deviance(std::vector<double>{1, 2, 5}, std::vector<double>{1, 2, 5}), 0.0, 1e-15);
  EXPECT_NEAR(poisson_deviance(x, mu), 0.0, 1e-12);
}

TEST(Deviance, InterceptOnlyEqualsNull) {
  Eigen::MatrixXd x(7, 0);
  Eigen::VectorXd y(7);
  y << 0, 1, 3, 2, 0, 4, 1;
  const auto f = fit_poisson(x, y);
  const auto r = deviance_report(f, y);
  EXPECT_NEAR(r.residual_deviance, r.null_deviance, 1e-10);
}

TEST(Deviance, MatchesDirectFormula) {
  const auto s = synthetic(60, 0.4, -0.0006, 23);
  const auto f = fit_poisson(s.x, s.y);
  const auto r = deviance_report(f, s.y);
  EXPECT_NEAR(r.residual_deviance, oracle_deviance(vec(s.y), vec(f.fitted_means)), 1e-10);
  std::vector<double> mean(60, s.y.mean());
  EXPECT_NEAR(r.null_deviance, oracle_deviance(vec(s.y), mean), 1e-10);
  EXPECT_LE(r.residual_deviance, r.null_deviance + 1e-8);
  EXPECT_EQ(r.df_null, 59u);
  EXPECT_EQ(r.df_residual, 58u);
  EXPECT_GE(r.p_value, 0.0);
  EXPECT_LE(r.p_value, 1.0);
}

TEST(Gof, Examples) {
  std::vector<double> x{1, 2, 3};
  auto g = gof_chi_square(x, x, 1);
  EXPECT_EQ(g.chi_statistic, 0.0);
  EXPECT_EQ(g.p_value, 1.0);
  auto single = gof_chi_square(std::vector<double>{4}, std::vector<double>{2}, 0);
  EXPECT_EQ(single.df, 1u);
  EXPECT_DOUBLE_EQ(single.chi_statistic, 2.0);
  try {
    gof_chi_square(x, x, 3);
    FAIL();
  } catch (const FitError& e) {
    EXPECT_NE(std::string(e.what()).find("overparameterized"), std::string::npos);
  }
}

TEST(Gof, MatchesDirectSummation) {
  const auto s = synthetic(40, 0.4, -0.0006, 29);
  const auto f = fit_poisson(s.x, s.y);
  const auto g = gof_chi_square(f, s.y);
  EXPECT_NEAR(g.chi_statistic, oracle_chi(vec(s.y), vec(f.fitted_means)), 1e-12);
  EXPECT_EQ(g.df, 38u);
  EXPECT_EQ(g.n_matches, 40u);
}
