#pragma once

// The four match-score models behind one sampling interface, and the
// per-team fitting that feeds them.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "wcsim/bivpois.hpp"
#include "wcsim/dataio.hpp"
#include "wcsim/elo.hpp"
#include "wcsim/error.hpp"
#include "wcsim/glm.hpp"
#include "wcsim/model_family.hpp"
#include "wcsim/random.hpp"

namespace wcsim {

/// exp(intercept + slope * x)
struct LogLinear {
  double intercept = 0.0;
  double slope = 0.0;
  double operator()(double x) const { return std::exp(intercept + slope * x); }
};

/// log lambda_weak = g0 + g1 * elo_strong + g2 * goals_strong
struct NestedGamma {
  double g0 = 0.0;
  double g1 = 0.0;
  double g2 = 0.0;
};

/// Independent-model diagnostics for one team.
struct TeamDiagnostics {
  std::size_t n_obs = 0;
  DevianceReport attack_deviance;
  DevianceReport defense_deviance;
  GofReport attack_gof;
  GofReport defense_gof;
};

struct TeamCoefficients {
  TeamId team;
  std::optional<LogLinear> attack;   // mu_T(elo_opponent)
  std::optional<LogLinear> defense;  // nu_T(elo_opponent)
  std::optional<BivariateTeamFit> bivariate;
  std::optional<InflatedFit> inflated;
  std::optional<NestedGamma> nested_gamma;
  std::optional<TeamDiagnostics> diagnostics;

  bool has(ModelFamily f) const {
    switch (f) {
      case ModelFamily::independent: return attack && defense;
      case ModelFamily::bivariate: return bivariate.has_value();
      case ModelFamily::inflated: return inflated.has_value();
      case ModelFamily::nested: return attack && defense && nested_gamma;
    }
    return false;
  }
};

/// Sequential draw for the nested model: the stronger side first, then the
/// weaker side conditioned on the stronger side's goals.
struct NestedRates {
  bool a_is_stronger = true;
  double strong_rate = 0.0;
  double weak_log_base = 0.0;  // g0 + g1 * elo_strong
  double weak_goal_slope = 0.0;
  double scale = 1.0;

  double weak_rate(int strong_goals) const {
    return scale * std::exp(weak_log_base + weak_goal_slope * strong_goals);
  }
};

struct MatchRates {
  ModelFamily family = ModelFamily::independent;
  /// Expected goals of A and of B. For the bivariate families these are the
  /// marginal means; for the nested model B's value is averaged over A's goals.
  double lambda_a_given_b = 0.0;
  double lambda_b_given_a = 0.0;
  std::optional<BivariateRates> bivariate;
  std::optional<DiagonalInflation> inflation;
  std::optional<NestedRates> nested;

  /// Rates for 30 minutes of extra time: every rate divided by 3, no
  /// diagonal inflation.
  MatchRates extra_time() const {
    MatchRates r = *this;
    r.lambda_a_given_b = lambda_a_given_b / 3.0;
    r.lambda_b_given_a = lambda_b_given_a / 3.0;
    if (bivariate) {
      r.bivariate->lambda0 = bivariate->lambda0 / 3.0;
      r.bivariate->lambda1 = bivariate->lambda1 / 3.0;
      r.bivariate->lambda2 = bivariate->lambda2 / 3.0;
    }
    r.inflation.reset();
    if (nested) {
      r.nested->strong_rate = nested->strong_rate / 3.0;
      r.nested->scale = nested->scale / 3.0;
    }
    return r;
  }

  /// Shoot-out win probability for A, proportional to the two match rates.
  double penalty_probability_a() const {
    return lambda_a_given_b / (lambda_a_given_b + lambda_b_given_a);
  }
};

// ---------------------------------------------------------------------------
// Rates

namespace detail {
inline const LogLinear& need(const std::optional<LogLinear>& c, const TeamId& team, const char* what) {
  if (!c) throw Error(std::string("missing ") + what + " coefficients for " + team);
  return *c;
}
}  // namespace detail

inline MatchRates rates_independent(const TeamCoefficients& a, const TeamCoefficients& b,
                                    double elo_a, double elo_b) {
  const auto& att_a = detail::need(a.attack, a.team, "attack");
  const auto& def_a = detail::need(a.defense, a.team, "defense");
  const auto& att_b = detail::need(b.attack, b.team, "attack");
  const auto& def_b = detail::need(b.defense, b.team, "defense");
  MatchRates r;
  r.family = ModelFamily::independent;
  r.lambda_a_given_b = (att_a(elo_b) + def_b(elo_a)) / 2.0;
  r.lambda_b_given_a = (att_b(elo_a) + def_a(elo_b)) / 2.0;
  return r;
}

inline MatchRates rates_bivariate(const TeamCoefficients& a, const TeamCoefficients& b,
                                  double elo_a, double elo_b, bool inflated) {
  const BivariateTeamFit* fa = nullptr;
  const BivariateTeamFit* fb = nullptr;
  MatchRates r;
  if (inflated) {
    if (!a.inflated) throw Error("missing inflated coefficients for " + a.team);
    if (!b.inflated) throw Error("missing inflated coefficients for " + b.team);
    fa = &a.inflated->base;
    fb = &b.inflated->base;
    DiagonalInflation d;
    const auto& da = a.inflated->inflation;
    const auto& db = b.inflated->inflation;
    d.p = (da.p + db.p) / 2.0;
    for (std::size_t k = 0; k < 3; ++k) d.theta[k] = (da.theta[k] + db.theta[k]) / 2.0;
    r.inflation = d;
    r.family = ModelFamily::inflated;
  } else {
    if (!a.bivariate) throw Error("missing bivariate coefficients for " + a.team);
    if (!b.bivariate) throw Error("missing bivariate coefficients for " + b.team);
    fa = &*a.bivariate;
    fb = &*b.bivariate;
    r.family = ModelFamily::bivariate;
  }
  const auto br = combine_rates(*fa, *fb, elo_a, elo_b);
  r.bivariate = br;
  r.lambda_a_given_b = br.lambda1 + br.lambda0;
  r.lambda_b_given_a = br.lambda2 + br.lambda0;
  return r;
}

/// True when A is the side drawn first: higher Elo, ties broken by team id.
inline bool nested_a_first(const TeamId& a, const TeamId& b, double elo_a, double elo_b) {
  if (elo_a != elo_b) return elo_a > elo_b;
  return a < b;
}

inline MatchRates rates_nested(const TeamCoefficients& a, const TeamCoefficients& b, double elo_a,
                               double elo_b) {
  const bool a_first = nested_a_first(a.team, b.team, elo_a, elo_b);
  const auto& strong = a_first ? a : b;
  const auto& weak = a_first ? b : a;
  const double elo_strong = a_first ? elo_a : elo_b;
  const double elo_weak = a_first ? elo_b : elo_a;
  if (!weak.nested_gamma) throw Error("missing nested gamma coefficients for " + weak.team);
  const auto& g = *weak.nested_gamma;

  NestedRates n;
  n.a_is_stronger = a_first;
  n.strong_rate = (detail::need(strong.attack, strong.team, "attack")(elo_weak) +
                   detail::need(weak.defense, weak.team, "defense")(elo_strong)) /
                  2.0;
  n.weak_log_base = g.g0 + g.g1 * elo_strong;
  n.weak_goal_slope = g.g2;

  // E[exp(c + g2 G)] for G ~ Poisson(strong_rate)
  const double weak_mean = std::exp(n.weak_log_base + n.strong_rate * std::expm1(g.g2));
  MatchRates r;
  r.family = ModelFamily::nested;
  r.nested = n;
  r.lambda_a_given_b = a_first ? n.strong_rate : weak_mean;
  r.lambda_b_given_a = a_first ? weak_mean : n.strong_rate;
  return r;
}

inline MatchRates match_rates(ModelFamily family, const TeamCoefficients& a,
                              const TeamCoefficients& b, double elo_a, double elo_b) {
  switch (family) {
    case ModelFamily::independent: return rates_independent(a, b, elo_a, elo_b);
    case ModelFamily::bivariate: return rates_bivariate(a, b, elo_a, elo_b, false);
    case ModelFamily::inflated: return rates_bivariate(a, b, elo_a, elo_b, true);
    case ModelFamily::nested: return rates_nested(a, b, elo_a, elo_b);
  }
  throw Error("unknown model family");
}

// ---------------------------------------------------------------------------
// Sampling

template <class URBG>
ScoreLine sample_independent(const MatchRates& r, URBG& rng) {
  const int ga = detail::poisson_draw(r.lambda_a_given_b, rng);
  const int gb = detail::poisson_draw(r.lambda_b_given_a, rng);
  return {ga, gb};
}

template <class URBG>
ScoreLine sample_bivariate(const BivariateRates& rates, const std::optional<DiagonalInflation>& inflation,
                           URBG& rng) {
  if (inflation && inflation->p > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < inflation->p) {
      const double v = u(rng);
      const auto& th = inflation->theta;
      const int k = v < th[0] ? 0 : (v < th[0] + th[1] ? 1 : 2);
      return {k, k};
    }
  }
  auto [ga, gb] = bivpois_sample(rates, rng);
  return {ga, gb};
}

template <class URBG>
ScoreLine sample_nested_rates(const NestedRates& n, URBG& rng) {
  const int strong = detail::poisson_draw(n.strong_rate, rng);
  const int weak = detail::poisson_draw(n.weak_rate(strong), rng);
  return n.a_is_stronger ? ScoreLine{strong, weak} : ScoreLine{weak, strong};
}

template <class URBG>
ScoreLine sample_nested(const TeamCoefficients& a, const TeamCoefficients& b, double elo_a,
                        double elo_b, URBG& rng) {
  return sample_nested_rates(*rates_nested(a, b, elo_a, elo_b).nested, rng);
}

template <class URBG>
ScoreLine sample_match(const MatchRates& r, URBG& rng) {
  switch (r.family) {
    case ModelFamily::independent: return sample_independent(r, rng);
    case ModelFamily::bivariate:
    case ModelFamily::inflated: return sample_bivariate(*r.bivariate, r.inflation, rng);
    case ModelFamily::nested: return sample_nested_rates(*r.nested, rng);
  }
  return {};
}

/// What the tournament engine needs from a match model. Teams are indices
/// into the tournament's participant list.
class MatchSampler {
 public:
  virtual ~MatchSampler() = default;
  /// Regulation-time rates for a vs b at the current ratings.
  virtual MatchRates rates(std::size_t a, std::size_t b, double elo_a, double elo_b) const = 0;
  virtual ScoreLine sample(const MatchRates& rates, Rng& rng) const = 0;
};

/// Fitted coefficients of one family, indexed by participant.
class FittedMatchModel final : public MatchSampler {
 public:
  FittedMatchModel(ModelFamily family, std::vector<TeamCoefficients> coeffs)
      : family_(family), coeffs_(std::move(coeffs)) {
    for (const auto& c : coeffs_)
      if (!c.has(family_))
        throw Error("team " + c.team + " has no " + std::string(to_string(family_)) + " fit");
  }

  FittedMatchModel(ModelFamily family, const std::map<TeamId, TeamCoefficients>& all,
                   const std::vector<TeamId>& participants)
      : FittedMatchModel(family, select(all, participants)) {}

  ModelFamily family() const { return family_; }

  MatchRates rates(std::size_t a, std::size_t b, double elo_a, double elo_b) const override {
    return match_rates(family_, coeffs_[a], coeffs_[b], elo_a, elo_b);
  }

  ScoreLine sample(const MatchRates& r, Rng& rng) const override { return sample_match(r, rng); }

 private:
  static std::vector<TeamCoefficients> select(const std::map<TeamId, TeamCoefficients>& all,
                                              const std::vector<TeamId>& participants) {
    std::vector<TeamCoefficients> out;
    for (const auto& t : participants) {
      auto it = all.find(t);
      if (it == all.end()) throw Error("missing coefficients for " + t);
      out.push_back(it->second);
    }
    return out;
  }

  ModelFamily family_;
  std::vector<TeamCoefficients> coeffs_;
};

// ---------------------------------------------------------------------------
// Fitting

inline constexpr std::size_t min_observations(ModelFamily f) {
  return f == ModelFamily::independent ? 5 : 6;
}

namespace detail {

inline Eigen::MatrixXd elo_column(const std::vector<Observation>& obs) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(obs.size()), 1);
  for (std::size_t i = 0; i < obs.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = obs[i].opponent_elo;
  return x;
}

inline std::vector<Observation> team_observations(const std::vector<MatchRecord>& matches,
                                                  const TeamId& team, const DataFilter& filter,
                                                  const EloSnapshot& elo, ModelFamily family) {
  std::vector<Observation> obs;
  try {
    obs = observations_for_team(matches, team, filter, elo, family);
  } catch (const InsufficientDataError&) {
    throw InsufficientDataError(team, 0, min_observations(family));
  }
  if (obs.size() < min_observations(family))
    throw InsufficientDataError(team, obs.size(), min_observations(family));
  return obs;
}

}  // namespace detail

/// Attack and defense regressions, goals for/against on opponent Elo.
inline void fit_independent(const std::vector<Observation>& obs, TeamCoefficients& out) {
  const auto x = detail::elo_column(obs);
  Eigen::VectorXd gf(x.rows()), ga(x.rows());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    gf[static_cast<Eigen::Index>(i)] = obs[i].goals_for;
    ga[static_cast<Eigen::Index>(i)] = obs[i].goals_against;
  }
  const auto att = fit_poisson(x, gf);
  const auto def = fit_poisson(x, ga);
  out.attack = LogLinear{att.coefficients[0], att.coefficients[1]};
  out.defense = LogLinear{def.coefficients[0], def.coefficients[1]};

  TeamDiagnostics d;
  d.n_obs = obs.size();
  d.attack_deviance = deviance_report(att, gf);
  d.defense_deviance = deviance_report(def, ga);
  d.attack_gof = gof_chi_square(att, gf);
  d.defense_gof = gof_chi_square(def, ga);
  out.diagnostics = d;
}

/// Goals for as the weaker side: log lambda = g0 + g1 elo_opponent + g2 goals_against.
inline NestedGamma fit_nested_gamma(const std::vector<Observation>& obs) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(obs.size()), 2);
  Eigen::VectorXd y(x.rows());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = obs[i].opponent_elo;
    x(r, 1) = obs[i].goals_against;
    y[r] = obs[i].goals_for;
  }
  const auto f = fit_poisson(x, y);
  return {f.coefficients[0], f.coefficients[1], f.coefficients[2]};
}

/// Fits every requested family for one team.
inline TeamCoefficients fit_team(const std::vector<MatchRecord>& matches, const TeamId& team,
                                 const DataFilter& filter, const EloSnapshot& elo,
                                 const std::vector<ModelFamily>& families) {
  TeamCoefficients c;
  c.team = team;
  auto wants = [&](ModelFamily f) {
    return std::find(families.begin(), families.end(), f) != families.end();
  };
  try {
    if (wants(ModelFamily::independent) || wants(ModelFamily::nested)) {
      const auto obs = detail::team_observations(matches, team, filter, elo, ModelFamily::independent);
      fit_independent(obs, c);
    }
    if (wants(ModelFamily::nested)) {
      const auto obs = detail::team_observations(matches, team, filter, elo, ModelFamily::nested);
      c.nested_gamma = fit_nested_gamma(obs);
    }
    if (wants(ModelFamily::bivariate)) {
      const auto obs = detail::team_observations(matches, team, filter, elo, ModelFamily::bivariate);
      c.bivariate = fit_bivpois_em(obs);
    }
    if (wants(ModelFamily::inflated)) {
      const auto obs = detail::team_observations(matches, team, filter, elo, ModelFamily::inflated);
      c.inflated = fit_inflated_em(obs, true);
    }
  } catch (const InsufficientDataError&) {
    throw;
  } catch (const FitError& e) {
    throw FitError(team + ": " + e.what(), e.trace());
  }
  return c;
}

inline std::map<TeamId, TeamCoefficients> fit_all_models(
    const std::vector<MatchRecord>& matches, const std::vector<TeamId>& participants,
    const DataFilter& filter, const EloSnapshot& elo,
    const std::vector<ModelFamily>& families = {kAllFamilies.begin(), kAllFamilies.end()}) {
  filter.validate();
  std::map<TeamId, TeamCoefficients> out;
  for (const auto& team : participants) out.emplace(team, fit_team(matches, team, filter, elo, families));
  return out;
}

}  // namespace wcsim
