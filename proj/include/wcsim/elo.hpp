#pragma once

// World Football Elo expectancy and post-match updates.

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "wcsim/dataio.hpp"
#include "wcsim/error.hpp"

namespace wcsim {

struct ScoreLine {
  int goals_a = 0;
  int goals_b = 0;

  friend bool operator==(const ScoreLine&, const ScoreLine&) = default;
};

enum class EloOutcome { from_score, draw };

/// W_e = 1 / (10^(-(ra - rb)/400) + 1)
inline double expectancy(double ra, double rb) {
  return 1.0 / (std::pow(10.0, -(ra - rb) / 400.0) + 1.0);
}

/// Goal-margin multiplier: 1 up to one goal, 1.5 for two, (11 + margin)/8 beyond.
inline double margin_multiplier(int margin) {
  margin = std::abs(margin);
  if (margin <= 1) return 1.0;
  if (margin == 2) return 1.5;
  return (11.0 + margin) / 8.0;
}

namespace detail {
// Ratings live on a 2^-32 grid so that sums of up to a few thousand ratings
// below 2^16 stay exact and updates are exactly zero-sum.
inline double quantize_rating(double x) { return std::ldexp(std::round(std::ldexp(x, 32)), -32); }
}  // namespace detail

/// Ratings of a fixed team set, mutated as matches are played.
class EloTable {
 public:
  EloTable() = default;

  EloTable(std::vector<TeamId> teams, const EloSnapshot& snapshot, double k_factor = 60.0)
      : k_factor_(k_factor) {
    if (!(k_factor > 0.0)) throw Error("K factor must be positive");
    auto index = std::make_shared<std::map<TeamId, std::size_t>>();
    ratings_.reserve(teams.size());
    for (std::size_t i = 0; i < teams.size(); ++i) {
      const double r = snapshot.at(teams[i]);
      if (!std::isfinite(r)) throw DataError("non-finite rating for " + teams[i]);
      ratings_.push_back(detail::quantize_rating(r));
      if (!index->emplace(teams[i], i).second) throw DataError("duplicate team " + teams[i]);
    }
    teams_ = std::make_shared<const std::vector<TeamId>>(std::move(teams));
    index_ = std::move(index);
  }

  std::size_t size() const { return ratings_.size(); }
  const std::vector<TeamId>& teams() const { return *teams_; }
  double k_factor() const { return k_factor_; }
  double rating(std::size_t i) const { return ratings_[i]; }
  double rating(const TeamId& t) const { return ratings_[index_of(t)]; }
  const std::vector<double>& ratings() const { return ratings_; }

  std::size_t index_of(const TeamId& t) const {
    auto it = index_->find(t);
    if (it == index_->end()) throw Error("unknown team " + t);
    return it->second;
  }

  double total() const {
    double s = 0.0;
    for (double r : ratings_) s += r;
    return s;
  }

  /// Applies K * G * (W - W_e) to team a and its negative to team b.
  /// Returns (delta_a, delta_b).
  std::pair<double, double> update(std::size_t a, std::size_t b, const ScoreLine& score,
                                   EloOutcome outcome = EloOutcome::from_score) {
    double w = 0.5;
    if (outcome == EloOutcome::from_score) {
      if (score.goals_a > score.goals_b) w = 1.0;
      else if (score.goals_a < score.goals_b) w = 0.0;
    }
    const double we = expectancy(ratings_[a], ratings_[b]);
    const double delta =
        detail::quantize_rating(k_factor_ * margin_multiplier(score.goals_a - score.goals_b) * (w - we));
    ratings_[a] += delta;
    ratings_[b] -= delta;
    return {delta, -delta};
  }

  std::pair<double, double> update(const TeamId& a, const TeamId& b, const ScoreLine& score,
                                   EloOutcome outcome = EloOutcome::from_score) {
    return update(index_of(a), index_of(b), score, outcome);
  }

 private:
  // Team names and lookup are shared between copies; only ratings are per copy.
  std::shared_ptr<const std::vector<TeamId>> teams_ = std::make_shared<const std::vector<TeamId>>();
  std::shared_ptr<const std::map<TeamId, std::size_t>> index_ =
      std::make_shared<const std::map<TeamId, std::size_t>>();
  std::vector<double> ratings_;
  double k_factor_ = 60.0;
};

}  // namespace wcsim
