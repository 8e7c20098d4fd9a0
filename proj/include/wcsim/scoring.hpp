#pragma once

// Ordinal tournament results and the four forecast score functions.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "wcsim/error.hpp"
#include "wcsim/tournament.hpp"

namespace wcsim {

using StageProbabilities = std::array<double, kOutcomes>;

/// Realized outcome code per team.
struct RealizedResult {
  std::map<TeamId, int> codes;

  int at(const TeamId& t) const {
    auto it = codes.find(t);
    if (it == codes.end()) throw Error("no realized result for " + t);
    return it->second;
  }

  /// Checks the 32-team multiset {1, 2, 3x2, 4x4, 5x8, 6x16}.
  void validate_cup() const {
    std::array<int, kOutcomes> n{};
    for (const auto& [team, c] : codes) {
      if (c < 1 || c > kOutcomes) throw DataError("outcome code out of range for " + team);
      ++n[static_cast<std::size_t>(c - 1)];
    }
    const std::array<int, kOutcomes> expect{1, 1, 2, 4, 8, 16};
    if (n != expect) throw DataError("realized codes do not form a 32-team cup");
  }
};

/// A decided knockout tie.
struct KnockoutRecord {
  TeamId team1;
  TeamId team2;
  TeamId winner;
};

/// What actually happened in a tournament, enough to derive the codes.
struct TournamentRecord {
  std::vector<TeamId> participants;
  std::vector<KnockoutRecord> round_of_16;
  std::vector<KnockoutRecord> quarter_finals;
  std::vector<KnockoutRecord> semi_finals;
  std::vector<KnockoutRecord> final;
};

inline RealizedResult realized_results(const TournamentRecord& rec) {
  RealizedResult out;
  const std::set<TeamId> participants(rec.participants.begin(), rec.participants.end());
  if (participants.size() != rec.participants.size()) throw DataError("duplicate participant");
  for (const auto& t : rec.participants) out.codes[t] = kOutGroup;

  std::set<TeamId> alive(participants);
  bool first_round = true;
  auto round = [&](const std::vector<KnockoutRecord>& ties, std::size_t expected, int loser_code,
                   const char* name) {
    if (ties.size() != expected)
      throw DataError(std::string("incomplete record: ") + name + " needs " + std::to_string(expected) +
                      " ties, got " + std::to_string(ties.size()));
    std::set<TeamId> next, seen;
    for (const auto& k : ties) {
      for (const auto& t : {k.team1, k.team2}) {
        if (!alive.contains(t)) throw DataError(std::string(name) + ": " + t + " is not in this round");
        if (!seen.insert(t).second) throw DataError(std::string(name) + ": " + t + " plays twice");
      }
      if (k.winner != k.team1 && k.winner != k.team2)
        throw DataError(std::string(name) + ": winner " + k.winner + " did not play the tie");
      const TeamId& loser = k.winner == k.team1 ? k.team2 : k.team1;
      out.codes[loser] = loser_code;
      next.insert(k.winner);
    }
    if (!first_round && seen.size() != alive.size())
      throw DataError(std::string("incomplete record: ") + name + " misses a qualified team");
    first_round = false;
    alive = std::move(next);
  };
  round(rec.round_of_16, 8, kOutRound16, "round of 16");
  round(rec.quarter_finals, 4, kOutQuarter, "quarter-finals");
  round(rec.semi_finals, 2, kOutSemi, "semi-finals");
  round(rec.final, 1, kLostFinal, "final");
  out.codes[*alive.begin()] = kChampion;
  return out;
}

// ---------------------------------------------------------------------------
// Per-team errors. `result` is the realized code 1..6.

/// |result - argmax_i p_i|, ties toward the smaller code.
inline double error_e1(const StageProbabilities& p, int result) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < p.size(); ++j)
    if (p[j] > p[best]) best = j;
  return std::abs(result - static_cast<int>(best + 1));
}

/// sum_j p_j |j - result|
inline double error_e2(const StageProbabilities& p, int result) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) s += p[j] * std::abs(static_cast<int>(j + 1) - result);
  return s;
}

inline double error_brier(const StageProbabilities& p, int result) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double d = p[j] - (static_cast<int>(j + 1) == result ? 1.0 : 0.0);
    s += d * d;
  }
  return s;
}

enum class RpsVariant {
  cumulative,  // ranked probability score: cumulative forecast vs cumulative outcome
  literal,     // cumulative forecast vs the point indicator 1[result = i]
};

inline double error_rps(const StageProbabilities& p, int result,
                        RpsVariant variant = RpsVariant::cumulative) {
  double s = 0.0, cum_p = 0.0, cum_o = 0.0;
  for (int i = 1; i < kOutcomes; ++i) {
    cum_p += p[static_cast<std::size_t>(i - 1)];
    const double point = result == i ? 1.0 : 0.0;
    cum_o += point;
    const double d = cum_p - (variant == RpsVariant::cumulative ? cum_o : point);
    s += d * d;
  }
  return s / (kOutcomes - 1);
}

// ---------------------------------------------------------------------------
// Totals

struct ScoreTotal {
  double total = 0.0;
  std::vector<double> per_team;  // in distribution team order
};

struct ScoreReport {
  ScoreTotal e1, e2, brier, rps;
  std::vector<TeamId> teams;
};

template <class F>
ScoreTotal score_with(const StageDistribution& dist, const RealizedResult& real, F&& err) {
  ScoreTotal s;
  for (std::size_t t = 0; t < dist.size(); ++t) {
    const double e = err(dist.probabilities[t], real.at(dist.teams[t]));
    s.per_team.push_back(e);
    s.total += e;
  }
  return s;
}

inline ScoreTotal score_e1(const StageDistribution& d, const RealizedResult& r) {
  return score_with(d, r, error_e1);
}
inline ScoreTotal score_e2(const StageDistribution& d, const RealizedResult& r) {
  return score_with(d, r, error_e2);
}
inline ScoreTotal score_brier(const StageDistribution& d, const RealizedResult& r) {
  return score_with(d, r, error_brier);
}
inline ScoreTotal score_rps(const StageDistribution& d, const RealizedResult& r,
                            RpsVariant v = RpsVariant::cumulative) {
  return score_with(d, r, [v](const StageProbabilities& p, int res) { return error_rps(p, res, v); });
}

inline ScoreReport score_all(const StageDistribution& d, const RealizedResult& r,
                             RpsVariant v = RpsVariant::cumulative) {
  return {score_e1(d, r), score_e2(d, r), score_brier(d, r), score_rps(d, r, v), d.teams};
}

}  // namespace wcsim
