#pragma once

// World-Cup format: group stage, knockout bracket and Monte-Carlo replication.

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "wcsim/elo.hpp"
#include "wcsim/error.hpp"
#include "wcsim/matchmodels.hpp"
#include "wcsim/random.hpp"

namespace wcsim {

inline constexpr std::size_t kGroups = 8;
inline constexpr std::size_t kTeams = 32;
inline constexpr int kOutcomes = 6;

/// Outcome codes: 1 champion, 2 lost final, 3 out in semi, 4 out in quarter,
/// 5 out in round of 16, 6 out in group stage.
enum Outcome : int {
  kChampion = 1,
  kLostFinal = 2,
  kOutSemi = 3,
  kOutQuarter = 4,
  kOutRound16 = 5,
  kOutGroup = 6
};

/// Group-rank slot such as "1A" (winner of group A).
struct GroupSlot {
  int group = 0;  // 0..7
  int rank = 1;   // 1 or 2

  friend bool operator==(const GroupSlot&, const GroupSlot&) = default;
  friend auto operator<=>(const GroupSlot&, const GroupSlot&) = default;
};

inline GroupSlot parse_slot(std::string_view s) {
  if (s.size() != 2 || (s[0] != '1' && s[0] != '2') || s[1] < 'A' || s[1] > 'H')
    throw DataError("invalid bracket slot '" + std::string(s) + "'");
  return {s[1] - 'A', s[0] - '0'};
}

inline std::string slot_name(GroupSlot s) {
  return std::string{static_cast<char>('0' + s.rank), static_cast<char>('A' + s.group)};
}

/// 8 groups of 4 and the round-of-16 pairings in bracket-leaf order:
/// winners of pairings 2k and 2k+1 meet in the quarter-finals, and so on up
/// the complete binary tree.
struct TournamentFormat {
  std::string name;
  std::array<std::array<TeamId, 4>, kGroups> groups;
  std::array<std::pair<GroupSlot, GroupSlot>, 8> round_of_16;

  /// Group-major participant order; team index = 4 * group + position.
  std::vector<TeamId> participants() const {
    std::vector<TeamId> out;
    for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
    return out;
  }

  void validate() const {
    std::set<TeamId> seen;
    for (const auto& g : groups)
      for (const auto& t : g) {
        if (t.empty()) throw DataError("empty team id in groups");
        if (!seen.insert(t).second) throw DataError("team appears twice: " + t);
      }
    std::set<GroupSlot> slots;
    for (const auto& [a, b] : round_of_16) {
      for (auto s : {a, b}) {
        if (s.group < 0 || s.group >= static_cast<int>(kGroups) || (s.rank != 1 && s.rank != 2))
          throw DataError("bracket slot out of range");
        if (!slots.insert(s).second) throw DataError("bracket slot used twice: " + slot_name(s));
      }
    }
    if (slots.size() != 16) throw DataError("bracket must cover all 16 group slots");
  }

  /// The FIFA 1998-2022 wiring: 1A-2B, 1C-2D | 1E-2F, 1G-2H || 1B-2A, 1D-2C | 1F-2E, 1H-2G.
  static TournamentFormat fifa(std::string name, std::array<std::array<TeamId, 4>, kGroups> groups) {
    TournamentFormat f;
    f.name = std::move(name);
    f.groups = std::move(groups);
    const char* wiring[8][2] = {{"1A", "2B"}, {"1C", "2D"}, {"1E", "2F"}, {"1G", "2H"},
                                {"1B", "2A"}, {"1D", "2C"}, {"1F", "2E"}, {"1H", "2G"}};
    for (std::size_t i = 0; i < 8; ++i)
      f.round_of_16[i] = {parse_slot(wiring[i][0]), parse_slot(wiring[i][1])};
    f.validate();
    return f;
  }
};

// ---------------------------------------------------------------------------
// Group stage

/// One group match between positions `home` and `away` (0..3).
struct GroupMatch {
  int home = 0;
  int away = 0;
  ScoreLine score;
};

struct Standing {
  int position = 0;  // 0..3 within the group
  int points = 0;
  int goal_diff = 0;
  int goals_for = 0;
};

/// Final group table, best team first.
struct GroupTable {
  std::array<Standing, 4> rows;
};

/// Group fixtures in matchday order.
inline constexpr std::array<std::pair<int, int>, 6> kGroupFixtures = {
    {{0, 1}, {2, 3}, {0, 2}, {3, 1}, {3, 0}, {1, 2}}};

namespace detail {

inline std::array<Standing, 4> tally(std::span<const GroupMatch> matches, const std::vector<int>& among) {
  std::array<Standing, 4> s{};
  for (int i = 0; i < 4; ++i) s[static_cast<std::size_t>(i)].position = i;
  auto in = [&](int t) { return std::find(among.begin(), among.end(), t) != among.end(); };
  for (const auto& m : matches) {
    if (!in(m.home) || !in(m.away)) continue;
    auto& h = s[static_cast<std::size_t>(m.home)];
    auto& a = s[static_cast<std::size_t>(m.away)];
    h.goals_for += m.score.goals_a;
    a.goals_for += m.score.goals_b;
    h.goal_diff += m.score.goals_a - m.score.goals_b;
    a.goal_diff += m.score.goals_b - m.score.goals_a;
    if (m.score.goals_a > m.score.goals_b) h.points += 3;
    else if (m.score.goals_a < m.score.goals_b) a.points += 3;
    else {
      h.points += 1;
      a.points += 1;
    }
  }
  return s;
}

inline auto key(const Standing& s) { return std::make_tuple(s.points, s.goal_diff, s.goals_for); }

}  // namespace detail

/// Ranks a group: points, goal difference, goals scored; then the same three
/// restricted to matches among the tied teams; then lots from `rng`.
/// Fair-play points are not modelled.
template <class URBG>
GroupTable rank_group(std::span<const GroupMatch> matches, URBG& rng) {
  if (matches.size() != 6) throw Error("a group has exactly 6 matches");
  const auto overall = detail::tally(matches, {0, 1, 2, 3});
  std::vector<int> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return detail::key(overall[static_cast<std::size_t>(a)]) > detail::key(overall[static_cast<std::size_t>(b)]);
  });

  for (std::size_t lo = 0; lo < order.size();) {
    std::size_t hi = lo + 1;
    while (hi < order.size() && detail::key(overall[static_cast<std::size_t>(order[hi])]) ==
                                    detail::key(overall[static_cast<std::size_t>(order[lo])]))
      ++hi;
    if (hi - lo > 1) {
      std::vector<int> tied(order.begin() + static_cast<long>(lo), order.begin() + static_cast<long>(hi));
      const auto h2h = detail::tally(matches, tied);
      std::stable_sort(tied.begin(), tied.end(), [&](int a, int b) {
        return detail::key(h2h[static_cast<std::size_t>(a)]) > detail::key(h2h[static_cast<std::size_t>(b)]);
      });
      // Drawing of lots among teams still level after head-to-head.
      for (std::size_t s = 0; s < tied.size();) {
        std::size_t e = s + 1;
        while (e < tied.size() && detail::key(h2h[static_cast<std::size_t>(tied[e])]) ==
                                      detail::key(h2h[static_cast<std::size_t>(tied[s])]))
          ++e;
        if (e - s > 1) {
          std::vector<std::pair<std::uint64_t, int>> lots;
          for (std::size_t k = s; k < e; ++k) lots.emplace_back(static_cast<std::uint64_t>(rng()), tied[k]);
          std::sort(lots.begin(), lots.end());
          for (std::size_t k = s; k < e; ++k) tied[k] = lots[k - s].second;
        }
        s = e;
      }
      std::copy(tied.begin(), tied.end(), order.begin() + static_cast<long>(lo));
    }
    lo = hi;
  }

  GroupTable t;
  for (std::size_t i = 0; i < 4; ++i) t.rows[i] = overall[static_cast<std::size_t>(order[i])];
  return t;
}

// ---------------------------------------------------------------------------
// Matches

struct SimulationOptions {
  bool update_elo = true;
};

struct KnockoutResult {
  std::size_t winner = 0;
  std::size_t loser = 0;
  ScoreLine score;  // after extra time when played
  bool extra_time = false;
  bool penalties = false;
};

/// Group or knockout match at the current ratings. Updates Elo from the score.
inline ScoreLine play_group_match(const MatchSampler& model, std::size_t a, std::size_t b,
                                  EloTable& elo, Rng& rng, const SimulationOptions& opts = {}) {
  const auto rates = model.rates(a, b, elo.rating(a), elo.rating(b));
  const auto score = model.sample(rates, rng);
  if (opts.update_elo) elo.update(a, b, score);
  return score;
}

/// 90 minutes; if level, 30 minutes at one third of every rate; if still
/// level, a shoot-out won by A with probability lambda_A / (lambda_A + lambda_B).
/// A shoot-out counts as a draw for the Elo update.
inline KnockoutResult play_knockout_match(const MatchSampler& model, std::size_t a, std::size_t b,
                                          EloTable& elo, Rng& rng, const SimulationOptions& opts = {}) {
  const auto rates = model.rates(a, b, elo.rating(a), elo.rating(b));
  KnockoutResult r;
  r.score = model.sample(rates, rng);
  if (r.score.goals_a == r.score.goals_b) {
    r.extra_time = true;
    const auto et = model.sample(rates.extra_time(), rng);
    r.score.goals_a += et.goals_a;
    r.score.goals_b += et.goals_b;
  }
  bool a_wins = r.score.goals_a > r.score.goals_b;
  if (r.score.goals_a == r.score.goals_b) {
    r.penalties = true;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    a_wins = u(rng) < rates.penalty_probability_a();
  }
  r.winner = a_wins ? a : b;
  r.loser = a_wins ? b : a;
  if (opts.update_elo) elo.update(a, b, r.score, r.penalties ? EloOutcome::draw : EloOutcome::from_score);
  return r;
}

// ---------------------------------------------------------------------------
// Whole tournament

struct TournamentOutcome {
  std::array<int, kTeams> codes{};
  int matches_played = 0;
  EloTable final_elo;
};

/// One full replication. `elo` holds the pre-tournament ratings of the
/// participants in format order and is copied, never mutated.
inline TournamentOutcome simulate_tournament(const TournamentFormat& format, const MatchSampler& model,
                                             const EloTable& elo, Rng& rng,
                                             const SimulationOptions& opts = {}) {
  TournamentOutcome out;
  out.codes.fill(kOutGroup);
  EloTable table = elo;

  std::array<std::array<GroupMatch, 6>, kGroups> results{};
  for (std::size_t md = 0; md < 3; ++md) {
    for (std::size_t g = 0; g < kGroups; ++g) {
      for (std::size_t k = 2 * md; k < 2 * md + 2; ++k) {
        const auto [h, a] = kGroupFixtures[k];
        const std::size_t ti = 4 * g + static_cast<std::size_t>(h);
        const std::size_t tj = 4 * g + static_cast<std::size_t>(a);
        results[g][k] = {h, a, play_group_match(model, ti, tj, table, rng, opts)};
        ++out.matches_played;
      }
    }
  }
  std::array<std::array<std::size_t, 2>, kGroups> qualified{};
  for (std::size_t g = 0; g < kGroups; ++g) {
    const auto t = rank_group(std::span<const GroupMatch>(results[g]), rng);
    qualified[g] = {4 * g + static_cast<std::size_t>(t.rows[0].position),
                    4 * g + static_cast<std::size_t>(t.rows[1].position)};
  }

  auto slot_team = [&](GroupSlot s) {
    return qualified[static_cast<std::size_t>(s.group)][static_cast<std::size_t>(s.rank - 1)];
  };
  auto play_round = [&](const std::vector<std::pair<std::size_t, std::size_t>>& pairs, int loser_code) {
    std::vector<std::size_t> winners;
    std::vector<std::size_t> losers;
    for (const auto& [a, b] : pairs) {
      const auto r = play_knockout_match(model, a, b, table, rng, opts);
      ++out.matches_played;
      out.codes[r.loser] = loser_code;
      winners.push_back(r.winner);
      losers.push_back(r.loser);
    }
    return std::make_pair(winners, losers);
  };
  auto pair_up = [](const std::vector<std::size_t>& v) {
    std::vector<std::pair<std::size_t, std::size_t>> p;
    for (std::size_t i = 0; i + 1 < v.size(); i += 2) p.emplace_back(v[i], v[i + 1]);
    return p;
  };

  std::vector<std::pair<std::size_t, std::size_t>> r16;
  for (const auto& [a, b] : format.round_of_16) r16.emplace_back(slot_team(a), slot_team(b));
  auto [w16, l16] = play_round(r16, kOutRound16);
  auto [wqf, lqf] = play_round(pair_up(w16), kOutQuarter);
  auto [wsf, lsf] = play_round(pair_up(wqf), kOutSemi);
  // Third-place match: played for the ratings, not reflected in the codes.
  play_knockout_match(model, lsf[0], lsf[1], table, rng, opts);
  ++out.matches_played;
  auto [wf, lf] = play_round(pair_up(wsf), kLostFinal);
  out.codes[wf[0]] = kChampion;
  out.final_elo = std::move(table);
  return out;
}

/// Per-team probabilities over the six outcome codes.
struct StageDistribution {
  std::vector<TeamId> teams;
  std::vector<std::array<double, kOutcomes>> probabilities;  // [team][code - 1]
  std::vector<std::array<std::uint64_t, kOutcomes>> counts;  // empty when not simulated
  std::uint64_t replications = 0;

  std::size_t size() const { return teams.size(); }

  double p(std::size_t team, int code) const {
    return probabilities[team][static_cast<std::size_t>(code - 1)];
  }

  /// P(result <= code): reaching the stage whose losers get `code`, or
  /// better. reach(t, 1) is P(champion); reach(t, 5) is P(reach round of 16).
  double reach(std::size_t team, int code) const {
    double s = 0.0;
    for (int j = 1; j <= code; ++j) s += p(team, j);
    return s;
  }

  std::size_t index_of(const TeamId& t) const {
    auto it = std::find(teams.begin(), teams.end(), t);
    if (it == teams.end()) throw Error("team not in distribution: " + t);
    return static_cast<std::size_t>(it - teams.begin());
  }

  static StageDistribution from_counts(std::vector<TeamId> teams,
                                       std::vector<std::array<std::uint64_t, kOutcomes>> counts,
                                       std::uint64_t n) {
    StageDistribution d;
    d.teams = std::move(teams);
    d.counts = std::move(counts);
    d.replications = n;
    for (const auto& c : d.counts) {
      std::array<double, kOutcomes> p{};
      for (std::size_t j = 0; j < kOutcomes; ++j)
        p[j] = static_cast<double>(c[j]) / static_cast<double>(n);
      d.probabilities.push_back(p);
    }
    return d;
  }
};

struct MonteCarloOptions {
  std::uint64_t replications = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
  SimulationOptions simulation;
};

/// Replication i draws from stream_for(seed, i), so the result does not
/// depend on the number of workers.
inline StageDistribution monte_carlo(const TournamentFormat& format, const MatchSampler& model,
                                     const EloTable& elo, const MonteCarloOptions& opts) {
  if (opts.replications < 1) throw Error("need at least one replication");
  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, opts.replications));

  using Counts = std::vector<std::array<std::uint64_t, kOutcomes>>;
  std::vector<Counts> partial(threads, Counts(kTeams));
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](unsigned w) {
    try {
      const std::uint64_t begin = opts.replications * w / threads;
      const std::uint64_t end = opts.replications * (w + 1) / threads;
      for (std::uint64_t i = begin; i < end; ++i) {
        Rng rng = stream_for(opts.seed, i);
        const auto o = simulate_tournament(format, model, elo, rng, opts.simulation);
        for (std::size_t t = 0; t < kTeams; ++t) ++partial[w][t][static_cast<std::size_t>(o.codes[t] - 1)];
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  Counts total(kTeams);
  for (const auto& p : partial)
    for (std::size_t t = 0; t < kTeams; ++t)
      for (std::size_t j = 0; j < kOutcomes; ++j) total[t][j] += p[t][j];
  return StageDistribution::from_counts(format.participants(), std::move(total), opts.replications);
}

}  // namespace wcsim
