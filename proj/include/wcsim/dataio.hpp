#pragma once

// Match and Elo ingestion, per-team observation extraction.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wcsim/error.hpp"
#include "wcsim/model_family.hpp"

namespace wcsim {

using Date = std::chrono::year_month_day;

enum class Venue { neutral, home_of_first, home_of_second };

struct MatchRecord {
  Date date;
  TeamId home_team;
  TeamId away_team;
  int home_goals = 0;
  int away_goals = 0;
  Venue venue = Venue::neutral;
  std::optional<double> elo_home_at_match;
  std::optional<double> elo_away_at_match;
  std::string competition;  // optional column, empty when absent
};

struct EloSnapshot {
  std::optional<Date> as_of;
  std::map<TeamId, double> ratings;

  double at(const TeamId& team) const {
    auto it = ratings.find(team);
    if (it == ratings.end()) throw DataError("no Elo rating for " + team);
    return it->second;
  }
  bool contains(const TeamId& team) const { return ratings.contains(team); }
};

enum class VenuePolicy { neutral_only, all };

/// Team-specific adjustments to the default filter window.
struct TeamOverride {
  std::optional<Date> date_from;
  std::optional<VenuePolicy> venue_policy;
  /// Competitions admitted regardless of venue (e.g. a tournament hosted by the team).
  std::vector<std::string> extra_competitions;
  /// Keep only matches whose opponent is a tournament participant.
  bool participants_only = false;
  /// Other names under which this team's matches are recorded.
  std::vector<TeamId> aliases;
  /// Model families the override applies to; empty means all.
  std::vector<ModelFamily> families;

  bool applies_to(std::optional<ModelFamily> family) const {
    if (families.empty()) return true;
    return family && std::find(families.begin(), families.end(), *family) != families.end();
  }
};

struct DataFilter {
  Date date_from;
  Date date_to;
  VenuePolicy venue_policy = VenuePolicy::neutral_only;
  std::map<TeamId, TeamOverride> team_overrides;
  std::set<TeamId> participants;

  void validate() const {
    if (!(date_from < date_to)) throw DataError("filter date_from must precede date_to");
    for (const auto& [team, rule] : team_overrides) {
      if (!participants.empty() && !participants.contains(team))
        throw DataError("override references unknown team " + team);
      if (rule.participants_only && participants.empty())
        throw DataError("override for " + team + " needs a participant list");
    }
  }
};

/// One regression observation seen from a team's side.
struct Observation {
  TeamId opponent;
  double opponent_elo = 0.0;
  int goals_for = 0;
  int goals_against = 0;
  Date date;
};

/// Maps historical names onto current team ids.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(std::map<std::string, TeamId> m) : map_(std::move(m)) {}

  static AliasTable defaults() {
    return AliasTable({{"Yugoslavia", "Serbia"}, {"Serbia and Montenegro", "Serbia"}});
  }

  const TeamId& resolve(const std::string& name) const {
    auto it = map_.find(name);
    return it == map_.end() ? name : it->second;
  }

  void add(std::string from, TeamId to) { map_[std::move(from)] = std::move(to); }

 private:
  std::map<std::string, TeamId> map_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  // from_chars for double is available in libstdc++ 11
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<int> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

}  // namespace detail

/// Parses an ISO-8601 calendar date (YYYY-MM-DD).
inline std::optional<Date> parse_date(std::string_view s) {
  s = detail::trim(s);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto y = detail::parse_int(s.substr(0, 4));
  auto m = detail::parse_int(s.substr(5, 2));
  auto d = detail::parse_int(s.substr(8, 2));
  if (!y || !m || !d || *m < 1 || *d < 1) return std::nullopt;
  Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
            std::chrono::day{static_cast<unsigned>(*d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

inline Date date_or_throw(std::string_view s) {
  auto d = parse_date(s);
  if (!d) throw DataError("invalid date '" + std::string(s) + "'");
  return *d;
}

/// Reads a match CSV: `date,team1,team2,goals1,goals2,venue[,elo1,elo2][,competition]`.
/// Blank lines and lines starting with '#' are skipped.
inline std::vector<MatchRecord> read_matches(std::istream& in,
                                             const AliasTable& aliases = AliasTable::defaults()) {
  std::vector<MatchRecord> out;
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> col;
  auto fail = [&](std::string_view field, const std::string& why) -> DataError {
    return DataError("line " + std::to_string(line_no) + ", field '" + std::string(field) +
                     "': " + why);
  };

  while (std::getline(in, line)) {
    ++line_no;
    auto view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto fields = detail::split_commas(view);
    if (col.empty()) {
      for (std::size_t i = 0; i < fields.size(); ++i) col[std::string(fields[i])] = i;
      for (const char* req : {"date", "team1", "team2", "goals1", "goals2", "venue"})
        if (!col.contains(req)) throw fail(req, "missing column in header");
      continue;
    }
    auto get = [&](const char* name) -> std::string_view {
      auto it = col.find(name);
      if (it == col.end()) return {};
      if (it->second >= fields.size()) throw fail(name, "row has too few fields");
      return fields[it->second];
    };

    MatchRecord r;
    auto date = parse_date(get("date"));
    if (!date) throw fail("date", "not a valid ISO date");
    r.date = *date;
    r.home_team = aliases.resolve(std::string(get("team1")));
    r.away_team = aliases.resolve(std::string(get("team2")));
    if (r.home_team.empty()) throw fail("team1", "empty team name");
    if (r.away_team.empty()) throw fail("team2", "empty team name");
    if (r.home_team == r.away_team) throw fail("team2", "team plays itself");
    auto g1 = detail::parse_int(get("goals1"));
    auto g2 = detail::parse_int(get("goals2"));
    if (!g1 || *g1 < 0) throw fail("goals1", "expected a non-negative integer");
    if (!g2 || *g2 < 0) throw fail("goals2", "expected a non-negative integer");
    r.home_goals = *g1;
    r.away_goals = *g2;
    auto venue = get("venue");
    if (venue == "N") r.venue = Venue::neutral;
    else if (venue == "H1") r.venue = Venue::home_of_first;
    else if (venue == "H2") r.venue = Venue::home_of_second;
    else throw fail("venue", "unknown venue code '" + std::string(venue) + "'");
    if (auto e = get("elo1"); !e.empty()) {
      r.elo_home_at_match = detail::parse_double(e);
      if (!r.elo_home_at_match) throw fail("elo1", "not a number");
    }
    if (auto e = get("elo2"); !e.empty()) {
      r.elo_away_at_match = detail::parse_double(e);
      if (!r.elo_away_at_match) throw fail("elo2", "not a number");
    }
    r.competition = std::string(get("competition"));
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<MatchRecord> load_matches(const std::string& path,
                                             const AliasTable& aliases = AliasTable::defaults()) {
  auto in = detail::open_or_throw(path);
  try {
    return read_matches(in, aliases);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

/// Reads an Elo CSV with header `team,rating`. A comment `# as_of=YYYY-MM-DD`
/// sets the snapshot date.
inline EloSnapshot read_elo_snapshot(std::istream& in) {
  EloSnapshot snap;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = detail::trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      auto pos = view.find("as_of=");
      if (pos != std::string_view::npos) snap.as_of = parse_date(view.substr(pos + 6));
      continue;
    }
    auto fields = detail::split_commas(view);
    if (!header) {
      if (fields.size() < 2 || fields[0] != "team" || fields[1] != "rating")
        throw DataError("line " + std::to_string(line_no) + ": expected header 'team,rating'");
      header = true;
      continue;
    }
    if (fields.size() < 2)
      throw DataError("line " + std::to_string(line_no) + ": expected 'team,rating'");
    std::string team(fields[0]);
    auto rating = detail::parse_double(fields[1]);
    if (!rating)
      throw DataError("line " + std::to_string(line_no) + ": non-numeric rating for " + team);
    if (*rating <= 0.0)
      throw DataError("line " + std::to_string(line_no) + ": rating must be positive for " + team);
    if (!snap.ratings.emplace(team, *rating).second)
      throw DataError("line " + std::to_string(line_no) + ": duplicate team " + team);
  }
  if (snap.ratings.empty()) throw DataError("no participants in Elo snapshot");
  return snap;
}

inline EloSnapshot load_elo_snapshot(const std::string& path) {
  auto in = detail::open_or_throw(path);
  try {
    return read_elo_snapshot(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

/// Extracts `team`'s observations that pass `filter`, oriented from its side.
/// The opponent rating is the per-match value when the record carries one,
/// otherwise the snapshot value.
inline std::vector<Observation> observations_for_team(const std::vector<MatchRecord>& matches,
                                                      const TeamId& team,
                                                      const DataFilter& filter,
                                                      const EloSnapshot& elo,
                                                      std::optional<ModelFamily> family = {}) {
  const TeamOverride* rule = nullptr;
  if (auto it = filter.team_overrides.find(team);
      it != filter.team_overrides.end() && it->second.applies_to(family))
    rule = &it->second;

  const Date from = rule && rule->date_from ? *rule->date_from : filter.date_from;
  const VenuePolicy policy = rule && rule->venue_policy ? *rule->venue_policy : filter.venue_policy;
  auto is_self = [&](const TeamId& name) {
    if (name == team) return true;
    return rule && std::find(rule->aliases.begin(), rule->aliases.end(), name) != rule->aliases.end();
  };

  std::vector<Observation> out;
  for (const auto& m : matches) {
    const bool first = is_self(m.home_team);
    const bool second = is_self(m.away_team);
    if (first == second) continue;
    if (m.date < from || filter.date_to < m.date) continue;

    const bool extra = rule && !m.competition.empty() &&
                       std::find(rule->extra_competitions.begin(), rule->extra_competitions.end(),
                                 m.competition) != rule->extra_competitions.end();
    if (policy == VenuePolicy::neutral_only && m.venue != Venue::neutral && !extra) continue;

    Observation o;
    o.opponent = first ? m.away_team : m.home_team;
    if (rule && rule->participants_only && !filter.participants.contains(o.opponent)) continue;
    o.goals_for = first ? m.home_goals : m.away_goals;
    o.goals_against = first ? m.away_goals : m.home_goals;
    const auto& per_match = first ? m.elo_away_at_match : m.elo_home_at_match;
    o.opponent_elo = per_match ? *per_match : elo.at(o.opponent);
    o.date = m.date;
    out.push_back(std::move(o));
  }
  if (out.empty()) throw InsufficientDataError(team, 0, 1);
  return out;
}

}  // namespace wcsim
