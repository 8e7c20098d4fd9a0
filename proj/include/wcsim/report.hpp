#pragma once

// Output files: stage-probability CSV, score CSV, Sankey JSON and SVG.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wcsim/dataio.hpp"
#include "wcsim/scoring.hpp"
#include "wcsim/tournament.hpp"

namespace wcsim {

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Run metadata written as the first comment line of every output.
struct RunInfo {
  std::string model;
  std::uint64_t seed = 0;
  std::uint64_t replications = 0;
  bool elo_update = true;
  double k_factor = 60.0;
  std::string preset;

  std::map<std::string, std::string> fields() const {
    return {{"model", model},
            {"seed", std::to_string(seed)},
            {"n", std::to_string(replications)},
            {"elo_update", elo_update ? "on" : "off"},
            {"k_factor", detail::format_number(k_factor)},
            {"preset", preset}};
  }
};

namespace detail {

inline std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string meta_line(const RunInfo& info) {
  std::string s = "#";
  for (const auto& key : {"preset", "model", "seed", "n", "elo_update", "k_factor"})
    s += " " + std::string(key) + "=" + info.fields().at(key);
  return s + "\n";
}

inline RunInfo parse_meta_line(const std::string& line) {
  RunInfo info;
  std::istringstream in(line.substr(1));
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const auto k = tok.substr(0, eq), v = tok.substr(eq + 1);
    if (k == "model") info.model = v;
    else if (k == "seed") info.seed = std::stoull(v);
    else if (k == "n") info.replications = std::stoull(v);
    else if (k == "elo_update") info.elo_update = v != "off";
    else if (k == "k_factor") info.k_factor = std::stod(v);
    else if (k == "preset") info.preset = v;
  }
  return info;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stage CSV

inline constexpr std::array<const char*, kOutcomes> kReachColumns = {"champion", "final", "semi",
                                                                     "quarter",  "r16",   "prelim"};
inline constexpr std::array<const char*, kOutcomes> kExactColumns = {
    "p_champion", "p_runner_up", "p_out_semi", "p_out_quarter", "p_out_r16", "p_out_group"};

/// Teams ordered by P(champion), then P(final), ..., then name.
inline std::vector<std::size_t> ranking(const StageDistribution& d) {
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    for (int c = 1; c < kOutcomes; ++c)
      if (d.reach(a, c) != d.reach(b, c)) return d.reach(a, c) > d.reach(b, c);
    return d.teams[a] < d.teams[b];
  });
  return idx;
}

/// Columns champion..r16 are probabilities of reaching at least that stage;
/// prelim is the probability of going out in the group stage. The p_*
/// columns are the exclusive outcome probabilities.
inline std::string stage_csv(const StageDistribution& d, const RunInfo& info) {
  std::string s = detail::meta_line(info);
  s += "team";
  for (auto c : kReachColumns) s += std::string(",") + c;
  for (auto c : kExactColumns) s += std::string(",") + c;
  s += "\n";
  for (auto t : ranking(d)) {
    s += d.teams[t];
    for (int c = 1; c < kOutcomes; ++c) s += "," + detail::fixed(d.reach(t, c));
    s += "," + detail::fixed(d.p(t, kOutGroup));
    for (int c = 1; c <= kOutcomes; ++c) s += "," + detail::fixed(d.p(t, c));
    s += "\n";
  }
  return s;
}

struct StageTable {
  RunInfo info;
  StageDistribution dist;
};

inline StageTable read_stage_csv(std::istream& in) {
  StageTable out;
  std::string line;
  std::vector<std::string> header;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (header.empty()) out.info = detail::parse_meta_line(line);
      continue;
    }
    const auto views = detail::split_commas(line);
    std::vector<std::string> cells(views.begin(), views.end());
    if (header.empty()) {
      header = cells;
      for (auto c : kExactColumns)
        if (std::find(header.begin(), header.end(), c) == header.end())
          throw DataError("stage table: missing column '" + std::string(c) + "'");
      continue;
    }
    if (cells.size() != header.size())
      throw DataError("stage table line " + std::to_string(line_no) + ": wrong number of fields");
    std::array<double, kOutcomes> p{};
    for (std::size_t c = 0; c < kOutcomes; ++c) {
      const auto col = static_cast<std::size_t>(
          std::find(header.begin(), header.end(), kExactColumns[c]) - header.begin());
      auto v = detail::parse_double(cells[col]);
      if (!v || *v < 0.0 || *v > 1.0)
        throw DataError("stage table line " + std::to_string(line_no) + ": bad probability");
      p[c] = *v;
    }
    out.dist.teams.push_back(cells[0]);
    out.dist.probabilities.push_back(p);
  }
  if (out.dist.teams.empty()) throw DataError("stage table: no rows");
  out.dist.replications = out.info.replications;
  return out;
}

// ---------------------------------------------------------------------------
// Scores

struct ScoreRow {
  std::string model;
  ScoreReport report;
};

inline std::string score_csv(const std::vector<ScoreRow>& rows, const RunInfo& info) {
  RunInfo meta = info;
  meta.model = "all";
  std::string s = detail::meta_line(meta);
  s += "model,E1,E2,Brier,RPS\n";
  for (const auto& r : rows)
    s += r.model + "," + detail::fixed(r.report.e1.total, 0) + "," + detail::fixed(r.report.e2.total, 4) + "," +
         detail::fixed(r.report.brier.total, 4) + "," + detail::fixed(r.report.rps.total, 4) + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Sankey

/// Stage columns, left to right. Column k holds the teams that reached it.
inline constexpr std::array<const char*, kOutcomes> kSankeyStages = {"group", "r16",   "quarter",
                                                                     "semi",  "final", "champion"};
/// Sink receiving the teams that went out at stage column k.
inline constexpr std::array<const char*, kOutcomes - 1> kSankeySinks = {
    "out_group", "out_r16", "out_quarter", "out_semi", "runner_up"};

struct SankeyNode {
  std::string id;
  std::string team;  // empty for sinks
  int column = 0;
  double mass = 0.0;
  bool sink = false;
};

struct SankeyLink {
  std::size_t source = 0;
  std::size_t target = 0;
  double value = 0.0;
};

struct Sankey {
  std::vector<SankeyNode> nodes;
  std::vector<SankeyLink> links;
};

/// Team nodes (team, stage) carry P(reach stage). Every team node at column
/// k < 5 sends P(reach k+1) to its next stage and P(out at k) to the sink of
/// column k, so outflow equals inflow at every team node.
inline Sankey build_sankey(const StageDistribution& d, double min_value = 0.0) {
  Sankey s;
  std::map<std::string, std::size_t> index;
  auto node = [&](const std::string& id, const std::string& team, int col, bool sink) {
    auto [it, fresh] = index.emplace(id, s.nodes.size());
    if (fresh) s.nodes.push_back({id, team, col, 0.0, sink});
    return it->second;
  };
  const auto order = ranking(d);
  for (auto t : order) {
    const auto& team = d.teams[t];
    // reach(code) for stage column k is P(result <= 6 - k).
    auto reach_col = [&](int k) { return k == 0 ? 1.0 : d.reach(t, kOutcomes - k); };
    for (int k = 0; k < kOutcomes; ++k) {
      const double mass = reach_col(k);
      if (mass <= min_value && k > 0) break;
      const auto n = node(team + "|" + kSankeyStages[static_cast<std::size_t>(k)], team, k, false);
      s.nodes[n].mass = mass;
    }
  }
  for (int k = 0; k + 1 < kOutcomes; ++k)
    for (auto t : order) {
      const auto& team = d.teams[t];
      auto src = index.find(team + "|" + kSankeyStages[static_cast<std::size_t>(k)]);
      if (src == index.end()) continue;
      const double forward = d.reach(t, kOutcomes - k - 1);
      const double out = d.p(t, kOutcomes - k);
      auto dst = index.find(team + "|" + kSankeyStages[static_cast<std::size_t>(k + 1)]);
      if (forward > min_value && dst != index.end()) s.links.push_back({src->second, dst->second, forward});
      if (out > min_value) {
        const auto sink = node(kSankeySinks[static_cast<std::size_t>(k)], "", k + 1, true);
        s.nodes[sink].mass += out;
        s.links.push_back({src->second, sink, out});
      }
    }
  return s;
}

inline nlohmann::json sankey_json(const Sankey& s, const RunInfo& info) {
  nlohmann::json j;
  j["meta"] = info.fields();
  j["stages"] = kSankeyStages;
  j["nodes"] = nlohmann::json::array();
  for (const auto& n : s.nodes) {
    nlohmann::json o = {{"id", n.id}, {"column", n.column}, {"mass", n.mass}, {"sink", n.sink}};
    if (!n.sink) {
      o["team"] = n.team;
      o["stage"] = kSankeyStages[static_cast<std::size_t>(n.column)];
    }
    j["nodes"].push_back(o);
  }
  j["links"] = nlohmann::json::array();
  for (const auto& l : s.links)
    j["links"].push_back({{"source", s.nodes[l.source].id}, {"target", s.nodes[l.target].id}, {"value", l.value}});
  return j;
}

struct SvgStyle {
  double width = 1400.0;
  double height = 900.0;
  double margin = 40.0;
  double node_width = 14.0;
  double gap = 2.0;
  double label_min_px = 7.0;
};

/// Link stroke width is px_per_unit * value; px_per_unit is fixed for the
/// whole picture so widths compare across columns.
inline double sankey_px_per_unit(std::size_t teams, const SvgStyle& st = {}) {
  const double usable = st.height - 2 * st.margin - st.gap * static_cast<double>(teams);
  return usable / static_cast<double>(teams);
}

inline std::string sankey_svg(const Sankey& s, const RunInfo& info, std::size_t teams, const SvgStyle& st = {}) {
  const double unit = sankey_px_per_unit(teams, st);
  const double col_step = (st.width - 2 * st.margin - 120.0 - st.node_width) / (kOutcomes - 1);

  std::vector<double> y(s.nodes.size()), h(s.nodes.size()), x(s.nodes.size());
  std::array<double, kOutcomes> cursor;
  cursor.fill(st.margin);
  auto place = [&](bool sinks) {
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
      const auto& n = s.nodes[i];
      if (n.sink != sinks) continue;
      auto& c = cursor[static_cast<std::size_t>(n.column)];
      x[i] = st.margin + col_step * n.column;
      y[i] = c;
      h[i] = std::max(n.mass * unit, 0.5);
      c += h[i] + st.gap;
    }
  };
  place(false);
  for (auto& c : cursor) c += 3 * st.gap;
  place(true);

  std::ostringstream o;
  auto num = [](double v) { return detail::fixed(v, 2); };
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(st.width) << "\" height=\""
    << num(st.height) << "\" data-px-per-unit=\"" << detail::fixed(unit, 6) << "\" data-model=\""
    << detail::xml_escape(info.model) << "\" data-seed=\"" << info.seed << "\" data-n=\"" << info.replications << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int k = 0; k < kOutcomes; ++k)
    o << "<text x=\"" << num(st.margin + col_step * k) << "\" y=\"" << num(st.margin - 12)
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << kSankeyStages[static_cast<std::size_t>(k)]
      << "</text>\n";

  std::vector<double> out_off(s.nodes.size(), 0.0), in_off(s.nodes.size(), 0.0);
  o << "<g fill=\"none\" stroke-opacity=\"0.35\">\n";
  for (const auto& l : s.links) {
    const double w = unit * l.value;
    const double x0 = x[l.source] + st.node_width, x1 = x[l.target];
    const double y0 = y[l.source] + out_off[l.source] + w / 2;
    const double y1 = y[l.target] + in_off[l.target] + w / 2;
    out_off[l.source] += w;
    in_off[l.target] += w;
    const double xm = (x0 + x1) / 2;
    o << "<path d=\"M" << num(x0) << "," << num(y0) << " C" << num(xm) << "," << num(y0) << " " << num(xm)
      << "," << num(y1) << " " << num(x1) << "," << num(y1) << "\" stroke=\""
      << (s.nodes[l.target].sink ? "#c44" : "#369") << "\" stroke-width=\"" << detail::fixed(w, 4)
      << "\" data-source=\"" << detail::xml_escape(s.nodes[l.source].id) << "\" data-target=\""
      << detail::xml_escape(s.nodes[l.target].id)
      << "\" data-value=\"" << detail::fixed(l.value, 6) << "\"/>\n";
  }
  o << "</g>\n<g font-family=\"sans-serif\" font-size=\"9\">\n";
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    const auto& n = s.nodes[i];
    o << "<rect x=\"" << num(x[i]) << "\" y=\"" << num(y[i]) << "\" width=\"" << num(st.node_width)
      << "\" height=\"" << num(h[i]) << "\" fill=\"" << (n.sink ? "#a33" : "#234") << "\" data-id=\"" << detail::xml_escape(n.id)
      << "\" data-mass=\"" << detail::fixed(n.mass, 6) << "\"/>\n";
    if (h[i] >= st.label_min_px || n.sink)
      o << "<text x=\"" << num(x[i] + st.node_width + 3) << "\" y=\"" << num(y[i] + h[i] / 2 + 3) << "\">"
        << detail::xml_escape(n.sink ? n.id : n.team) << "</text>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

}  // namespace wcsim
