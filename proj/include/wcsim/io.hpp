#pragma once

// JSON files: tournament formats and presets, realized tournament records,
// coefficient and diagnostics dumps.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wcsim/dataio.hpp"
#include "wcsim/matchmodels.hpp"
#include "wcsim/scoring.hpp"
#include "wcsim/tournament.hpp"

namespace wcsim {

using json = nlohmann::json;

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// Tournament format

inline TournamentFormat format_from_json(const json& j) {
  try {
    TournamentFormat f;
    f.name = j.value("name", "");
    const auto& groups = j.at("groups");
    if (!groups.is_array() || groups.size() != kGroups) throw DataError("format needs 8 groups");
    for (std::size_t g = 0; g < kGroups; ++g) {
      if (!groups[g].is_array() || groups[g].size() != 4) throw DataError("every group needs 4 teams");
      for (std::size_t k = 0; k < 4; ++k) f.groups[g][k] = groups[g][k].get<std::string>();
    }
    const auto& r16 = j.at("bracket").at("round_of_16");
    if (!r16.is_array() || r16.size() != 8) throw DataError("bracket needs 8 round-of-16 pairings");
    for (std::size_t i = 0; i < 8; ++i)
      f.round_of_16[i] = {parse_slot(r16[i].at(0).get<std::string>()),
                          parse_slot(r16[i].at(1).get<std::string>())};
    f.validate();
    return f;
  } catch (const json::exception& e) {
    throw DataError(std::string("tournament format: ") + e.what());
  }
}

inline json format_to_json(const TournamentFormat& f) {
  json j;
  j["name"] = f.name;
  j["groups"] = json::array();
  for (const auto& g : f.groups) j["groups"].push_back(json(std::vector<std::string>(g.begin(), g.end())));
  j["bracket"]["round_of_16"] = json::array();
  for (const auto& [a, b] : f.round_of_16) j["bracket"]["round_of_16"].push_back({slot_name(a), slot_name(b)});
  return j;
}

// ---------------------------------------------------------------------------
// Presets

/// A historical or upcoming tournament: format, data window, team rules.
struct Preset {
  std::string id;
  TournamentFormat format;
  std::filesystem::path matches;
  std::filesystem::path elo;
  DataFilter filter;
  double k_factor = 60.0;
  std::optional<std::filesystem::path> realized;
};

inline TeamOverride override_from_json(const json& j) {
  TeamOverride o;
  if (j.contains("date_from")) o.date_from = date_or_throw(j.at("date_from").get<std::string>());
  if (j.contains("venue_policy")) {
    const auto v = j.at("venue_policy").get<std::string>();
    if (v == "all") o.venue_policy = VenuePolicy::all;
    else if (v == "neutral_only") o.venue_policy = VenuePolicy::neutral_only;
    else throw DataError("unknown venue_policy " + v);
  }
  o.extra_competitions = j.value("extra_competitions", std::vector<std::string>{});
  o.participants_only = j.value("participants_only", false);
  o.aliases = j.value("aliases", std::vector<std::string>{});
  for (const auto& f : j.value("families", std::vector<std::string>{})) {
    auto fam = parse_family(f);
    if (!fam) throw DataError("unknown model family " + f);
    o.families.push_back(*fam);
  }
  return o;
}

inline Preset load_preset(const std::filesystem::path& path) {
  const auto j = read_json_file(path);
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : (base / fp).lexically_normal();
  };
  try {
    Preset p;
    p.id = j.value("id", path.stem().string());
    p.format = format_from_json(j);
    const auto& d = j.at("data");
    p.matches = resolve(d.at("matches").get<std::string>());
    p.elo = resolve(d.at("elo").get<std::string>());
    p.filter.date_from = date_or_throw(d.at("date_from").get<std::string>());
    p.filter.date_to = date_or_throw(d.at("date_to").get<std::string>());
    p.filter.venue_policy =
        d.value("venue_policy", "neutral_only") == "all" ? VenuePolicy::all : VenuePolicy::neutral_only;
    const auto participants = p.format.participants();
    p.filter.participants = {participants.begin(), participants.end()};
    if (j.contains("overrides"))
      for (const auto& [team, rule] : j.at("overrides").items())
        p.filter.team_overrides[team] = override_from_json(rule);
    p.filter.validate();
    p.k_factor = j.value("k_factor", 60.0);
    if (j.contains("realized")) p.realized = resolve(j.at("realized").get<std::string>());
    return p;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

/// Resolves "2018" to <data_dir>/presets/wc2018.json; anything else is a path.
inline std::filesystem::path preset_path(const std::string& name, const std::filesystem::path& data_dir) {
  if (name == "2010" || name == "2014" || name == "2018") return data_dir / "presets" / ("wc" + name + ".json");
  return name;
}

// ---------------------------------------------------------------------------
// Realized results

inline TournamentRecord record_from_json(const json& j) {
  try {
    TournamentRecord r;
    r.participants = j.at("participants").get<std::vector<std::string>>();
    auto ties = [&](const char* key) {
      std::vector<KnockoutRecord> out;
      if (!j.contains("knockout") || !j.at("knockout").contains(key)) return out;
      for (const auto& t : j.at("knockout").at(key))
        out.push_back({t.at(0).get<std::string>(), t.at(1).get<std::string>(), t.at(2).get<std::string>()});
      return out;
    };
    r.round_of_16 = ties("round_of_16");
    r.quarter_finals = ties("quarter_finals");
    r.semi_finals = ties("semi_finals");
    r.final = ties("final");
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("tournament record: ") + e.what());
  }
}

inline RealizedResult load_realized(const std::filesystem::path& path) {
  return realized_results(record_from_json(read_json_file(path)));
}

// ---------------------------------------------------------------------------
// Coefficients

inline json bivariate_to_json(const BivariateTeamFit& f) {
  return {{"mu", f.mu_coeffs},          {"nu", f.nu_coeffs},
          {"tau_coeff", f.tau_coeff},   {"loglik", f.loglik},
          {"aic", f.aic},               {"iterations", f.iterations},
          {"tau_at_lower_bound", f.tau_at_lower_bound}};
}

inline BivariateTeamFit bivariate_from_json(const json& j) {
  BivariateTeamFit f;
  f.mu_coeffs = j.at("mu").get<std::array<double, 2>>();
  f.nu_coeffs = j.at("nu").get<std::array<double, 2>>();
  f.tau_coeff = j.at("tau_coeff").get<double>();
  f.loglik = j.value("loglik", 0.0);
  f.aic = j.value("aic", 0.0);
  f.iterations = j.value("iterations", 0);
  f.tau_at_lower_bound = j.value("tau_at_lower_bound", false);
  return f;
}

inline json coefficients_to_json(const TeamCoefficients& c) {
  json j = json::object();
  if (c.attack && c.defense)
    j["independent"] = {{"attack", {c.attack->intercept, c.attack->slope}},
                        {"defense", {c.defense->intercept, c.defense->slope}}};
  if (c.nested_gamma) j["nested"] = {{"gamma", {c.nested_gamma->g0, c.nested_gamma->g1, c.nested_gamma->g2}}};
  if (c.bivariate) j["bivariate"] = bivariate_to_json(*c.bivariate);
  if (c.inflated) {
    json b = bivariate_to_json(c.inflated->base);
    b["p"] = c.inflated->inflation.p;
    b["theta"] = c.inflated->inflation.theta;
    b["aic"] = c.inflated->aic;
    j["inflated"] = b;
  }
  return j;
}

inline TeamCoefficients coefficients_from_json(const TeamId& team, const json& j) {
  TeamCoefficients c;
  c.team = team;
  if (j.contains("independent")) {
    const auto a = j.at("independent").at("attack").get<std::array<double, 2>>();
    const auto d = j.at("independent").at("defense").get<std::array<double, 2>>();
    c.attack = LogLinear{a[0], a[1]};
    c.defense = LogLinear{d[0], d[1]};
  }
  if (j.contains("nested")) {
    const auto g = j.at("nested").at("gamma").get<std::array<double, 3>>();
    c.nested_gamma = NestedGamma{g[0], g[1], g[2]};
  }
  if (j.contains("bivariate")) c.bivariate = bivariate_from_json(j.at("bivariate"));
  if (j.contains("inflated")) {
    const auto& b = j.at("inflated");
    InflatedFit f;
    f.base = bivariate_from_json(b);
    f.inflation.p = b.at("p").get<double>();
    f.inflation.theta = b.at("theta").get<std::array<double, 3>>();
    f.aic = b.value("aic", f.base.aic);
    c.inflated = f;
  }
  return c;
}

inline json coefficient_dump(const std::map<TeamId, TeamCoefficients>& all, const json& meta = json::object()) {
  json j;
  j["meta"] = meta;
  j["teams"] = json::object();
  for (const auto& [team, c] : all) j["teams"][team] = coefficients_to_json(c);
  return j;
}

inline std::map<TeamId, TeamCoefficients> load_coefficient_dump(const json& j) {
  std::map<TeamId, TeamCoefficients> out;
  try {
    for (const auto& [team, c] : j.at("teams").items()) out.emplace(team, coefficients_from_json(team, c));
  } catch (const json::exception& e) {
    throw DataError(std::string("coefficient dump: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics

inline json regression_diagnostics(const LogLinear& coef, const DevianceReport& dev, const GofReport& gof) {
  return {{"coefficients", {coef.intercept, coef.slope}},
          {"null_deviance", dev.null_deviance},
          {"residual_deviance", dev.residual_deviance},
          {"df_null", dev.df_null},
          {"df_residual", dev.df_residual},
          {"deviance_p_value", dev.p_value},
          {"chi_statistic", gof.chi_statistic},
          {"gof_df", gof.df},
          {"gof_p_value", gof.p_value},
          {"n_matches", gof.n_matches}};
}

inline json diagnostics_dump(const std::map<TeamId, TeamCoefficients>& all, const json& meta = json::object()) {
  json j;
  j["meta"] = meta;
  j["teams"] = json::object();
  for (const auto& [team, c] : all) {
    json t = json::object();
    if (c.diagnostics && c.attack && c.defense) {
      t["n_obs"] = c.diagnostics->n_obs;
      t["attack"] = regression_diagnostics(*c.attack, c.diagnostics->attack_deviance, c.diagnostics->attack_gof);
      t["defense"] =
          regression_diagnostics(*c.defense, c.diagnostics->defense_deviance, c.diagnostics->defense_gof);
    }
    if (c.bivariate)
      t["bivariate"] = {{"loglik", c.bivariate->loglik}, {"aic", c.bivariate->aic}, {"tau", c.bivariate->tau()}};
    if (c.inflated)
      t["inflated"] = {{"p", c.inflated->inflation.p},
                       {"theta", c.inflated->inflation.theta},
                       {"aic", c.inflated->aic}};
    j["teams"][team] = t;
  }
  return j;
}

}  // namespace wcsim
