#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wcsim/io.hpp"
#include "wcsim/report.hpp"

namespace fs = std::filesystem;
using namespace wcsim;

namespace {

#ifndef WCSIM_DATA_DIR
#define WCSIM_DATA_DIR "data"
#endif

enum Exit { kOk = 0, kFailure = 1, kDataFailure = 2, kFitFailure = 3 };

struct RunConfig {
  std::string preset = "2018";
  std::string data_dir = WCSIM_DATA_DIR;
  std::string data;
  std::string elo;
  std::string realized;
  std::string coefficients;
  std::string stages;
  std::vector<std::string> models;
  std::uint64_t n = 100000;
  std::optional<std::uint64_t> seed;
  std::optional<double> k_factor;
  unsigned threads = 0;
  std::string out = "out";
  bool rps_literal = false;
  bool no_elo_update = false;
};

struct Inputs {
  Preset preset;
  std::vector<MatchRecord> matches;
  EloSnapshot elo;
  double k_factor = 60.0;
};

Inputs load_inputs(const RunConfig& cfg) {
  Inputs in;
  const auto ppath = preset_path(cfg.preset, cfg.data_dir);
  if (!fs::exists(ppath)) throw DataError("cannot open preset " + ppath.string());
  in.preset = load_preset(ppath);
  const std::string data = cfg.data.empty() ? in.preset.matches.string() : cfg.data;
  const std::string elo = cfg.elo.empty() ? in.preset.elo.string() : cfg.elo;
  in.matches = load_matches(data);
  in.elo = load_elo_snapshot(elo);
  in.k_factor = cfg.k_factor.value_or(in.preset.k_factor);
  for (const auto& t : in.preset.format.participants())
    if (!in.elo.contains(t)) throw DataError(elo + ": no Elo rating for participant " + t);
  return in;
}

std::vector<ModelFamily> families(const std::vector<std::string>& names) {
  if (names.empty()) return {kAllFamilies.begin(), kAllFamilies.end()};
  std::vector<ModelFamily> out;
  for (const auto& n : names) {
    auto f = parse_family(n);
    if (!f) throw Error("unknown model family " + n);
    out.push_back(*f);
  }
  return out;
}

std::map<TeamId, TeamCoefficients> coefficients_for(const RunConfig& cfg, const Inputs& in,
                                                    const std::vector<ModelFamily>& fams) {
  if (!cfg.coefficients.empty()) return load_coefficient_dump(read_json_file(cfg.coefficients));
  return fit_all_models(in.matches, in.preset.format.participants(), in.preset.filter, in.elo, fams);
}

void note(const std::string& path) { std::cerr << "wrote " << path << "\n"; }

void write(const fs::path& path, const std::string& text) {
  write_text_file(path, text);
  note(path.string());
}

void write_sankey(const fs::path& dir, const std::string& stem, const StageDistribution& d, const RunInfo& info) {
  const auto s = build_sankey(d);
  write(dir / (stem + ".json"), sankey_json(s, info).dump(2) + "\n");
  write(dir / (stem + ".svg"), sankey_svg(s, info, d.size()));
}

StageDistribution simulate(const Inputs& in, const std::map<TeamId, TeamCoefficients>& coeffs, ModelFamily fam,
                           const RunConfig& cfg) {
  const auto participants = in.preset.format.participants();
  FittedMatchModel model(fam, coeffs, participants);
  EloTable table(participants, in.elo, in.k_factor);
  MonteCarloOptions opts;
  opts.replications = cfg.n;
  opts.seed = *cfg.seed;
  opts.threads = cfg.threads;
  opts.simulation.update_elo = !cfg.no_elo_update;
  return monte_carlo(in.preset.format, model, table, opts);
}

RunInfo run_info(const RunConfig& cfg, const Inputs& in, ModelFamily fam) {
  RunInfo r;
  r.model = to_string(fam);
  r.seed = *cfg.seed;
  r.replications = cfg.n;
  r.elo_update = !cfg.no_elo_update;
  r.k_factor = in.k_factor;
  r.preset = in.preset.id;
  return r;
}

int cmd_fit(const RunConfig& cfg) {
  const auto in = load_inputs(cfg);
  const auto fams = families(cfg.models);
  const auto coeffs = fit_all_models(in.matches, in.preset.format.participants(), in.preset.filter, in.elo, fams);
  json meta = {{"preset", in.preset.id},
               {"date_from", format_date(in.preset.filter.date_from)},
               {"date_to", format_date(in.preset.filter.date_to)},
               {"families", json::array()}};
  for (auto f : fams) meta["families"].push_back(to_string(f));
  const fs::path out(cfg.out);
  write(out / "coefficients.json", coefficient_dump(coeffs, meta).dump(2) + "\n");
  write(out / "diagnostics.json", diagnostics_dump(coeffs, meta).dump(2) + "\n");
  return kOk;
}

int cmd_simulate(const RunConfig& cfg) {
  const auto in = load_inputs(cfg);
  const auto fams = families(cfg.models.empty() ? std::vector<std::string>{"nested"} : cfg.models);
  const auto coeffs = coefficients_for(cfg, in, fams);
  const fs::path out(cfg.out);
  for (auto fam : fams) {
    const auto d = simulate(in, coeffs, fam, cfg);
    const auto info = run_info(cfg, in, fam);
    const std::string stem = std::string(to_string(fam));
    write(out / ("stages_" + stem + ".csv"), stage_csv(d, info));
    write_sankey(out, "sankey_" + stem, d, info);
  }
  return kOk;
}

int cmd_validate(const RunConfig& cfg) {
  const auto in = load_inputs(cfg);
  fs::path realized_path;
  if (!cfg.realized.empty()) realized_path = cfg.realized;
  else if (in.preset.realized) realized_path = *in.preset.realized;
  else throw DataError("preset " + in.preset.id + " has no realized results; pass --realized");
  const auto real = load_realized(realized_path);
  real.validate_cup();
  for (const auto& t : in.preset.format.participants()) real.at(t);

  const auto fams = families(cfg.models);
  const auto coeffs = coefficients_for(cfg, in, fams);
  const auto variant = cfg.rps_literal ? RpsVariant::literal : RpsVariant::cumulative;
  const fs::path out(cfg.out);
  std::vector<ScoreRow> rows;
  for (auto fam : fams) {
    const auto d = simulate(in, coeffs, fam, cfg);
    const auto info = run_info(cfg, in, fam);
    write(out / ("stages_" + std::string(to_string(fam)) + ".csv"), stage_csv(d, info));
    rows.push_back({std::string(to_string(fam)), score_all(d, real, variant)});
  }
  auto info = run_info(cfg, in, fams.front());
  write(out / "scores.csv", score_csv(rows, info));
  for (const auto& r : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%-12s E1 %3.0f  E2 %7.3f  Brier %7.3f  RPS %6.3f\n", r.model.c_str(),
                  r.report.e1.total, r.report.e2.total, r.report.brier.total, r.report.rps.total);
    std::cout << line;
  }
  return kOk;
}

int cmd_report(const RunConfig& cfg) {
  if (cfg.stages.empty()) throw Error("report needs --stages <stage csv>");
  std::ifstream f(cfg.stages);
  if (!f) throw DataError("cannot open " + cfg.stages);
  StageTable t;
  try {
    t = read_stage_csv(f);
  } catch (const DataError& e) {
    throw DataError(cfg.stages + ": " + e.what());
  }
  const std::string stem = t.info.model.empty() ? "report" : t.info.model;
  write_sankey(cfg.out, "sankey_" + stem, t.dist, t.info);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"World-Cup forecasting: fit match models, simulate tournaments, score forecasts"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--preset", cfg.preset, "Tournament preset: 2010, 2014, 2018 or a preset JSON path")
        ->capture_default_str();
    sub->add_option("--data-dir", cfg.data_dir, "Directory holding presets/ and data files")->capture_default_str();
    sub->add_option("--data", cfg.data, "Match CSV (overrides the preset)");
    sub->add_option("--elo", cfg.elo, "Elo CSV (overrides the preset)");
    sub->add_option("--model", cfg.models, "Model family: independent, bivariate, inflated, nested (repeatable)")
        ->check(CLI::IsMember({"independent", "bivariate", "inflated", "nested"}));
    sub->add_option("--k-factor", cfg.k_factor, "Elo K factor")->check(CLI::PositiveNumber);
    sub->add_option("--out", cfg.out, "Output directory")->capture_default_str();
  };
  auto simulation = [&](CLI::App* sub) {
    sub->add_option("--n", cfg.n, "Replications")->check(CLI::Range(std::uint64_t{1}, std::uint64_t{1} << 40))
        ->capture_default_str();
    sub->add_option("--seed", cfg.seed, "Random seed")->required();
    sub->add_option("--threads", cfg.threads, "Worker threads (0: all cores)");
    sub->add_option("--coefficients", cfg.coefficients, "Coefficient JSON from `fit` instead of refitting");
    sub->add_flag("--no-elo-update", cfg.no_elo_update, "Keep pre-tournament Elo ratings fixed");
  };

  auto* fit = app.add_subcommand("fit", "Fit the match models and write coefficients and diagnostics");
  common(fit);
  auto* sim = app.add_subcommand("simulate", "Simulate the tournament; write stage CSV and Sankey files");
  common(sim);
  simulation(sim);
  auto* val = app.add_subcommand("validate", "Score every model family against realized results");
  common(val);
  simulation(val);
  val->add_option("--realized", cfg.realized, "Realized-results JSON (overrides the preset)");
  val->add_flag("--rps-literal", cfg.rps_literal, "Use the point-indicator RPS variant");
  auto* rep = app.add_subcommand("report", "Rebuild Sankey JSON and SVG from a stage CSV");
  rep->add_option("--stages", cfg.stages, "Stage CSV written by simulate")->required();
  rep->add_option("--out", cfg.out, "Output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) return cmd_fit(cfg);
    if (*sim) return cmd_simulate(cfg);
    if (*val) return cmd_validate(cfg);
    if (*rep) return cmd_report(cfg);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataFailure;
  } catch (const FitError& e) {
    std::cerr << "fit error: " << e.what() << "\n";
    return kFitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
