// Short Monte-Carlo run of a preset, printing the ten likeliest champions.
//   quick_forecast [2010|2014|2018] [replications]
#include <algorithm>
#include <cstdio>
#include <numeric>
#include <string>

#include "wcsim/io.hpp"

using namespace wcsim;

int main(int argc, char** argv) {
  const std::string which = argc > 1 ? argv[1] : "2018";
  const std::uint64_t n = argc > 2 ? std::stoull(argv[2]) : 20000;
  const auto preset = load_preset(preset_path(which, WCSIM_DATA_DIR));
  const auto teams = preset.format.participants();
  const auto elo = load_elo_snapshot(preset.elo);
  const auto coeffs = fit_all_models(load_matches(preset.matches), teams, preset.filter, elo, {ModelFamily::nested});

  FittedMatchModel model(ModelFamily::nested, coeffs, teams);
  MonteCarloOptions opts;
  opts.replications = n;
  opts.seed = 42;
  const auto d = monte_carlo(preset.format, model, EloTable(teams, elo, preset.k_factor), opts);

  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return d.p(x, 1) > d.p(y, 1); });
  std::printf("%-14s %8s %8s %8s\n", "team", "champion", "final", "semi");
  for (std::size_t i = 0; i < 10; ++i) {
    const auto t = order[i];
    std::printf("%-14s %8.3f %8.3f %8.3f\n", d.teams[t].c_str(), d.reach(t, 1), d.reach(t, 2), d.reach(t, 3));
  }
}
