// Win/draw/loss odds for one fixture under each model family.
//   match_odds [home] [away]
#include <algorithm>
#include <cstdio>
#include <string>

#include "wcsim/io.hpp"

using namespace wcsim;

int main(int argc, char** argv) {
  const std::string a = argc > 1 ? argv[1] : "Germany";
  const std::string b = argc > 2 ? argv[2] : "Brazil";
  const auto preset = load_preset(preset_path("2018", WCSIM_DATA_DIR));
  const auto elo = load_elo_snapshot(preset.elo);
  const auto coeffs = fit_all_models(load_matches(preset.matches), preset.format.participants(), preset.filter, elo);

  const auto teams = preset.format.participants();
  auto index = [&](const std::string& t) {
    const auto it = std::find(teams.begin(), teams.end(), t);
    if (it == teams.end()) throw Error(t + " is not a 2018 participant");
    return static_cast<std::size_t>(it - teams.begin());
  };
  const auto ia = index(a), ib = index(b);

  std::printf("%s (%.0f) vs %s (%.0f)\n", a.c_str(), elo.at(a), b.c_str(), elo.at(b));
  for (auto fam : kAllFamilies) {
    FittedMatchModel model(fam, coeffs, teams);
    const auto rates = model.rates(ia, ib, elo.at(a), elo.at(b));
    Rng rng(1);
    int win = 0, draw = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const auto s = model.sample(rates, rng);
      win += s.goals_a > s.goals_b;
      draw += s.goals_a == s.goals_b;
    }
    std::printf("  %-12s goals %.2f : %.2f   win %.3f  draw %.3f  loss %.3f\n", std::string(to_string(fam)).c_str(),
                rates.lambda_a_given_b, rates.lambda_b_given_a, double(win) / n, double(draw) / n,
                double(n - win - draw) / n);
  }
}
