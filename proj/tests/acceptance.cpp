#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "wcsim/io.hpp"
#include "wcsim/report.hpp"

namespace fs = std::filesystem;
using namespace wcsim;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void verdict(const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(WCSIM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

StageTable read_stages(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw Error("missing " + p.string());
  return read_stage_csv(f);
}

std::map<std::string, std::array<double, 4>> read_scores(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw Error("missing " + p.string());
  std::map<std::string, std::array<double, 4>> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("model,", 0) == 0) continue;
    std::istringstream s(line);
    std::string model, cell;
    std::getline(s, model, ',');
    std::array<double, 4> v{};
    for (auto& x : v) {
      std::getline(s, cell, ',');
      x = std::stod(cell);
    }
    out[model] = v;
  }
  return out;
}

struct Preset2018 {
  Preset preset;
  std::vector<TeamId> participants;
  EloSnapshot elo;
  std::map<TeamId, TeamCoefficients> coeffs;

  Preset2018() {
    preset = load_preset(preset_path("2018", WCSIM_DATA_DIR));
    participants = preset.format.participants();
    elo = load_elo_snapshot(preset.elo);
    coeffs = fit_all_models(load_matches(preset.matches), participants, preset.filter, elo,
                            {ModelFamily::independent});
  }
};

// --- brute-force oracles --------------------------------------------------

double oracle_pmf(int y1, int y2, double l1, double l2, double l0) {
  double s = 0.0;
  for (int k = 0; k <= std::min(y1, y2); ++k)
    s += std::exp((y1 - k) * std::log(l1) + (y2 - k) * std::log(l2) + k * std::log(l0) -
                  std::lgamma(y1 - k + 1.0) - std::lgamma(y2 - k + 1.0) - std::lgamma(k + 1.0));
  return std::exp(-(l1 + l2 + l0)) * s;
}

StageProbabilities random_probabilities(std::mt19937_64& rng) {
  std::gamma_distribution<double> g(0.7, 1.0);
  StageProbabilities p{};
  double s = 0;
  for (auto& x : p) s += (x = g(rng));
  for (auto& x : p) x /= s;
  return p;
}

double oracle_score(int which, const StageProbabilities& p, int r) {
  double s = 0;
  switch (which) {
    case 0: {
      int best = 1;
      for (int j = 2; j <= 6; ++j)
        if (p[j - 1] > p[best - 1]) best = j;
      return std::abs(r - best);
    }
    case 1:
      for (int j = 1; j <= 6; ++j) s += p[j - 1] * std::abs(j - r);
      return s;
    case 2:
      for (int j = 1; j <= 6; ++j) s += (p[j - 1] - (j == r)) * (p[j - 1] - (j == r));
      return s;
    default: {
      double F = 0, O = 0;
      for (int i = 1; i <= 5; ++i) {
        F += p[i - 1];
        O += (i == r);
        s += (F - O) * (F - O);
      }
      return s / 5;
    }
  }
}

bool monotone(const std::vector<double>& t) {
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] < t[i - 1] - 1e-9 * (1.0 + std::abs(t[i - 1]))) return false;
  return true;
}

std::vector<Observation> synthetic_matches(std::size_t n, const std::array<double, 5>& c, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> elo(1500.0, 2100.0);
  std::vector<Observation> out;
  for (std::size_t i = 0; i < n; ++i) {
    Observation o;
    o.opponent_elo = elo(rng);
    const BivariateRates r{std::exp(c[0] + c[1] * o.opponent_elo), std::exp(c[2] + c[3] * o.opponent_elo),
                           std::exp(c[4])};
    std::tie(o.goals_for, o.goals_against) = bivpois_sample(r, rng);
    out.push_back(o);
  }
  return out;
}

// --- criteria -------------------------------------------------------------

void property_suite(const Preset2018& world) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20180614);
  std::string why;

  double worst_norm = 0;
  std::uniform_real_distribution<double> lam(0.05, 3.0), shared(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const BivariateRates r{lam(rng), lam(rng), shared(rng)};
    double s = 0;
    for (int a = 0; a <= 60; ++a)
      for (int b = 0; b <= 60; ++b) s += bivpois_pmf(a, b, r);
    worst_norm = std::max(worst_norm, std::abs(s - 1.0));
  }
  double worst_oracle = 0;
  for (int i = 0; i < 20; ++i) {
    const BivariateRates r{lam(rng), lam(rng), shared(rng) + 0.01};
    for (int a = 0; a <= 8; ++a)
      for (int b = 0; b <= 8; ++b)
        worst_oracle = std::max(worst_oracle, std::abs(bivpois_pmf(a, b, r) - oracle_pmf(a, b, r.lambda1, r.lambda2, r.lambda0)));
  }
  const bool pmf_ok = worst_norm < 1e-9 && worst_oracle < 1e-12;
  if (!pmf_ok) why += fmt(" pmf |sum-1|=%.2e oracle=%.2e;", worst_norm, worst_oracle);

  const BivariateRates cr{1.3, 0.9, 0.35};
  double s1 = 0, s2 = 0, s12 = 0;
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) {
    const auto [a, b] = bivpois_sample(cr, rng);
    s1 += a;
    s2 += b;
    s12 += double(a) * b;
  }
  const double cov = s12 / draws - (s1 / draws) * (s2 / draws);
  const bool cov_ok = std::abs(cov - cr.lambda0) < 0.01;
  if (!cov_ok) why += fmt(" sampler cov %.4f vs %.2f;", cov, cr.lambda0);

  bool em_ok = true;
  int em_fixtures = 0;
  for (unsigned seed = 1; seed <= 25; ++seed) {
    const auto obs = synthetic_matches(8 + seed, {0.9, -0.0004, -0.6, 0.0003, std::log(0.2)}, seed);
    try {
      em_ok = em_ok && monotone(fit_bivpois_em(obs).loglik_trace);
      em_ok = em_ok && monotone(fit_inflated_em(obs, true).base.loglik_trace);
      em_fixtures += 2;
    } catch (const FitError&) {
    }
  }
  const auto big = synthetic_matches(3000, {1.6, -0.0007, -1.9, 0.0009, std::log(0.25)}, 42);
  em_ok = em_ok && monotone(fit_bivpois_em(big).loglik_trace);
  if (!em_ok) why += " EM log-likelihood decreased;";

  std::uniform_real_distribution<double> ex(1500.0, 2100.0);
  Eigen::MatrixXd x(10000, 1);
  Eigen::VectorXd y(10000);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = ex(rng);
    y[i] = std::poisson_distribution<int>(std::exp(0.5 - 0.001 * x(i, 0)))(rng);
  }
  const auto glm = fit_poisson(x, y);
  const double grad = poisson_gradient(x, y, glm.coefficients).norm();
  const bool glm_ok = grad < 1e-8 && std::abs(glm.coefficients[0] - 0.5) < 3 * glm.std_errors[0] &&
                      std::abs(glm.coefficients[1] + 0.001) < 3 * glm.std_errors[1];
  if (!glm_ok) why += fmt(" GLM gradient %.2e or recovery outside 3 SE;", grad);

  double worst_score = 0;
  std::uniform_int_distribution<int> res(1, 6);
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_probabilities(rng);
    const int r = res(rng);
    worst_score = std::max({worst_score, std::abs(error_e1(p, r) - oracle_score(0, p, r)),
                            std::abs(error_e2(p, r) - oracle_score(1, p, r)),
                            std::abs(error_brier(p, r) - oracle_score(2, p, r)),
                            std::abs(error_rps(p, r) - oracle_score(3, p, r))});
  }
  const bool score_ok = worst_score <= 1e-12;
  if (!score_ok) why += fmt(" score oracle gap %.2e;", worst_score);

  FittedMatchModel model(ModelFamily::independent, world.coeffs, world.participants);
  EloTable table(world.participants, world.elo, world.preset.k_factor);
  MonteCarloOptions opts;
  opts.replications = 100000;
  opts.seed = 7;
  opts.threads = 0;
  const auto d = monte_carlo(world.preset.format, model, table, opts);
  bool dist_ok = true;
  std::array<double, kOutcomes> per_code{};
  for (std::size_t t = 0; t < d.size(); ++t) {
    double s = 0;
    for (int c = 1; c <= kOutcomes; ++c) {
      s += d.p(t, c);
      per_code[static_cast<std::size_t>(c - 1)] += d.p(t, c);
      if (c > 1 && d.reach(t, c) < d.reach(t, c - 1)) dist_ok = false;
    }
    if (std::abs(s - 1.0) > 1e-12) dist_ok = false;
  }
  const std::array<double, kOutcomes> expected{1, 1, 2, 4, 8, 16};
  for (std::size_t c = 0; c < kOutcomes; ++c)
    if (std::abs(per_code[c] - expected[c]) > 1e-9) dist_ok = false;
  if (!dist_ok) why += " stage distribution invariants violated;";

  const double secs = seconds_since(t0);
  const bool ok = pmf_ok && cov_ok && em_ok && glm_ok && score_ok && dist_ok && secs < 300.0;
  verdict("property suite", ok,
          why.empty() ? fmt("pmf |sum-1| %.1e, sampler cov %.4f (lambda0 0.35), ", worst_norm, cov) +
                            std::to_string(em_fixtures + 1) + " EM fixtures monotone, " +
                            fmt("GLM gradient %.1e, score gap %.1e, ", grad, worst_score) +
                            fmt("n=1e5 invariants hold, %.1f s", secs)
                      : why + fmt(" (%.1f s)", secs));
}

void structure(const Preset2018& world) {
  FittedMatchModel model(ModelFamily::independent, world.coeffs, world.participants);
  EloTable table(world.participants, world.elo, world.preset.k_factor);
  bool shape_ok = true;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    Rng rng = stream_for(99, i);
    const auto o = simulate_tournament(world.preset.format, model, table, rng);
    std::array<int, kOutcomes> n{};
    for (int c : o.codes) ++n[static_cast<std::size_t>(c - 1)];
    if (n != std::array<int, kOutcomes>{1, 1, 2, 4, 8, 16} || o.matches_played != 64) shape_ok = false;
  }

  MonteCarloOptions opts;
  opts.replications = 100000;
  opts.seed = 2018;
  RunInfo info;
  info.model = "independent";
  info.seed = opts.seed;
  info.replications = opts.replications;
  info.preset = world.preset.id;
  opts.threads = 1;
  const auto one = stage_csv(monte_carlo(world.preset.format, model, table, opts), info);
  opts.threads = 8;
  const auto eight = stage_csv(monte_carlo(world.preset.format, model, table, opts), info);
  verdict("simulator structure", shape_ok && one == eight,
          std::string(shape_ok ? "codes {1,2,3x2,4x4,5x8,6x16} and 64 matches in 1000 replications"
                               : "outcome multiset or match count wrong") +
              (one == eight ? "; n=1e5 CSV identical under 1 and 8 workers" : "; CSV differs between 1 and 8 workers"));
}

void elo_arithmetic(const Preset2018& world) {
  EloSnapshot s;
  s.ratings = {{"A", 1850.0}, {"B", 1850.0}};
  auto t = [&] { return EloTable({"A", "B"}, s, 60.0); };
  auto a = t(), b = t(), c = t();
  const double draw = a.update("A", "B", {0, 0}).first;
  const double one_nil = b.update("A", "B", {1, 0}).first;
  const double four_one = c.update("A", "B", {4, 1}).first;

  FittedMatchModel model(ModelFamily::independent, world.coeffs, world.participants);
  EloTable table(world.participants, world.elo, world.preset.k_factor);
  bool zero_sum = true;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    Rng rng = stream_for(5, i);
    if (simulate_tournament(world.preset.format, model, table, rng).final_elo.total() != table.total())
      zero_sum = false;
  }
  const bool ok = draw == 0.0 && one_nil == 30.0 && four_one == 52.5 && zero_sum;
  verdict("Elo arithmetic", ok,
          fmt("draw %+g, 1:0 %+g, 4:1 %+g", draw, one_nil, four_one) +
              (zero_sum ? ", rating total exact over 1000 replications" : ", rating total drifted"));
}

void performance(const fs::path& dir) {
  const auto t0 = Clock::now();
  const int rc = cli("simulate --preset 2018 --model independent --n 100000 --seed 1 --threads 8 --out " +
                     (dir / "perf").string());
  const double secs = seconds_since(t0);
  verdict("performance", rc == 0 && secs < 60.0,
          fmt("1e5 independent replications with 8 workers in %.1f s on %g hardware threads (limit 60 s)", secs,
              std::thread::hardware_concurrency()));
}

void qualitative(const fs::path& dir) {
  std::string why;
  bool ok = true;
  const auto out18 = dir / "q2018";
  if (cli("simulate --preset 2018 --model nested --n 100000 --seed 2018 --out " + out18.string()) != 0) {
    verdict("qualitative reproduction", false, "2018 simulation failed");
    return;
  }
  const auto t = read_stages(out18 / "stages_nested.csv");
  const std::string first = t.dist.teams[0], second = t.dist.teams[1];
  const double germany = 100.0 * t.dist.p(t.dist.index_of("Germany"), 1);
  const bool order_ok = first == "Germany" && second == "Brazil";
  const bool level_ok = std::abs(germany - 30.5) <= 5.0;
  ok = order_ok && level_ok;
  why += "2018 nested order " + first + ", " + second + (order_ok ? " (ok)" : " (expected Germany, Brazil)");
  why += fmt("; Germany champion %.2f%% (target 30.5 +/- 5)", germany) + (level_ok ? " (ok)" : " (outside)");

  const auto out14 = dir / "q2014";
  if (cli("validate --preset 2014 --n 100000 --seed 2014 --out " + out14.string()) != 0) {
    verdict("qualitative reproduction", false, why + "; 2014 validation failed");
    return;
  }
  const auto scores = read_scores(out14 / "scores.csv");
  const char* names[] = {"E1", "E2", "Brier", "RPS"};
  for (int k : {0, 2, 3}) {
    const double nested = scores.at("nested")[static_cast<std::size_t>(k)];
    bool best = true;
    for (const auto& [m, v] : scores)
      if (m != "nested" && v[static_cast<std::size_t>(k)] < nested) best = false;
    ok = ok && best;
    why += std::string("; 2014 ") + names[k] + fmt(" nested %.3f", nested) + (best ? " best" : " not best");
  }
  verdict("qualitative reproduction", ok, why);
}

void sensitivity(const fs::path& dir) {
  const std::string base = "simulate --preset 2018 --model nested --n 100000 --seed 2018 --out ";
  if (cli(base + (dir / "upd").string()) != 0 || cli(base + (dir / "fix").string() + " --no-elo-update") != 0) {
    verdict("Elo update sensitivity", false, "simulation failed");
    return;
  }
  const auto on = read_stages(dir / "upd" / "stages_nested.csv");
  const auto off = read_stages(dir / "fix" / "stages_nested.csv");
  double biggest = 0;
  std::string who;
  for (const char* team : {"Brazil", "Germany", "Spain", "Argentina", "France"}) {
    const double d = 100.0 * std::abs(on.dist.p(on.dist.index_of(team), 1) - off.dist.p(off.dist.index_of(team), 1));
    if (d > biggest) biggest = d, who = team;
  }
  verdict("Elo update sensitivity", biggest > 1.0,
          "largest champion-probability shift among the Elo top five: " + who + fmt(" %.2f pp (need > 1)", biggest));
}

}  // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / ("wcsim_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  try {
    const Preset2018 world;
    property_suite(world);
    structure(world);
    elo_arithmetic(world);
  } catch (const std::exception& e) {
    verdict("library criteria", false, e.what());
  }
  try {
    performance(dir);
    qualitative(dir);
    sensitivity(dir);
  } catch (const std::exception& e) {
    verdict("CLI criteria", false, e.what());
  }
  fs::remove_all(dir);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
