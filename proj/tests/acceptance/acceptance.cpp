// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when everything passes).
//
//   acceptance [baseball.csv]
//
// With a baseball CSV the Table-1 style reproduction is checked; without it
// the synthetic-season substitute runs instead.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "commands.hpp"
#include "ebmix/baseball.hpp"
#include "ebmix/calibration.hpp"
#include "ebmix/data_io.hpp"
#include "ebmix/harness.hpp"
#include "ebmix/inference.hpp"
#include "ebmix/mixture.hpp"
#include "ebmix/model_document.hpp"
#include "ebmix/numeric.hpp"

namespace fs = std::filesystem;
using namespace ebmix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("%s criterion %d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Scratch {
 public:
  Scratch() : path_(fs::temp_directory_path() / ("ebmix-acceptance-" + std::to_string(::getpid()))) {
    fs::create_directories(path_);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name, std::ios::binary) << text;
    return (path_ / name).string();
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o;
  std::ostringstream e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str();
  if (code != 0) std::fprintf(stderr, "%s", e.str().c_str());
  return code;
}

std::string z_csv(const std::vector<double>& z) {
  std::ostringstream s;
  s << "id,z\n";
  for (std::size_t i = 0; i < z.size(); ++i) s << 'c' << i << ',' << format_number(z[i]) << '\n';
  return s.str();
}

// 950 nulls and 50 effects from one fixed Unif(2, 4) draw; noise from `seed`.
std::vector<double> fdr_scenario_z(std::uint64_t seed) {
  std::mt19937_64 fixed(20240101);
  std::uniform_real_distribution<double> u(2.0, 4.0);
  std::vector<double> effects(50);
  for (auto& d : effects) d = u(fixed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> z(1000);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (i < 50 ? effects[i] : 0.0) + nd(rng);
  return z;
}

double mean_of(const std::vector<EffectStudyRow>& rows, const std::string& method, bool large_k_only) {
  double s = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (r.method != method || (large_k_only && r.k < 50)) continue;
    s += r.rel_error;
    ++n;
  }
  return s / n;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string baseball_csv = argc > 1 ? argv[1] : "";
  Scratch scratch;

  // Criteria 1 and 2 share one study run.
  EffectStudyResult effect;
  bool effect_ok = true;
  std::string effect_error;
  try {
    EffectStudyConfig cfg;
    cfg.reps = 25;
    cfg.seed = 1;
    cfg.mixtures = {MixtureMethod{10, 50.0, 3}, MixtureMethod{3, 50.0, 3}, MixtureMethod{10, 200.0, 3}};
    cfg.baselines = {};
    effect = run_effect_study(cfg);
  } catch (const std::exception& e) {
    effect_ok = false;
    effect_error = e.what();
  }

  report(1, "effect-size study (reps=25, J=10, P=50)", [&] {
    if (!effect_ok) return Outcome{false, effect_error};
    for (const auto& s : effect.summary) {
      if (s.method != "mixture_J10_P50") continue;
      const bool ok = s.mean_rel_error <= 1.30 && s.median_rel_error <= 1.15;
      return Outcome{ok, fmt("mean rel error %.4f (<= 1.30), median %.4f (<= 1.15); published 1.10 / 1.04",
                             s.mean_rel_error, s.median_rel_error)};
    }
    return Outcome{false, "mixture method missing from summary"};
  });

  report(2, "parameter insensitivity (K in {50, 500})", [&] {
    if (!effect_ok) return Outcome{false, effect_error};
    const double base = mean_of(effect.rows, "mixture_J10_P50", true);
    const double j3 = mean_of(effect.rows, "mixture_J3_P50", true);
    const double p200 = mean_of(effect.rows, "mixture_J10_P200", true);
    const double spread = std::max({base, j3, p200}) - std::min({base, j3, p200});
    return Outcome{spread <= 0.15,
                   fmt("mean rel error J10/P50 %.4f, J3/P50 %.4f, J10/P200 %.4f; max change %.4f (<= 0.15)", base,
                       j3, p200, spread)};
  });

  report(3, "fdr study (reps=50, theoretical null, J=3, P=50)", [&] {
    FdrStudyConfig cfg;
    cfg.reps = 50;
    cfg.seed = 1;
    cfg.null_modes = {NullMode::Theoretical};
    const auto r = run_fdr_study(cfg);
    double worst = 0.0;
    for (const auto& c : r.fdr) {
      if (c.method == "truth" || c.z < 2.0 - 1e-9 || c.z > 4.0 + 1e-9) continue;
      worst = std::max(worst, std::abs(c.mean - c.truth));
    }
    double sd = NAN;
    int missing = -1;
    for (const auto& t : r.thresholds) {
      if (t.method != "truth" && t.kind == "fdr" && std::abs(t.q - 0.1) < 1e-12) {
        sd = t.sd;
        missing = t.missing;
      }
    }
    const bool ok = worst <= 0.05 && sd <= 0.25 && missing == 0;
    return Outcome{ok, fmt("max |E fdr - fdr_true| on [2,4] = %.4f (<= 0.05); Sd t(0.1) = %.4f (<= 0.25); "
                           "reps without a region %d",
                           worst, sd, missing)};
  });

  report(4, "Tweedie equivalence (50 fitted models x 201 points)", [&] {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int m = 0; m < 50; ++m) {
      std::vector<Observation> data;
      const double spread = 1.0 + 4.0 * u(rng);
      for (int i = 0; i < 300; ++i) {
        const double d = u(rng) < 0.7 ? 0.0 : spread * nd(rng);
        data.push_back(Observation::normal(d + nd(rng)));
      }
      FitConfig cfg;
      cfg.components = 2 + m % 4;
      cfg.penalty = 30.0;
      cfg.null_mode = m % 2 ? NullMode::Empirical : NullMode::Theoretical;
      cfg.restarts = 1;
      cfg.seed = static_cast<std::uint64_t>(m);
      const auto model = em_fit(data, cfg);
      const auto lf = mixture_log_marginal(model);
      const auto lf0 = null_log_density();
      for (int i = 0; i <= 200; ++i) {
        const double z = -6.0 + 0.06 * i;
        const auto t = tweedie_continuous(lf, lf0, z);
        const auto s = posterior_summary(Observation::normal(z), model, explicit_null(model));
        worst = std::max({worst, std::abs(t.mean - s.effect_mean), std::abs(t.variance - s.effect_var)});
      }
    }
    return Outcome{worst <= 1e-9, fmt("max |difference| %.3g (<= 1e-9)", worst)};
  });

  report(5, "conjugacy and normalization oracles", [&] {
    using boost::math::quadrature::gauss_kronrod;
    double pmf_err = 0.0;
    double uniform_err = 0.0;
    for (int n = 1; n <= 200; ++n) {
      for (const BetaComponent prior : {BetaComponent{0.4, 0.9}, BetaComponent{2, 2}, BetaComponent{302, 884}}) {
        double total = 0.0;
        for (int h = 0; h <= n; ++h) total += std::exp(component_log_marginal(Observation::binomial(h, n), prior));
        pmf_err = std::max(pmf_err, std::abs(total - 1.0));
      }
      for (int h = 0; h <= n; ++h) {
        const double p = std::exp(component_log_marginal(Observation::binomial(h, n), BetaComponent{1, 1}));
        uniform_err = std::max(uniform_err, std::abs(p - 1.0 / (n + 1.0)));
      }
    }
    double post_err = 0.0;
    for (const NormalComponent prior : {NormalComponent{0.5, 2}, NormalComponent{-1, 0.3}}) {
      for (double z : {-2.0, 0.4, 3.0}) {
        auto joint = [&](double d) { return std::exp(normal_log_pdf(z, d, 1.0) + normal_log_pdf(d, prior.mean, prior.variance)); };
        const double lo = prior.mean - 14 * std::sqrt(prior.variance);
        const double hi = prior.mean + 14 * std::sqrt(prior.variance);
        const double mass = gauss_kronrod<double, 61>::integrate(joint, lo, hi, 15, 1e-13);
        const double m1 = gauss_kronrod<double, 61>::integrate([&](double d) { return d * joint(d); }, lo, hi, 15, 1e-13);
        post_err = std::max(post_err, std::abs(component_posterior(Observation::normal(z), prior).mean - m1 / mass));
      }
    }
    for (const BetaComponent prior : {BetaComponent{2, 2}, BetaComponent{30, 80}}) {
      for (auto [h, n] : {std::pair{1, 3}, std::pair{12, 40}}) {
        auto joint = [&](double d) {
          return std::exp((prior.alpha + h - 1) * std::log(d) + (prior.beta + n - h - 1) * std::log1p(-d));
        };
        const double mass = gauss_kronrod<double, 61>::integrate(joint, 0.0, 1.0, 15, 1e-13);
        const double m1 = gauss_kronrod<double, 61>::integrate([&](double d) { return d * joint(d); }, 0.0, 1.0, 15, 1e-13);
        post_err = std::max(post_err, std::abs(component_posterior(Observation::binomial(h, n), prior).mean - m1 / mass));
      }
    }
    const bool ok = pmf_err <= 1e-10 && uniform_err <= 1e-12 && post_err <= 1e-6;
    return Outcome{ok, fmt("pmf sum error %.3g (<= 1e-10), uniform 1/(N+1) error %.3g (<= 1e-12), posterior "
                           "mean vs quadrature %.3g (<= 1e-6)",
                           pmf_err, uniform_err, post_err)};
  });

  report(6, "EM contract (monotonicity, null pinning, determinism)", [&] {
    double worst_drop = 0.0;
    int fits = 0;
    bool pinned = true;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      std::vector<Observation> data;
      for (double z : fdr_scenario_z(seed)) data.push_back(Observation::normal(z));
      for (NullMode mode : {NullMode::Theoretical, NullMode::Empirical, NullMode::None}) {
        FitConfig cfg;
        cfg.null_mode = mode;
        cfg.components = 3 + static_cast<int>(seed % 3);
        cfg.penalty = mode == NullMode::None ? 0.0 : 50.0 * (seed + 1);
        cfg.seed = seed;
        std::map<int, double> last;
        const auto m = em_fit(data, cfg, [&](int r, int, double pll) {
          if (last.count(r)) worst_drop = std::max(worst_drop, last[r] - pll);
          last[r] = pll;
        });
        ++fits;
        if (mode == NullMode::Theoretical) {
          const auto& c = std::get<NormalComponent>(m.components[0]);
          pinned = pinned && std::signbit(c.mean) == false && c.mean == 0.0 && c.variance == 0.0;
        }
      }
    }
    std::mt19937_64 rng(6);
    std::vector<Observation> bin;
    for (int i = 0; i < 300; ++i) {
      const double p = i % 3 ? 0.25 : 0.6;
      const int n = 20 + i % 50;
      bin.push_back(Observation::binomial(std::binomial_distribution<int>(n, p)(rng), n));
    }
    FitConfig bcfg;
    bcfg.components = 2;
    bcfg.null_mode = NullMode::None;
    bcfg.penalty = 0.0;
    std::map<int, double> last;
    em_fit(bin, bcfg, [&](int r, int, double pll) {
      if (last.count(r)) worst_drop = std::max(worst_drop, last[r] - pll);
      last[r] = pll;
    });
    ++fits;

    const auto in = scratch.write("c6.csv", z_csv(fdr_scenario_z(66)));
    const auto a = scratch.file("c6a.json");
    const auto b = scratch.file("c6b.json");
    const std::vector<std::string> base{"fit", "--input", in, "--null", "empirical", "--seed", "17"};
    auto with_out = [&](const std::string& p) {
      auto v = base;
      v.insert(v.end(), {"--output", p});
      return v;
    };
    const bool ran = run_cli(with_out(a)) == 0 && run_cli(with_out(b)) == 0;
    const bool identical = ran && slurp(a) == slurp(b) && !slurp(a).empty();
    const bool ok = worst_drop <= 1e-9 && pinned && identical;
    return Outcome{ok, fmt("%d fits, worst penalized-loglik drop %.3g (<= 1e-9); null pinned: %s; repeat fit "
                           "byte-identical: %s",
                           fits, std::max(0.0, worst_drop), pinned ? "yes" : "no", identical ? "yes" : "no")};
  });

  if (!baseball_csv.empty()) {
    report(7, "baseball (supplied data)", [&] {
      std::ifstream in(baseball_csv);
      if (!in) return Outcome{false, "cannot open " + baseball_csv};
      const auto records = read_baseball_csv(in);
      const auto r = run_baseball(records, BaseballConfig{});
      double overall = NAN;
      double nonpitchers = NAN;
      for (const auto& row : r.rows) {
        if (row.method != "binomial_mixture") continue;
        if (row.group == "overall") overall = row.normalized_tse;
        if (row.group == "nonpitchers") nonpitchers = row.normalized_tse;
      }
      const bool ok = std::abs(overall - 0.588) <= 0.10 && std::abs(nonpitchers - 0.314) <= 0.08;
      return Outcome{ok, fmt("normalized TSE overall %.4f (0.588 +/- 0.10), nonpitchers %.4f (0.314 +/- 0.08)",
                             overall, nonpitchers)};
    });
  } else {
    report(7, "baseball (synthetic substitute, 20 seasons)", [&] {
      int wins = 0;
      int mean_ok = 0;
      double worst_mean = 0.0;
      const double target = 302.0 / 1186.0;
      for (std::uint64_t season = 1; season <= 20; ++season) {
        const auto s = synthetic_season(season);
        BaseballConfig cfg;
        cfg.seed = season;
        const auto r = run_baseball(s.records, cfg);
        double naive = NAN;
        double mix = NAN;
        for (const auto& row : r.rows) {
          if (row.group != "overall") continue;
          if (row.method == "naive") naive = row.tse;
          if (row.method == "binomial_mixture") mix = row.tse;
        }
        wins += mix < naive;
        const double dev = std::abs(beta_mixture_mean(r.models[0]) - target);
        worst_mean = std::max(worst_mean, dev);
        mean_ok += dev <= 0.01;
      }
      const bool ok = wins >= 19 && mean_ok == 20;
      return Outcome{ok, fmt("mixture TSE below naive in %d/20 seasons (>= 19); prior mean within 0.01 of "
                             "302/1186 in %d/20 (worst deviation %.4f)",
                             wins, mean_ok, worst_mean)};
    });
  }

  report(8, "BIC selection (bic --J-range 1..6, 20 seeds)", [&] {
    int hits = 0;
    std::string picks;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed + 800);
      std::normal_distribution<double> nd;
      std::vector<double> z(2000);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = (i % 2 ? 3.0 : -3.0) + nd(rng);
      const auto in = scratch.write("c8.csv", z_csv(z));
      std::string out;
      if (run_cli({"bic", "--input", in, "--J-range", "1..6", "--seed", std::to_string(seed)}, &out) != 0) continue;
      const auto pos = out.find("selected_J,");
      const int j = std::stoi(out.substr(pos + 11));
      hits += j == 2;
      picks += std::to_string(j);
    }
    return Outcome{hits >= 15, fmt("selected J=2 in %d/20 seeds (>= 15); picks %s", hits, picks.c_str())};
  });

  report(9, "calibration smoke (default plan, empirical null, 20 seeds)", [&] {
    const auto plan = default_plan(1000);
    const double mid = 0.5 * (plan.candidates.front() + plan.candidates.back());
    int upper = 0;
    int members = 0;
    int completed = 0;
    std::string first_out;
    std::string first_table;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto in = scratch.write("c9_" + std::to_string(seed) + ".csv", z_csv(fdr_scenario_z(seed + 900)));
      const auto table = scratch.file("c9_" + std::to_string(seed) + "_scores.csv");
      std::string out;
      if (run_cli({"calibrate", "--input", in, "--null", "empirical", "--seed", std::to_string(seed), "--output", table},
              &out) != 0)
        continue;
      ++completed;
      if (seed == 0) {
        first_out = out;
        first_table = slurp(table);
      }
      const auto pos = out.find("chosen_P,");
      const double p = std::stod(out.substr(pos + 9));
      const bool member = std::any_of(plan.candidates.begin(), plan.candidates.end(),
                                      [&](double c) { return format_number(c) == format_number(p); });
      members += member;
      upper += p >= mid;
    }
    std::string again;
    const auto in0 = scratch.file("c9_0.csv");
    const auto table0 = scratch.file("c9_0_again.csv");
    const bool deterministic =
        run_cli({"calibrate", "--input", in0, "--null", "empirical", "--seed", "0", "--output", table0}, &again) == 0 &&
        again == first_out && slurp(table0) == first_table;
    const bool ok = completed == 20 && members == 20 && deterministic && upper >= 12;
    return Outcome{ok, fmt("completed %d/20, chosen P in candidate list %d/20, deterministic: %s, upper half "
                           "(P >= %.0f) in %d/20 (>= 12)",
                           completed, members, deterministic ? "yes" : "no", mid, upper)};
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures;
}
