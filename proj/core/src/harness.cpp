#include "ebmix/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "ebmix/errors.hpp"
#include "ebmix/inference.hpp"
#include "ebmix/numeric.hpp"
#include "ebmix/random.hpp"

namespace ebmix {

namespace {

constexpr std::uint64_t kNoiseTag = 0x4e4f495345ULL;
constexpr std::uint64_t kPositionTag = 0x504f53ULL;
constexpr std::uint64_t kOffsetTag = 0x554e4946ULL;
constexpr std::uint64_t kAlternativeTag = 0x414c54ULL;
constexpr std::uint64_t kFitTag = 0x464954ULL;

std::vector<double> unit_noise(std::uint64_t seed, int rep, std::size_t n) {
  Rng rng = make_rng(seed, {static_cast<std::uint64_t>(rep), kNoiseTag});
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<double> out(n);
  for (double& e : out) e = unit(rng);
  return out;
}

std::vector<Observation> as_observations(std::span<const double> z) {
  std::vector<Observation> out;
  out.reserve(z.size());
  for (double v : z) out.push_back(Observation::normal(v));
  return out;
}

std::vector<double> posterior_means(const MixtureModel& model, std::span<const Observation> data) {
  const NullGrouping none;
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& obs : data) out.push_back(posterior_summary(obs, model, none).effect_mean);
  return out;
}

double squared_error(std::span<const double> truth, std::span<const double> estimate) {
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - estimate[i];
    acc += d * d;
  }
  return acc;
}

std::vector<double> z_grid(double lo, double hi, double step) {
  const auto count = static_cast<int>(std::llround((hi - lo) / step));
  std::vector<double> grid;
  for (int k = 0; k <= count; ++k) grid.push_back(lo + step * k);
  return grid;
}

// Closed-form slab term for a Unif(a, b) prior (unit width) and z ~ N(delta, 1):
// log of the marginal mass and the conditional posterior mean.
struct SlabTerm {
  double log_mass;
  double mean;
};

SlabTerm uniform_slab(double z, double a, double b) {
  const double lo = a - z;
  const double hi = b - z;
  const double log_interval = normal_log_interval(lo, hi);
  const double ratio = std::exp(-kLogSqrt2Pi - 0.5 * lo * lo - log_interval) -
                       std::exp(-kLogSqrt2Pi - 0.5 * hi * hi - log_interval);
  return {log_interval - std::log(b - a), std::clamp(z + ratio, a, b)};
}

}  // namespace

void ScenarioSpec::validate() const {
  if (k > n) throw ContractViolation("scenario needs 0 <= K <= N");
  if (reps < 1) throw ContractViolation("scenario needs reps >= 1");
  if (n == 0) throw ContractViolation("scenario needs N >= 1");
}

std::size_t ScenarioSpec::negative_count() const {
  if (kind != Kind::EffectTwoSided) return 0;
  return static_cast<std::size_t>(std::llround(static_cast<double>(k) / 3.0));
}

SimulatedData generate_effect_scenario(const ScenarioSpec& spec, int rep) {
  spec.validate();
  if (spec.kind == ScenarioSpec::Kind::FdrScenario)
    throw ContractViolation("generate_effect_scenario needs an effect-size scenario");
  SimulatedData out;
  out.delta.assign(spec.n, 0.0);
  const auto noise = unit_noise(spec.seed, rep, spec.n);

  std::vector<std::size_t> order(spec.n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng pos_rng = make_rng(spec.seed, {static_cast<std::uint64_t>(rep), kPositionTag});
  std::shuffle(order.begin(), order.end(), pos_rng);

  Rng off_rng = make_rng(spec.seed, {static_cast<std::uint64_t>(rep), kOffsetTag});
  std::uniform_real_distribution<double> offset(-0.5, 0.5);
  const std::size_t negatives = spec.negative_count();
  for (std::size_t m = 0; m < spec.k; ++m) {
    const double centre = m < negatives ? -spec.mu : spec.mu;
    out.delta[order[m]] = centre + offset(off_rng);
  }
  out.z.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) out.z[i] = out.delta[i] + noise[i];
  return out;
}

std::string BaselineEstimator::name() const {
  switch (kind) {
    case Kind::Naive: return "naive";
    case Kind::UniversalSoft: return "universal_soft";
    case Kind::UniversalHard: return "universal_hard";
    case Kind::FdrThreshold: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "fdr_threshold_q%g", q);
      return buf;
    }
    case Kind::SureShrink: return "sure_shrink";
    case Kind::JamesSteinPositivePart: return "james_stein";
    case Kind::GrandMean: return "grand_mean";
  }
  return "unknown";
}

double universal_threshold(std::size_t n) { return std::sqrt(2.0 * std::log(static_cast<double>(n))); }

std::vector<double> soft_threshold(std::span<const double> z, double t) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double m = std::max(0.0, std::abs(z[i]) - t);
    out[i] = std::copysign(m, z[i]);
    if (m == 0.0) out[i] = 0.0;
  }
  return out;
}

std::vector<double> hard_threshold(std::span<const double> z, double t) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::abs(z[i]) >= t ? z[i] : 0.0;
  return out;
}

double sure_threshold(std::span<const double> z) {
  const std::size_t n = z.size();
  if (n == 0) throw ContractViolation("SURE threshold of empty data");
  const double cap = universal_threshold(std::max<std::size_t>(n, 2));
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = std::abs(z[i]);
  std::sort(a.begin(), a.end());
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + a[i] * a[i];
  auto sure = [&](double t) {
    const auto c = static_cast<std::size_t>(std::upper_bound(a.begin(), a.end(), t) - a.begin());
    return static_cast<double>(n) - 2.0 * static_cast<double>(c) + prefix[c] +
           static_cast<double>(n - c) * t * t;
  };
  double best_t = 0.0;
  double best = sure(0.0);
  auto consider = [&](double t) {
    const double s = sure(t);
    if (s < best) {
      best = s;
      best_t = t;
    }
  };
  for (double t : a) {
    if (t > cap) break;
    consider(t);
  }
  consider(cap);
  return best_t;
}

double bh_threshold(std::span<const double> z, double q) {
  const std::size_t n = z.size();
  std::vector<double> a(z.begin(), z.end());
  for (double& v : a) v = std::abs(v);
  std::sort(a.begin(), a.end(), std::greater<>());  // ascending p-values
  std::size_t rejected = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double p = std::erfc(a[k - 1] / std::sqrt(2.0));
    if (p <= q * static_cast<double>(k) / static_cast<double>(n)) rejected = k;
  }
  if (rejected == 0) return std::numeric_limits<double>::infinity();
  return a[rejected - 1];
}

std::vector<double> james_stein(std::span<const double> z, bool centred, double variance) {
  const std::size_t n = z.size();
  const double centre = centred ? std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(n) : 0.0;
  double ss = 0.0;
  for (double v : z) ss += (v - centre) * (v - centre);
  const double dof = static_cast<double>(n) - (centred ? 3.0 : 2.0);
  const double factor = ss > 0.0 ? std::max(0.0, 1.0 - dof * variance / ss) : 0.0;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = centre + factor * (z[i] - centre);
  return out;
}

std::vector<double> baseline_estimate(const BaselineEstimator& estimator, std::span<const double> z) {
  for (double v : z) {
    if (!std::isfinite(v)) throw ContractViolation("baseline estimators need finite z");
  }
  using Kind = BaselineEstimator::Kind;
  switch (estimator.kind) {
    case Kind::Naive: return {z.begin(), z.end()};
    case Kind::UniversalSoft: return soft_threshold(z, universal_threshold(z.size()));
    case Kind::UniversalHard: return hard_threshold(z, universal_threshold(z.size()));
    case Kind::FdrThreshold: return hard_threshold(z, bh_threshold(z, estimator.q));
    case Kind::SureShrink: return soft_threshold(z, sure_threshold(z));
    case Kind::JamesSteinPositivePart: return james_stein(z, false);
    case Kind::GrandMean: {
      const double m = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
      return std::vector<double>(z.size(), m);
    }
  }
  throw ContractViolation("unknown baseline estimator");
}

double bayes_oracle(double z, const ScenarioSpec& spec) {
  if (spec.k == 0) return 0.0;
  const double n = static_cast<double>(spec.n);
  const double neg = static_cast<double>(spec.negative_count());
  const double pos = static_cast<double>(spec.k) - neg;
  std::vector<double> logs;
  std::vector<double> means;
  if (spec.k < spec.n) {
    logs.push_back(std::log1p(-static_cast<double>(spec.k) / n) + normal_log_pdf(z, 0.0, 1.0));
    means.push_back(0.0);
  }
  if (pos > 0) {
    const auto s = uniform_slab(z, spec.mu - 0.5, spec.mu + 0.5);
    logs.push_back(std::log(pos / n) + s.log_mass);
    means.push_back(s.mean);
  }
  if (neg > 0) {
    const auto s = uniform_slab(z, -spec.mu - 0.5, -spec.mu + 0.5);
    logs.push_back(std::log(neg / n) + s.log_mass);
    means.push_back(s.mean);
  }
  const double lse = log_sum_exp(logs);
  double out = 0.0;
  for (std::size_t c = 0; c < logs.size(); ++c) out += std::exp(logs[c] - lse) * means[c];
  return out;
}

std::vector<double> bayes_oracle(std::span<const double> z, const ScenarioSpec& spec) {
  std::vector<double> out;
  out.reserve(z.size());
  for (double v : z) out.push_back(bayes_oracle(v, spec));
  return out;
}

std::string MixtureMethod::name() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "mixture_J%d_P%g", components, penalty);
  return buf;
}

std::vector<BaselineEstimator> default_baselines() {
  using Kind = BaselineEstimator::Kind;
  return {{Kind::Naive, 0.1},         {Kind::UniversalSoft, 0.1},
          {Kind::UniversalHard, 0.1}, {Kind::FdrThreshold, 0.1},
          {Kind::SureShrink, 0.1},    {Kind::JamesSteinPositivePart, 0.1}};
}

EffectStudyResult run_effect_study(const EffectStudyConfig& config) {
  if (config.reps < 1) throw ContractViolation("effect study needs reps >= 1");
  EffectStudyResult result;
  std::vector<std::string> names;
  if (config.include_oracle) names.push_back("bayes_oracle");
  for (const auto& m : config.mixtures) names.push_back(m.name());
  for (const auto& b : config.baselines) names.push_back(b.name());

  std::uint64_t scenario_index = 0;
  for (bool two_sided : {false, true}) {
    for (std::size_t k : config.k_values) {
      for (double mu : config.mu_values) {
        ScenarioSpec spec;
        spec.kind = two_sided ? ScenarioSpec::Kind::EffectTwoSided : ScenarioSpec::Kind::EffectOneSided;
        spec.n = config.n;
        spec.k = k;
        spec.mu = mu;
        spec.reps = config.reps;
        spec.seed = config.seed;
        std::vector<double> sse(names.size(), 0.0);
        double oracle_sse = 0.0;
        for (int rep = 0; rep < config.reps; ++rep) {
          const auto data = generate_effect_scenario(spec, rep);
          oracle_sse += squared_error(data.delta, bayes_oracle(data.z, spec));
          std::size_t slot = 0;
          if (config.include_oracle) sse[slot++] = oracle_sse;
          const auto obs = as_observations(data.z);
          for (const auto& m : config.mixtures) {
            try {
              FitConfig cfg;
              cfg.components = m.components;
              cfg.penalty = m.penalty;
              cfg.null_mode = NullMode::Theoretical;
              cfg.restarts = m.restarts;
              cfg.seed = derive_seed(config.seed, {scenario_index, static_cast<std::uint64_t>(rep), kFitTag});
              const auto fit = em_fit(obs, cfg);
              sse[slot] += squared_error(data.delta, posterior_means(fit, obs));
            } catch (const Error& e) {
              throw FittingError("scenario " + std::to_string(scenario_index) + ", rep " +
                                 std::to_string(rep) + ", method " + m.name() + ": " + e.what());
            }
            ++slot;
          }
          for (const auto& b : config.baselines) {
            sse[slot++] += squared_error(data.delta, baseline_estimate(b, data.z));
          }
        }
        for (std::size_t s = 0; s < names.size(); ++s) {
          EffectStudyRow row;
          row.k = k;
          row.mu = mu;
          row.two_sided = two_sided;
          row.method = names[s];
          row.mean_squared_error = sse[s] / config.reps;
          row.rel_error = sse[s] / oracle_sse;
          result.rows.push_back(row);
        }
        ++scenario_index;
      }
    }
  }
  for (const auto& name : names) {
    std::vector<double> rel;
    for (const auto& row : result.rows) {
      if (row.method == name) rel.push_back(row.rel_error);
    }
    const double mean = std::accumulate(rel.begin(), rel.end(), 0.0) / static_cast<double>(rel.size());
    result.summary.push_back({name, mean, median(rel)});
  }
  return result;
}

MixtureModel fdr_truth_model(std::span<const double> nonnull_effects, std::size_t n) {
  if (nonnull_effects.size() >= n) throw ContractViolation("truth model needs fewer non-null effects than cases");
  MixtureModel m;
  m.family = Family::Normal;
  m.null_mode = NullMode::Theoretical;
  const double each = 1.0 / static_cast<double>(n);
  m.weights.push_back(1.0 - each * static_cast<double>(nonnull_effects.size()));
  m.components.emplace_back(NormalComponent{0.0, 0.0});
  for (double d : nonnull_effects) {
    m.weights.push_back(each);
    m.components.emplace_back(NormalComponent{d, 0.0});
  }
  m.penalty.assign(m.weights.size(), 0.0);
  return m;
}

std::pair<double, double> mean_and_sd(std::span<const double> values) {
  if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

FdrStudyResult run_fdr_study(const FdrStudyConfig& config) {
  if (config.reps < 1) throw ContractViolation("fdr study needs reps >= 1");
  if (config.nonnull >= config.n) throw ContractViolation("fdr study needs nonnull < N");
  FdrStudyResult result;
  Rng alt_rng = make_rng(config.seed, {kAlternativeTag});
  std::uniform_real_distribution<double> alt(config.effect_lo, config.effect_hi);
  for (std::size_t i = 0; i < config.nonnull; ++i) result.nonnull_effects.push_back(alt(alt_rng));

  const MixtureModel truth = fdr_truth_model(result.nonnull_effects, config.n);
  const NullGrouping truth_null = explicit_null(truth);
  const auto grid = z_grid(config.z_lo, config.z_hi, config.z_step);
  const auto true_fdr = fdr_curve(truth, truth_null, grid);
  const auto true_tail = tail_fdr_curve(truth, truth_null, grid);
  std::vector<double> true_local_t, true_tail_t;
  for (double q : config.q_values) {
    true_local_t.push_back(rejection_threshold(truth, truth_null, q, ThresholdKind::Local));
    true_tail_t.push_back(rejection_threshold(truth, truth_null, q, ThresholdKind::Tail));
  }

  std::vector<double> delta(config.n, 0.0);
  std::copy(result.nonnull_effects.begin(), result.nonnull_effects.end(), delta.begin());

  MixtureMethod method{config.components, config.penalty, config.restarts};
  const std::size_t g = grid.size();
  const std::size_t nq = config.q_values.size();
  for (NullMode mode : config.null_modes) {
    std::vector<std::vector<double>> fdr_vals(g), tail_vals(g), local_t(nq), tail_t(nq);
    std::vector<int> local_missing(nq, 0), tail_missing(nq, 0);
    for (int rep = 0; rep < config.reps; ++rep) {
      const auto noise = unit_noise(config.seed, rep, config.n);
      std::vector<Observation> obs;
      obs.reserve(config.n);
      for (std::size_t i = 0; i < config.n; ++i) obs.push_back(Observation::normal(delta[i] + noise[i]));
      MixtureModel fit;
      try {
        FitConfig cfg;
        cfg.components = config.components;
        cfg.penalty = config.penalty;
        cfg.null_mode = mode;
        cfg.restarts = config.restarts;
        cfg.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(rep), kFitTag});
        fit = em_fit(obs, cfg);
      } catch (const Error& e) {
        throw FittingError("fdr scenario, rep " + std::to_string(rep) + ", method " + method.name() +
                           " (" + std::string(to_string(mode)) + "): " + e.what());
      }
      const auto grouping = nearly_null_grouping(fit);
      const auto f = fdr_curve(fit, grouping, grid);
      const auto t = tail_fdr_curve(fit, grouping, grid);
      for (std::size_t k = 0; k < g; ++k) {
        fdr_vals[k].push_back(f[k]);
        tail_vals[k].push_back(t[k]);
      }
      for (std::size_t qi = 0; qi < nq; ++qi) {
        try {
          local_t[qi].push_back(rejection_threshold(fit, grouping, config.q_values[qi], ThresholdKind::Local));
        } catch (const NoRejectionRegion&) {
          ++local_missing[qi];
        }
        try {
          tail_t[qi].push_back(rejection_threshold(fit, grouping, config.q_values[qi], ThresholdKind::Tail));
        } catch (const NoRejectionRegion&) {
          ++tail_missing[qi];
        }
      }
    }
    for (std::size_t k = 0; k < g; ++k) {
      const auto [fm, fs] = mean_and_sd(fdr_vals[k]);
      result.fdr.push_back({grid[k], method.name(), mode, fm, fs, true_fdr[k]});
      const auto [tm, ts] = mean_and_sd(tail_vals[k]);
      result.tail_fdr.push_back({grid[k], method.name(), mode, tm, ts, true_tail[k]});
    }
    for (std::size_t qi = 0; qi < nq; ++qi) {
      const auto [lm, ls] = mean_and_sd(local_t[qi]);
      result.thresholds.push_back(
          {config.q_values[qi], "fdr", method.name(), mode, lm, ls, true_local_t[qi], local_missing[qi]});
      const auto [tm, ts] = mean_and_sd(tail_t[qi]);
      result.thresholds.push_back(
          {config.q_values[qi], "FDR", method.name(), mode, tm, ts, true_tail_t[qi], tail_missing[qi]});
    }
  }
  // The plug-in truth as a reference "method": zero bias, zero spread.
  for (std::size_t k = 0; k < g; ++k) {
    result.fdr.push_back({grid[k], "truth", NullMode::Theoretical, true_fdr[k], 0.0, true_fdr[k]});
    result.tail_fdr.push_back({grid[k], "truth", NullMode::Theoretical, true_tail[k], 0.0, true_tail[k]});
  }
  for (std::size_t qi = 0; qi < nq; ++qi) {
    result.thresholds.push_back({config.q_values[qi], "fdr", "truth", NullMode::Theoretical,
                                 true_local_t[qi], 0.0, true_local_t[qi], 0});
    result.thresholds.push_back({config.q_values[qi], "FDR", "truth", NullMode::Theoretical,
                                 true_tail_t[qi], 0.0, true_tail_t[qi], 0});
  }
  return result;
}

}  // namespace ebmix
