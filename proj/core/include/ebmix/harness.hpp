#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ebmix/mixture.hpp"

namespace ebmix {

// Sparse normal-means scenarios: N cases, K non-zero effects of size ~mu.
struct ScenarioSpec {
  enum class Kind { EffectOneSided, EffectTwoSided, FdrScenario };

  Kind kind = Kind::EffectOneSided;
  std::size_t n = 1000;
  std::size_t k = 0;
  double mu = 0.0;
  int reps = 1;
  std::uint64_t seed = 0;

  void validate() const;
  // round(K / 3) negative effects in the two-sided case, 0 otherwise.
  std::size_t negative_count() const;
};

struct SimulatedData {
  std::vector<double> delta;
  std::vector<double> z;
};

// Replication `rep` of an effect-size scenario. The noise vector and the
// positions of the non-zero effects depend only on (seed, rep), so every
// (K, mu, sidedness) cell and every method sees the same noise.
SimulatedData generate_effect_scenario(const ScenarioSpec& spec, int rep);

struct BaselineEstimator {
  enum class Kind {
    Naive,
    UniversalSoft,
    UniversalHard,
    FdrThreshold,
    SureShrink,
    JamesSteinPositivePart,
    GrandMean,
  };
  Kind kind = Kind::Naive;
  double q = 0.1;  // FdrThreshold level

  std::string name() const;
};

std::vector<double> baseline_estimate(const BaselineEstimator& estimator, std::span<const double> z);

double universal_threshold(std::size_t n);
// Level minimizing SURE over [0, sqrt(2 log N)].
double sure_threshold(std::span<const double> z);
// Smallest |z| rejected by Benjamini-Hochberg at level q on two-sided
// p-values; +inf when nothing is rejected.
double bh_threshold(std::span<const double> z, double q);
std::vector<double> soft_threshold(std::span<const double> z, double t);
std::vector<double> hard_threshold(std::span<const double> z, double t);
// (1 - (n - 2) / sum z^2)_+ z, or the grand-mean-centred form with (n - 3).
std::vector<double> james_stein(std::span<const double> z, bool centred, double variance = 1.0);

// Posterior mean of delta under the exact generating prior of `spec`
// (point mass at 0 plus the uniform slab(s)), in closed form.
double bayes_oracle(double z, const ScenarioSpec& spec);
std::vector<double> bayes_oracle(std::span<const double> z, const ScenarioSpec& spec);

struct MixtureMethod {
  int components = 10;
  double penalty = 50.0;
  int restarts = 3;

  std::string name() const;
};

struct EffectStudyConfig {
  std::size_t n = 1000;
  int reps = 100;
  std::uint64_t seed = 0;
  std::vector<std::size_t> k_values{5, 50, 500};
  std::vector<double> mu_values{2.0, 3.0, 4.0, 5.0};
  bool include_oracle = true;
  std::vector<MixtureMethod> mixtures{MixtureMethod{}};
  std::vector<BaselineEstimator> baselines;
};

struct EffectStudyRow {
  std::size_t k = 0;
  double mu = 0.0;
  bool two_sided = false;
  std::string method;
  double mean_squared_error = 0.0;  // sum of squared errors, averaged over reps
  double rel_error = 0.0;           // divided by the Bayes oracle's value
};

struct MethodSummary {
  std::string method;
  double mean_rel_error = 0.0;
  double median_rel_error = 0.0;
};

struct EffectStudyResult {
  std::vector<EffectStudyRow> rows;
  std::vector<MethodSummary> summary;
};

std::vector<BaselineEstimator> default_baselines();

EffectStudyResult run_effect_study(const EffectStudyConfig& config);

// Plug-in truth for the fdr scenario: a point-mass null of weight pi0 plus
// one point mass per non-null effect, each of weight 1 / N.
MixtureModel fdr_truth_model(std::span<const double> nonnull_effects, std::size_t n);

struct FdrStudyConfig {
  std::size_t n = 1000;
  std::size_t nonnull = 50;
  double effect_lo = 2.0;
  double effect_hi = 4.0;
  int reps = 100;
  std::uint64_t seed = 0;
  int components = 3;
  double penalty = 50.0;
  int restarts = 3;
  std::vector<NullMode> null_modes{NullMode::Theoretical, NullMode::Empirical};
  std::vector<double> q_values{0.01, 0.02, 0.05, 0.1, 0.2};
  double z_lo = -4.0;
  double z_hi = 6.0;
  double z_step = 0.1;
};

struct CurveStat {
  double z = 0.0;
  std::string method;
  NullMode null_mode = NullMode::Theoretical;
  double mean = 0.0;
  double sd = 0.0;
  double truth = 0.0;
};

struct ThresholdStat {
  double q = 0.0;
  std::string kind;  // "fdr" or "FDR"
  std::string method;
  NullMode null_mode = NullMode::Theoretical;
  double mean = 0.0;
  double sd = 0.0;
  double truth = 0.0;
  int missing = 0;  // reps with no rejection region
};

struct FdrStudyResult {
  std::vector<double> nonnull_effects;
  std::vector<CurveStat> fdr;
  std::vector<CurveStat> tail_fdr;
  std::vector<ThresholdStat> thresholds;
};

FdrStudyResult run_fdr_study(const FdrStudyConfig& config);

// Mean and sample sd (n - 1 denominator; 0 for a single value).
std::pair<double, double> mean_and_sd(std::span<const double> values);

}  // namespace ebmix
