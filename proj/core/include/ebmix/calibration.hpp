#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ebmix/families.hpp"
#include "ebmix/mixture.hpp"

namespace ebmix {

// Parametric-bootstrap search over penalty values P.
struct CalibrationPlan {
  std::vector<double> candidates;   // P_1..P_K
  double preliminary_penalty = 0.0;
  int perturbed_models = 4;         // L
  int bootstraps = 20;              // B
  // Perturbed model l shifts the null mean by +jitter (even l) or -jitter
  // (odd l) and scales the null marginal sd by null_sd_scales[l % size].
  double null_mean_jitter = 0.05;
  std::vector<double> null_sd_scales{0.95, 1.0, 1.05, 1.1};
  std::uint64_t seed = 0;

  void validate() const;
};

// 20 candidates evenly spaced on [100, N/2], preliminary P = N/5.
CalibrationPlan default_plan(std::size_t n_cases);

// Model l of the plan, derived from the preliminary fit.
MixtureModel perturbed_model(const MixtureModel& base, const CalibrationPlan& plan, int l);

// Draws n normal cases (unit noise) from a fitted normal mixture prior.
std::vector<Observation> sample_normal_mixture(const MixtureModel& model, std::size_t n,
                                               std::uint64_t seed);

// Mean squared difference between the fdr curves of two models on 101 points
// over [-5, 5], each under its own nearly-null grouping.
double fdr_discrepancy(const MixtureModel& fitted, const MixtureModel& truth);

struct CalibrationCell {
  std::size_t candidate = 0;
  double penalty = 0.0;
  int perturbed = 0;
  int bootstrap = 0;
  double score = 0.0;
  bool flagged = false;  // fit failed; score is the worst case (1.0)
};

struct CalibrationResult {
  double chosen_penalty = 0.0;
  std::size_t chosen_index = 0;
  MixtureModel preliminary;
  std::vector<double> mean_scores;     // per candidate
  std::vector<CalibrationCell> cells;  // K x (L * B), candidate-major
};

CalibrationResult calibrate_penalty(std::span<const Observation> data, const FitConfig& base_config,
                                    const CalibrationPlan& plan);

}  // namespace ebmix
