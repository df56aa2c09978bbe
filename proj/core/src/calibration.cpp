#include "ebmix/calibration.hpp"

#include <cmath>
#include <random>
#include <string>

#include "ebmix/errors.hpp"
#include "ebmix/inference.hpp"
#include "ebmix/random.hpp"

namespace ebmix {

void CalibrationPlan::validate() const {
  if (candidates.empty()) throw ContractViolation("calibration plan needs at least one candidate");
  for (double p : candidates) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ContractViolation("candidate penalties must be >= 0");
  }
  if (!(preliminary_penalty >= 0.0)) throw ContractViolation("preliminary penalty must be >= 0");
  if (perturbed_models < 1) throw ContractViolation("need at least one perturbed model");
  if (bootstraps < 1) throw ContractViolation("need at least one bootstrap data set");
  if (null_sd_scales.empty()) throw ContractViolation("need at least one null sd scale");
  for (double s : null_sd_scales) {
    if (!(s > 0.0)) throw ContractViolation("null sd scales must be > 0");
  }
}

CalibrationPlan default_plan(std::size_t n_cases) {
  const double top = static_cast<double>(n_cases) / 2.0;
  if (!(top > 100.0)) {
    throw DegenerateRange("candidate range [100, N/2] is empty for N = " + std::to_string(n_cases) +
                          "; supply candidates explicitly");
  }
  CalibrationPlan plan;
  constexpr int kCandidates = 20;
  for (int k = 0; k < kCandidates; ++k) {
    plan.candidates.push_back(100.0 + (top - 100.0) * k / (kCandidates - 1));
  }
  plan.preliminary_penalty = static_cast<double>(n_cases) / 5.0;
  return plan;
}

MixtureModel perturbed_model(const MixtureModel& base, const CalibrationPlan& plan, int l) {
  if (base.family != Family::Normal) throw UnsupportedOperation("calibration needs a normal-family model");
  if (base.null_mode == NullMode::None) throw ContractViolation("calibration needs a null component");
  MixtureModel m = base;
  auto& null = std::get<NormalComponent>(m.components[0]);
  const double sign = (l % 2 == 0) ? 1.0 : -1.0;
  const double scale = plan.null_sd_scales[static_cast<std::size_t>(l) % plan.null_sd_scales.size()];
  null.mean += sign * plan.null_mean_jitter;
  null.variance = std::max(0.0, scale * scale * (null.variance + 1.0) - 1.0);
  if (m.null_mode == NullMode::Theoretical && !(null == NormalComponent{0.0, 0.0})) {
    m.null_mode = NullMode::Empirical;
  }
  return m;
}

std::vector<Observation> sample_normal_mixture(const MixtureModel& model, std::size_t n,
                                               std::uint64_t seed) {
  if (model.family != Family::Normal) throw UnsupportedOperation("sampling needs a normal-family model");
  Rng rng(seed);
  std::discrete_distribution<std::size_t> pick(model.weights.begin(), model.weights.end());
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<Observation> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = std::get<NormalComponent>(model.components[pick(rng)]);
    const double effect = c.mean + std::sqrt(c.variance) * unit(rng);
    out.push_back(Observation::normal(effect + unit(rng)));
  }
  return out;
}

double fdr_discrepancy(const MixtureModel& fitted, const MixtureModel& truth) {
  std::vector<double> grid;
  for (int k = 0; k <= 100; ++k) grid.push_back(-5.0 + 0.1 * k);
  const auto a = fdr_curve(fitted, nearly_null_grouping(fitted), grid);
  const auto b = fdr_curve(truth, nearly_null_grouping(truth), grid);
  double acc = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
  return acc / static_cast<double>(grid.size());
}

CalibrationResult calibrate_penalty(std::span<const Observation> data, const FitConfig& base_config,
                                    const CalibrationPlan& plan) {
  plan.validate();
  base_config.validate();
  if (data.empty()) throw ContractViolation("no observations");
  if (data.front().family() != Family::Normal)
    throw UnsupportedOperation("penalty calibration is implemented for the normal family only");
  if (base_config.null_mode == NullMode::None)
    throw ContractViolation("penalty calibration needs a null component");

  CalibrationResult result;
  FitConfig prelim_cfg = base_config;
  prelim_cfg.penalty = plan.preliminary_penalty;
  result.preliminary = em_fit(data, prelim_cfg);

  const std::size_t k_count = plan.candidates.size();
  const auto l_count = static_cast<std::size_t>(plan.perturbed_models);
  const auto b_count = static_cast<std::size_t>(plan.bootstraps);
  const std::size_t per_candidate = l_count * b_count;
  result.cells.resize(k_count * per_candidate);

  for (std::size_t l = 0; l < l_count; ++l) {
    const MixtureModel truth = perturbed_model(result.preliminary, plan, static_cast<int>(l));
    for (std::size_t b = 0; b < b_count; ++b) {
      const auto boot = sample_normal_mixture(truth, data.size(), derive_seed(plan.seed, {l, b, 0xB007ULL}));
      for (std::size_t k = 0; k < k_count; ++k) {
        CalibrationCell cell{k, plan.candidates[k], static_cast<int>(l), static_cast<int>(b), 1.0, false};
        FitConfig cfg = base_config;
        cfg.penalty = plan.candidates[k];
        cfg.restarts = 1;
        cfg.seed = derive_seed(plan.seed, {l, b, k});
        try {
          const MixtureModel fit = em_fit(boot, cfg);
          cell.score = fdr_discrepancy(fit, truth);
          if (!std::isfinite(cell.score)) {
            cell.score = 1.0;
            cell.flagged = true;
          }
        } catch (const Error&) {
          cell.flagged = true;
        }
        result.cells[k * per_candidate + l * b_count + b] = cell;
      }
    }
  }

  result.mean_scores.assign(k_count, 0.0);
  for (const auto& cell : result.cells) result.mean_scores[cell.candidate] += cell.score;
  for (double& s : result.mean_scores) s /= static_cast<double>(per_candidate);

  std::size_t best = 0;
  for (std::size_t k = 1; k < k_count; ++k) {
    const double s = result.mean_scores[k];
    const double sb = result.mean_scores[best];
    if (s < sb || (s == sb && plan.candidates[k] > plan.candidates[best])) best = k;
  }
  result.chosen_index = best;
  result.chosen_penalty = plan.candidates[best];
  return result;
}

}  // namespace ebmix
