#include "ebmix/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ebmix/errors.hpp"
#include "ebmix/numeric.hpp"

namespace ebmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_weight(double w) { return w > 0.0 ? std::log(w) : kNegInf; }

void check_grouping(const MixtureModel& model, const NullGrouping& grouping) {
  for (std::size_t j : grouping.null_set) {
    if (j >= model.size()) throw ContractViolation("null set names a component outside the model");
  }
}

void require_normal(const MixtureModel& model, const char* what) {
  if (model.family != Family::Normal)
    throw UnsupportedOperation(std::string(what) + " is defined for the normal family only");
}

void require_null(const NullGrouping& grouping, const char* what) {
  if (grouping.empty()) throw ContractViolation(std::string(what) + " needs a non-empty null set");
}

double local_fdr_at(double z, const MixtureModel& model, const NullGrouping& grouping, double s2) {
  const std::size_t jn = model.size();
  std::vector<double> all(jn);
  std::vector<double> null_terms;
  null_terms.reserve(grouping.null_set.size());
  for (std::size_t j = 0; j < jn; ++j) {
    const auto& c = std::get<NormalComponent>(model.components[j]);
    all[j] = log_weight(model.weights[j]) + normal_log_pdf(z, c.mean, c.variance + s2);
  }
  for (std::size_t j : grouping.null_set) null_terms.push_back(all[j]);
  const double den = log_sum_exp(all);
  if (!std::isfinite(den)) throw NumericError("marginal density is zero at z = " + std::to_string(z));
  return std::min(1.0, std::exp(log_sum_exp(null_terms) - den));
}

}  // namespace

bool NullGrouping::contains(std::size_t j) const {
  return std::binary_search(null_set.begin(), null_set.end(), j);
}

NullGrouping explicit_null(const MixtureModel& model) {
  NullGrouping g;
  if (model.null_mode != NullMode::None) g.null_set = {0};
  return g;
}

NullGrouping nearly_null_grouping(const MixtureModel& model, double mean_tol, double var_tol) {
  require_normal(model, "nearly-null grouping");
  NullGrouping g;
  g.rule = NullGrouping::Rule::NearlyNull;
  g.mean_tol = mean_tol;
  g.var_tol = var_tol;
  if (model.null_mode == NullMode::None) return g;
  const auto& null = std::get<NormalComponent>(model.components[0]);
  g.null_set.push_back(0);
  for (std::size_t j = 1; j < model.size(); ++j) {
    const auto& c = std::get<NormalComponent>(model.components[j]);
    if (std::abs(c.mean - null.mean) <= mean_tol && c.variance <= null.variance + var_tol) {
      g.null_set.push_back(j);
    }
  }
  return g;
}

NullGrouping all_components(const MixtureModel& model) {
  NullGrouping g;
  for (std::size_t j = 0; j < model.size(); ++j) g.null_set.push_back(j);
  return g;
}

PosteriorSummary posterior_summary(const Observation& obs, const MixtureModel& model,
                                   const NullGrouping& grouping) {
  if (obs.family() != model.family) throw ContractViolation("observation family differs from model family");
  check_grouping(model, grouping);
  const std::size_t jn = model.size();
  std::vector<double> logs(jn);
  for (std::size_t j = 0; j < jn; ++j) {
    const double lw = log_weight(model.weights[j]);
    logs[j] = std::isfinite(lw) ? lw + component_log_marginal(obs, model.components[j]) : lw;
  }
  const double lse = log_sum_exp(logs);
  if (!std::isfinite(lse)) throw NumericError("marginal density is zero for this observation");

  PosteriorSummary out;
  out.weights.resize(jn);
  std::vector<PosteriorComponent> parts(jn);
  for (std::size_t j = 0; j < jn; ++j) {
    out.weights[j] = std::exp(logs[j] - lse);
    parts[j] = component_posterior(obs, model.components[j]);
    out.effect_mean += out.weights[j] * parts[j].mean;
  }
  // Law of total variance over the posterior mixture.
  for (std::size_t j = 0; j < jn; ++j) {
    const double d = parts[j].mean - out.effect_mean;
    out.effect_var += out.weights[j] * (parts[j].variance + d * d);
  }
  if (!grouping.empty()) {
    double fdr = 0.0;
    for (std::size_t j : grouping.null_set) fdr += out.weights[j];
    out.fdr = std::min(1.0, fdr);
    if (model.family == Family::Normal) {
      out.tail_fdr = tail_fdr(obs.value(), model, grouping, obs.nuisance());
    }
  }
  return out;
}

double tail_fdr(double z, const MixtureModel& model, const NullGrouping& grouping, double s2) {
  require_normal(model, "FDR");
  require_null(grouping, "FDR");
  check_grouping(model, grouping);
  const double t = std::abs(z);
  if (t == 0.0) {
    double total = 0.0;
    for (std::size_t j : grouping.null_set) total += model.weights[j];
    return total;
  }
  const std::size_t jn = model.size();
  std::vector<double> all(jn);
  for (std::size_t j = 0; j < jn; ++j) {
    const double lw = log_weight(model.weights[j]);
    all[j] = std::isfinite(lw) ? lw + component_log_two_sided_tail(t, model.components[j], s2) : lw;
  }
  std::vector<double> null_terms;
  for (std::size_t j : grouping.null_set) null_terms.push_back(all[j]);
  const double den = log_sum_exp(all);
  if (!std::isfinite(den)) throw NumericError("tail probability is zero at z = " + std::to_string(z));
  return std::clamp(std::exp(log_sum_exp(null_terms) - den), 0.0, 1.0);
}

std::vector<double> fdr_curve(const MixtureModel& model, const NullGrouping& grouping,
                              std::span<const double> z_grid, double s2) {
  require_normal(model, "fdr curve");
  require_null(grouping, "fdr curve");
  check_grouping(model, grouping);
  if (z_grid.empty()) throw ContractViolation("empty z grid");
  std::vector<double> out;
  out.reserve(z_grid.size());
  for (double z : z_grid) out.push_back(local_fdr_at(z, model, grouping, s2));
  return out;
}

std::vector<double> tail_fdr_curve(const MixtureModel& model, const NullGrouping& grouping,
                                   std::span<const double> z_grid, double s2) {
  if (z_grid.empty()) throw ContractViolation("empty z grid");
  std::vector<double> out;
  out.reserve(z_grid.size());
  for (double z : z_grid) out.push_back(tail_fdr(z, model, grouping, s2));
  return out;
}

double rejection_threshold(const MixtureModel& model, const NullGrouping& grouping, double q,
                           ThresholdKind kind) {
  require_normal(model, "rejection threshold");
  require_null(grouping, "rejection threshold");
  check_grouping(model, grouping);
  if (!(q > 0.0 && q < 1.0)) throw ContractViolation("q must lie in (0, 1)");
  auto curve = [&](double z) {
    return kind == ThresholdKind::Local ? local_fdr_at(z, model, grouping, 1.0)
                                        : tail_fdr(z, model, grouping, 1.0);
  };
  constexpr int kSteps = 10000;  // [0, 10] at 0.001
  auto grid = [](int k) { return static_cast<double>(k) / 1000.0; };
  if (curve(grid(kSteps)) > q) {
    throw NoRejectionRegion("curve stays above q = " + std::to_string(q) + " on [0, 10]");
  }
  int first = kSteps;
  while (first > 0 && curve(grid(first - 1)) <= q) --first;
  if (first == 0) return 0.0;
  double lo = grid(first - 1);
  double hi = grid(first);
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (curve(mid) <= q ? hi : lo) = mid;
  }
  return hi;
}

TweedieMoments tweedie_continuous(const LogDensityJetFn& log_f, const LogDensityJetFn& log_f0,
                                  double z, double s2) {
  const LogDensityJet f = log_f(z);
  const LogDensityJet f0 = log_f0(z);
  const double d1 = f.d1 - f0.d1;
  const double d2 = f.d2 - f0.d2;
  if (!std::isfinite(d1) || !std::isfinite(d2))
    throw NumericError("non-finite derivative of the log density ratio at z = " + std::to_string(z));
  return {s2 * d1, s2 * s2 * d2};
}

TweedieMoments tweedie_continuous_numeric(const std::function<double(double)>& log_f,
                                          const std::function<double(double)>& log_f0, double z,
                                          double s2) {
  auto g = [&](double x) { return log_f(x) - log_f0(x); };
  constexpr double h = 1e-3;
  const double g0 = g(z);
  const double gp1 = g(z + h), gm1 = g(z - h);
  const double gp2 = g(z + h / 2), gm2 = g(z - h / 2);
  const double d1_h = (gp1 - gm1) / (2 * h);
  const double d1_h2 = (gp2 - gm2) / h;
  const double d2_h = (gp1 - 2 * g0 + gm1) / (h * h);
  const double d2_h2 = (gp2 - 2 * g0 + gm2) / (h * h / 4);
  const double d1 = (4 * d1_h2 - d1_h) / 3;
  const double d2 = (4 * d2_h2 - d2_h) / 3;
  if (!std::isfinite(d1) || !std::isfinite(d2))
    throw NumericError("non-finite derivative of the log density ratio at z = " + std::to_string(z));
  return {s2 * d1, s2 * s2 * d2};
}

LogDensityJetFn mixture_log_marginal(const MixtureModel& model, double s2) {
  require_normal(model, "analytic mixture density");
  std::vector<double> log_pi, mean, var;
  for (std::size_t j = 0; j < model.size(); ++j) {
    if (!(model.weights[j] > 0.0)) continue;
    const auto& c = std::get<NormalComponent>(model.components[j]);
    log_pi.push_back(std::log(model.weights[j]));
    mean.push_back(c.mean);
    var.push_back(c.variance + s2);
  }
  return [log_pi, mean, var](double z) {
    const std::size_t jn = log_pi.size();
    std::vector<double> l(jn);
    for (std::size_t j = 0; j < jn; ++j) l[j] = log_pi[j] + normal_log_pdf(z, mean[j], var[j]);
    const double lse = log_sum_exp(l);
    LogDensityJet jet{lse, 0.0, 0.0};
    std::vector<double> p(jn), a(jn);
    for (std::size_t j = 0; j < jn; ++j) {
      p[j] = std::exp(l[j] - lse);
      a[j] = -(z - mean[j]) / var[j];
      jet.d1 += p[j] * a[j];
    }
    for (std::size_t j = 0; j < jn; ++j) {
      const double d = a[j] - jet.d1;
      jet.d2 += p[j] * (d * d - 1.0 / var[j]);
    }
    return jet;
  };
}

LogDensityJetFn null_log_density(double s2) {
  return [s2](double z) { return LogDensityJet{normal_log_pdf(z, 0.0, s2), -z / s2, -1.0 / s2}; };
}

TweedieMoments tweedie_discrete(const IntegerTable& log_f, const IntegerTable& log_f0, int z) {
  const int lo = std::max(log_f.first, log_f0.first);
  const int hi = std::min(log_f.last(), log_f0.last());
  if (hi - lo + 1 < 4) throw ContractViolation("discrete Tweedie needs at least 4 common support points");
  if (z < lo || z > hi) throw ContractViolation("z lies outside the tabulated support");
  std::vector<double> x, y;
  for (int k = lo; k <= hi; ++k) {
    const double v = log_f.values[static_cast<std::size_t>(k - log_f.first)] -
                     log_f0.values[static_cast<std::size_t>(k - log_f0.first)];
    if (!std::isfinite(v)) throw NumericError("non-finite log density ratio at " + std::to_string(k));
    x.push_back(k);
    y.push_back(v);
  }
  const NaturalCubicSpline spline(std::move(x), std::move(y));
  return {spline.derivative(z), spline.second_derivative(z)};
}

}  // namespace ebmix
