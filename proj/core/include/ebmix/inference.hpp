#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ebmix/families.hpp"
#include "ebmix/mixture.hpp"

namespace ebmix {

// Which components count as "null" when forming fdr and FDR.
struct NullGrouping {
  enum class Rule { ExplicitOnly, NearlyNull };

  std::vector<std::size_t> null_set;  // sorted, unique
  Rule rule = Rule::ExplicitOnly;
  double mean_tol = 0.0;
  double var_tol = 0.0;

  bool contains(std::size_t j) const;
  bool empty() const { return null_set.empty(); }
};

inline constexpr double kDefaultNearlyNullMeanTol = 0.25;
inline constexpr double kDefaultNearlyNullVarTol = 0.25;

// {0} when the model has a null component, {} otherwise.
NullGrouping explicit_null(const MixtureModel& model);

// {0} plus every component whose mean is within mean_tol of the null mean and
// whose variance exceeds the null variance by at most var_tol.
NullGrouping nearly_null_grouping(const MixtureModel& model,
                                  double mean_tol = kDefaultNearlyNullMeanTol,
                                  double var_tol = kDefaultNearlyNullVarTol);

// Every component in the null set; useful as a degenerate reference.
NullGrouping all_components(const MixtureModel& model);

struct PosteriorSummary {
  std::vector<double> weights;  // p_j(z)
  double effect_mean = 0.0;
  double effect_var = 0.0;
  std::optional<double> fdr;       // absent when the null set is empty
  std::optional<double> tail_fdr;  // FDR; normal family with a null set only
};

PosteriorSummary posterior_summary(const Observation& obs, const MixtureModel& model,
                                   const NullGrouping& grouping);

// FDR(z) = P(null | |Z| >= |z|) for a case with known variance s2.
double tail_fdr(double z, const MixtureModel& model, const NullGrouping& grouping, double s2 = 1.0);

std::vector<double> fdr_curve(const MixtureModel& model, const NullGrouping& grouping,
                              std::span<const double> z_grid, double s2 = 1.0);
std::vector<double> tail_fdr_curve(const MixtureModel& model, const NullGrouping& grouping,
                                   std::span<const double> z_grid, double s2 = 1.0);

enum class ThresholdKind { Local, Tail };  // fdr-based or FDR-based

// Smallest t in [0, 10] such that the chosen curve stays <= q on [t, 10].
// Searched on a 0.001 grid and refined by bisection to 1e-6.
double rejection_threshold(const MixtureModel& model, const NullGrouping& grouping, double q,
                           ThresholdKind kind);

// Value and first two derivatives of a log-density at a point.
struct LogDensityJet {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};
using LogDensityJetFn = std::function<LogDensityJet(double)>;

struct TweedieMoments {
  double mean = 0.0;
  double variance = 0.0;
};

// Posterior mean and variance of the effect from the derivatives of
// log f - log f0, for z | delta ~ N(delta, s2). The natural parameter is
// delta / s2, hence the s2 and s2^2 scalings.
TweedieMoments tweedie_continuous(const LogDensityJetFn& log_f, const LogDensityJetFn& log_f0,
                                  double z, double s2 = 1.0);

// Same, for callables without analytic derivatives (central differences
// with Richardson extrapolation).
TweedieMoments tweedie_continuous_numeric(const std::function<double(double)>& log_f,
                                          const std::function<double(double)>& log_f0, double z,
                                          double s2 = 1.0);

// Analytic log marginal log sum_j pi_j N(z; mu_j, sigma_j^2 + s2).
LogDensityJetFn mixture_log_marginal(const MixtureModel& model, double s2 = 1.0);
// log N(z; 0, s2).
LogDensityJetFn null_log_density(double s2 = 1.0);

// Values of a log-density on the contiguous integers first, first+1, ...
struct IntegerTable {
  int first = 0;
  std::vector<double> values;

  int last() const { return first + static_cast<int>(values.size()) - 1; }
};

// Discrete-support variant: interpolate log f - log f0 with a natural cubic
// spline through the integer points and differentiate it at z.
TweedieMoments tweedie_discrete(const IntegerTable& log_f, const IntegerTable& log_f0, int z);

}  // namespace ebmix
