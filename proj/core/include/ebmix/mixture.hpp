#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ebmix/families.hpp"

namespace ebmix {

// How component 0 is treated.
//   Theoretical: point mass at 0, pinned during fitting.
//   Empirical:   free parameters, pushed large by the proportion penalty.
//   None:        no null component; fdr and FDR are unavailable.
enum class NullMode { Theoretical, Empirical, None };

std::string_view to_string(NullMode mode);
NullMode parse_null_mode(std::string_view text);

struct FitDiagnostics {
  double penalized_loglik = 0.0;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  friend bool operator==(const FitDiagnostics&, const FitDiagnostics&) = default;
};

// Mixture prior g = sum_j pi_j g_j together with how it was fitted.
struct MixtureModel {
  Family family = Family::Normal;
  NullMode null_mode = NullMode::Theoretical;
  std::vector<double> weights;              // pi
  std::vector<ComponentPrior> components;   // g_j
  std::vector<double> penalty;              // Dirichlet pseudo-counts beta_j
  FitDiagnostics diagnostics;

  std::size_t size() const { return weights.size(); }
  // Throws ContractViolation when the simplex, family or null invariants fail.
  void validate() const;

  friend bool operator==(const MixtureModel&, const MixtureModel&) = default;
};

struct FitConfig {
  int components = 3;
  // P in beta = (P, 0, ..., 0); unset means N / 5.
  std::optional<double> penalty;
  NullMode null_mode = NullMode::Theoretical;
  int max_iters = 1000;
  double rel_tol = 1e-8;
  int restarts = 3;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<double> penalty_vector(std::size_t n_cases) const;
};

// Responsibilities w_ij (row-major, n_cases x n_components) and the
// log-likelihood at the model that produced them.
struct EStepResult {
  std::size_t n_components = 0;
  std::vector<double> responsibilities;
  std::vector<double> log_marginal;  // log f(z_i) per case
  double loglik = 0.0;
  double penalized_loglik = 0.0;

  double at(std::size_t i, std::size_t j) const { return responsibilities[i * n_components + j]; }
  std::size_t n_cases() const { return log_marginal.size(); }
};

EStepResult e_step(std::span<const Observation> data, const MixtureModel& model);

MixtureModel m_step(std::span<const Observation> data, const EStepResult& estep,
                    const FitConfig& config, const MixtureModel& current);

// Deterministic given (config.seed, restart). Restart 0 is unjittered.
MixtureModel initialize(std::span<const Observation> data, const FitConfig& config, int restart);

// Called once per EM iteration with the penalized log-likelihood of the
// current parameters, before the M-step.
using FitObserver = std::function<void(int restart, int iteration, double penalized_loglik)>;

// Penalized marginal maximum likelihood by EM, best of config.restarts runs.
MixtureModel em_fit(std::span<const Observation> data, const FitConfig& config,
                    const FitObserver& observer = {});

double log_likelihood(std::span<const Observation> data, const MixtureModel& model);

// Number of free parameters counted by bic().
int free_parameter_count(const MixtureModel& model);

double bic(std::span<const Observation> data, const MixtureModel& model);

// Maximizes sum_i w_i log BB(H_i; N_i, alpha, beta) by damped Newton on
// (log alpha, log beta), starting from `start`. Never returns a point with a
// lower objective than `start`.
BetaComponent fit_weighted_beta_binomial(std::span<const Observation> data,
                                         std::span<const double> weights, BetaComponent start,
                                         int max_iters = 50);

double weighted_beta_binomial_loglik(std::span<const Observation> data,
                                     std::span<const double> weights, BetaComponent prior);

// Method-of-moments Beta fit to the rates H/N, corrected for binomial noise.
BetaComponent beta_method_of_moments(std::span<const Observation> data);

}  // namespace ebmix
