#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ebmix/families.hpp"
#include "ebmix/mixture.hpp"

namespace ebmix {

// One player's season split into two halves. The second half may be missing.
struct BaseballRecord {
  std::string player_id;
  bool is_pitcher = false;
  int hits_first = 0;
  int at_bats_first = 0;
  std::optional<int> hits_second;
  std::optional<int> at_bats_second;
};

// CSV with header player_id,is_pitcher,H1,N1,H2,N2. Blank H2/N2 are allowed.
std::vector<BaseballRecord> read_baseball_csv(std::istream& in);

// arcsin(sqrt((H + 1/4) / (N + 1/2))), approximately N(arcsin sqrt(p), 1/(4N)).
double arcsine_transform(int hits, int at_bats);

// E(arcsin sqrt(delta) | H, N) under the Beta-mixture posterior, by
// Gauss-Legendre quadrature on (0, 1).
double posterior_arcsine_mean(const Observation& obs, const MixtureModel& model,
                              std::size_t nodes = 256);

// Sum_i (estimate_i - X~_i)^2 - 1 / (4 N~_i).
double total_squared_error(std::span<const double> estimates, std::span<const double> held_out,
                           std::span<const int> held_out_at_bats);

struct BaseballConfig {
  int components = 2;
  double penalty = 0.0;
  int restarts = 3;
  std::uint64_t seed = 0;
  int min_at_bats = 11;
};

struct BaseballRow {
  std::string method;
  std::string group;  // overall, pitchers, nonpitchers
  double tse = 0.0;
  double normalized_tse = 0.0;  // relative to the naive estimator
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t excluded = 0;  // test-eligible players without second-half data
};

struct BaseballResult {
  std::vector<BaseballRow> rows;
  // Fitted Beta mixtures, one per group in row order overall/pitchers/nonpitchers.
  std::vector<MixtureModel> models;
};

BaseballResult run_baseball(std::span<const BaseballRecord> records, const BaseballConfig& config);

// Prior mean sum_j pi_j alpha_j / (alpha_j + beta_j) of a Beta mixture.
double beta_mixture_mean(const MixtureModel& model);

struct SyntheticSeason {
  std::vector<BaseballRecord> records;
  std::vector<double> true_rates;  // delta_i
};

// 81 pitchers and 486 non-pitchers with rates drawn from Beta(alpha, beta)
// and at-bat counts spread like a real half season.
SyntheticSeason synthetic_season(std::uint64_t seed, double alpha = 302.0, double beta = 884.0);

}  // namespace ebmix
