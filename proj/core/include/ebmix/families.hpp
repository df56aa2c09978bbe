#pragma once

#include <optional>
#include <string_view>
#include <variant>

namespace ebmix {

// Sampling family of the observed statistic.
//   Normal:   z | delta ~ N(delta, s2), s2 known per case (default 1).
//   Binomial: H | delta ~ Binomial(N, delta), N known per case.
enum class Family { Normal, Binomial };

std::string_view to_string(Family family);
Family parse_family(std::string_view text);

// Normal prior N(mean, variance) on the effect. variance == 0 is a point mass;
// mean == 0 and variance == 0 is the theoretical null.
struct NormalComponent {
  double mean = 0.0;
  double variance = 0.0;
  friend bool operator==(const NormalComponent&, const NormalComponent&) = default;
};

// Beta(alpha, beta) prior on the success probability.
struct BetaComponent {
  double alpha = 1.0;
  double beta = 1.0;
  friend bool operator==(const BetaComponent&, const BetaComponent&) = default;
};

using ComponentPrior = std::variant<NormalComponent, BetaComponent>;

Family family_of(const ComponentPrior& prior);
void validate(const ComponentPrior& prior);

// One case. Construct through normal() or binomial(); both validate.
class Observation {
 public:
  static Observation normal(double z, double variance = 1.0);
  static Observation binomial(int hits, int trials);

  Family family() const { return family_; }
  // z for Normal, H for Binomial.
  double value() const { return value_; }
  // s2 for Normal, N for Binomial.
  double nuisance() const { return nuisance_; }

  double z() const;
  double variance() const;
  int hits() const;
  int trials() const;

  friend bool operator==(const Observation&, const Observation&) = default;

 private:
  Observation(Family family, double value, double nuisance)
      : family_(family), value_(value), nuisance_(nuisance) {}

  Family family_;
  double value_;
  double nuisance_;
};

// Posterior of the effect under a single component.
struct PosteriorComponent {
  double mean = 0.0;
  double variance = 0.0;
  std::optional<BetaComponent> beta_shape;  // set for Binomial only
};

// log f^(j)(obs): log N(z; mu, sigma2 + s2) or the log beta-binomial pmf.
double component_log_marginal(const Observation& obs, const ComponentPrior& prior);

PosteriorComponent component_posterior(const Observation& obs, const ComponentPrior& prior);

// Phi((z - mu) / sqrt(sigma2 + s2)); Normal components only.
double component_marginal_cdf(double z, const ComponentPrior& prior, double s2 = 1.0);

// log P(|Z| >= t) under the component marginal, t >= 0; Normal components only.
double component_log_two_sided_tail(double t, const ComponentPrior& prior, double s2 = 1.0);

}  // namespace ebmix
