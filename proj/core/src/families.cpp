#include "ebmix/families.hpp"

#include <cmath>
#include <string>

#include "ebmix/errors.hpp"
#include "ebmix/numeric.hpp"

namespace ebmix {

std::string_view to_string(Family family) {
  return family == Family::Normal ? "normal" : "binomial";
}

Family parse_family(std::string_view text) {
  if (text == "normal") return Family::Normal;
  if (text == "binomial") return Family::Binomial;
  throw ContractViolation("unknown family '" + std::string(text) + "'");
}

Family family_of(const ComponentPrior& prior) {
  return std::holds_alternative<NormalComponent>(prior) ? Family::Normal : Family::Binomial;
}

void validate(const ComponentPrior& prior) {
  if (const auto* n = std::get_if<NormalComponent>(&prior)) {
    if (!std::isfinite(n->mean) || !std::isfinite(n->variance) || n->variance < 0.0)
      throw ContractViolation("normal component needs finite mean and variance >= 0");
    return;
  }
  const auto& b = std::get<BetaComponent>(prior);
  if (!std::isfinite(b.alpha) || !std::isfinite(b.beta) || b.alpha <= 0.0 || b.beta <= 0.0)
    throw ContractViolation("beta component needs finite alpha > 0 and beta > 0");
}

Observation Observation::normal(double z, double variance) {
  if (!std::isfinite(z)) throw ContractViolation("normal observation must be finite");
  if (!std::isfinite(variance) || variance <= 0.0)
    throw ContractViolation("normal observation variance must be > 0");
  return Observation(Family::Normal, z, variance);
}

Observation Observation::binomial(int hits, int trials) {
  if (trials < 1) throw ContractViolation("binomial observation needs N >= 1");
  if (hits < 0 || hits > trials) throw ContractViolation("binomial observation needs 0 <= H <= N");
  return Observation(Family::Binomial, hits, trials);
}

double Observation::z() const {
  if (family_ != Family::Normal) throw ContractViolation("z() on a binomial observation");
  return value_;
}

double Observation::variance() const {
  if (family_ != Family::Normal) throw ContractViolation("variance() on a binomial observation");
  return nuisance_;
}

int Observation::hits() const {
  if (family_ != Family::Binomial) throw ContractViolation("hits() on a normal observation");
  return static_cast<int>(value_);
}

int Observation::trials() const {
  if (family_ != Family::Binomial) throw ContractViolation("trials() on a normal observation");
  return static_cast<int>(nuisance_);
}

namespace {

void require_match(const Observation& obs, const ComponentPrior& prior) {
  if (obs.family() != family_of(prior))
    throw ContractViolation("observation and component belong to different families");
}

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string(what) + " is not finite");
  return v;
}

}  // namespace

double component_log_marginal(const Observation& obs, const ComponentPrior& prior) {
  require_match(obs, prior);
  if (const auto* n = std::get_if<NormalComponent>(&prior)) {
    return checked(normal_log_pdf(obs.value(), n->mean, n->variance + obs.nuisance()),
                   "normal marginal");
  }
  const auto& b = std::get<BetaComponent>(prior);
  const int h = obs.hits();
  const int n = obs.trials();
  return checked(log_choose(n, h) + log_beta(b.alpha + h, b.beta + n - h) - log_beta(b.alpha, b.beta),
                 "beta-binomial marginal");
}

PosteriorComponent component_posterior(const Observation& obs, const ComponentPrior& prior) {
  require_match(obs, prior);
  if (const auto* n = std::get_if<NormalComponent>(&prior)) {
    if (n->variance == 0.0) return {n->mean, 0.0, std::nullopt};
    const double s2 = obs.nuisance();
    const double total = n->variance + s2;
    return {(s2 * n->mean + n->variance * obs.value()) / total, n->variance * s2 / total,
            std::nullopt};
  }
  const auto& b = std::get<BetaComponent>(prior);
  const BetaComponent post{b.alpha + obs.hits(), b.beta + obs.trials() - obs.hits()};
  const double sum = post.alpha + post.beta;
  return {post.alpha / sum, post.alpha * post.beta / (sum * sum * (sum + 1.0)), post};
}

double component_marginal_cdf(double z, const ComponentPrior& prior, double s2) {
  const auto* n = std::get_if<NormalComponent>(&prior);
  if (n == nullptr) throw UnsupportedOperation("marginal cdf is defined for the normal family only");
  if (std::isinf(z)) return z > 0 ? 1.0 : 0.0;
  return normal_cdf((z - n->mean) / std::sqrt(n->variance + s2));
}

double component_log_two_sided_tail(double t, const ComponentPrior& prior, double s2) {
  const auto* n = std::get_if<NormalComponent>(&prior);
  if (n == nullptr) throw UnsupportedOperation("tail probabilities are defined for the normal family only");
  const double sd = std::sqrt(n->variance + s2);
  const double upper = normal_log_sf((t - n->mean) / sd);
  const double lower = normal_log_cdf((-t - n->mean) / sd);
  const double both[] = {upper, lower};
  return log_sum_exp(both);
}

}  // namespace ebmix
