#include "ebmix/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "ebmix/errors.hpp"
#include "ebmix/numeric.hpp"
#include "ebmix/random.hpp"

namespace ebmix {

std::string_view to_string(NullMode mode) {
  switch (mode) {
    case NullMode::Theoretical: return "theoretical";
    case NullMode::Empirical: return "empirical";
    case NullMode::None: return "none";
  }
  return "none";
}

NullMode parse_null_mode(std::string_view text) {
  if (text == "theoretical") return NullMode::Theoretical;
  if (text == "empirical") return NullMode::Empirical;
  if (text == "none") return NullMode::None;
  throw ContractViolation("unknown null mode '" + std::string(text) + "'");
}

void MixtureModel::validate() const {
  const std::size_t j = weights.size();
  if (j == 0) throw ContractViolation("mixture needs at least one component");
  if (components.size() != j || penalty.size() != j)
    throw ContractViolation("mixture weights, components and penalty differ in length");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractViolation("mixture weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ContractViolation("mixture weights must sum to 1");
  for (double b : penalty) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw ContractViolation("penalty entries must be >= 0");
  }
  for (const auto& c : components) {
    if (family_of(c) != family) throw ContractViolation("component family differs from model family");
    ebmix::validate(c);
  }
  if (null_mode != NullMode::None && j < 2)
    throw ContractViolation("a model with a null component needs J >= 2");
  if (null_mode == NullMode::Theoretical) {
    if (family != Family::Normal)
      throw ContractViolation("the theoretical null is defined for the normal family only");
    if (!(std::get<NormalComponent>(components[0]) == NormalComponent{0.0, 0.0}))
      throw ContractViolation("theoretical null component must be the point mass at 0");
  }
  if (null_mode == NullMode::Empirical) {
    for (std::size_t k = 1; k < j; ++k) {
      if (penalty[k] > penalty[0]) throw ContractViolation("empirical null needs beta_0 >= beta_j");
    }
  }
}

void FitConfig::validate() const {
  if (components < 1) throw ContractViolation("J must be >= 1");
  if (null_mode != NullMode::None && components < 2)
    throw ContractViolation("J must be >= 2 when a null component is used");
  if (max_iters < 1) throw ContractViolation("max_iters must be >= 1");
  if (!(rel_tol > 0.0)) throw ContractViolation("rel_tol must be > 0");
  if (restarts < 1) throw ContractViolation("restarts must be >= 1");
  if (penalty && (!(*penalty >= 0.0) || !std::isfinite(*penalty)))
    throw ContractViolation("penalty must be a finite value >= 0");
}

std::vector<double> FitConfig::penalty_vector(std::size_t n_cases) const {
  std::vector<double> beta(static_cast<std::size_t>(components), 0.0);
  const double fallback = null_mode == NullMode::None ? 0.0 : static_cast<double>(n_cases) / 5.0;
  beta[0] = penalty.value_or(fallback);
  return beta;
}

namespace {

void require_data(std::span<const Observation> data, Family family) {
  if (data.empty()) throw ContractViolation("no observations");
  for (const auto& obs : data) {
    if (obs.family() != family) throw ContractViolation("observation family differs from model family");
  }
}

bool homoscedastic(std::span<const Observation> data) {
  const double s2 = data.front().nuisance();
  return std::all_of(data.begin(), data.end(), [s2](const Observation& o) { return o.nuisance() == s2; });
}

std::vector<double> values_of(std::span<const Observation> data) {
  std::vector<double> v;
  v.reserve(data.size());
  for (const auto& o : data) v.push_back(o.value());
  return v;
}

// Q(mu, sigma2) = sum_i w_i log N(z_i; mu, sigma2 + s2_i).
double normal_component_q(std::span<const Observation> data, std::span<const double> w,
                          NormalComponent c) {
  double q = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (w[i] == 0.0) continue;
    q += w[i] * normal_log_pdf(data[i].value(), c.mean, c.variance + data[i].nuisance());
  }
  return q;
}

double weighted_mean_given_variance(std::span<const Observation> data, std::span<const double> w,
                                    double sigma2) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double p = w[i] / (sigma2 + data[i].nuisance());
    num += p * data[i].value();
    den += p;
  }
  return num / den;
}

// dQ/dsigma2 at fixed mu.
double variance_score(std::span<const Observation> data, std::span<const double> w, double mu,
                      double sigma2) {
  double g = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = sigma2 + data[i].nuisance();
    const double d = data[i].value() - mu;
    g += w[i] * (d * d / (v * v) - 1.0 / v);
  }
  return 0.5 * g;
}

// Generalized M-step for one normal component with case-specific s2: start
// from the better of the current and moment estimates, then alternate the
// exact mean update with a bisection on the variance score. Each accepted
// move increases Q, so EM stays monotone.
NormalComponent update_normal_heteroscedastic(std::span<const Observation> data,
                                              std::span<const double> w, double total,
                                              NormalComponent current) {
  double mu = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) mu += w[i] * data[i].value();
  mu /= total;
  double spread = 0.0;
  double s2bar = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double d = data[i].value() - mu;
    spread += w[i] * d * d;
    s2bar += w[i] * data[i].nuisance();
  }
  const NormalComponent moment{mu, std::max(0.0, spread / total - s2bar / total)};
  NormalComponent best = current;
  double best_q = normal_component_q(data, w, current);
  if (const double q = normal_component_q(data, w, moment); q > best_q) {
    best = moment;
    best_q = q;
  }
  double upper = 1.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double d = data[i].value() - mu;
    upper = std::max(upper, 4.0 * d * d);
  }
  for (int sweep = 0; sweep < 25; ++sweep) {
    NormalComponent next = best;
    next.mean = weighted_mean_given_variance(data, w, next.variance);
    if (variance_score(data, w, next.mean, 0.0) <= 0.0) {
      next.variance = 0.0;
    } else {
      double lo = 0.0;
      double hi = std::max(upper, 2.0 * next.variance + 1.0);
      while (variance_score(data, w, next.mean, hi) > 0.0 && hi < 1e12) hi *= 2.0;
      for (int it = 0; it < 60 && hi - lo > 1e-12 * (1.0 + hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (variance_score(data, w, next.mean, mid) > 0.0 ? lo : hi) = mid;
      }
      next.variance = 0.5 * (lo + hi);
    }
    const double q = normal_component_q(data, w, next);
    if (!(q > best_q)) break;
    const bool small = std::abs(q - best_q) < 1e-13 * (1.0 + std::abs(q));
    best = next;
    best_q = q;
    if (small) break;
  }
  return best;
}

struct BetaBinomialDerivatives {
  double ga = 0.0, gb = 0.0, haa = 0.0, hbb = 0.0, hab = 0.0;
};

BetaBinomialDerivatives beta_binomial_derivatives(std::span<const Observation> data,
                                                  std::span<const double> w, double total,
                                                  double a, double b) {
  using boost::math::digamma;
  using boost::math::trigamma;
  BetaBinomialDerivatives d;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (w[i] == 0.0) continue;
    const double h = data[i].value();
    const double n = data[i].nuisance();
    const double dab = digamma(a + b + n);
    const double tab = trigamma(a + b + n);
    d.ga += w[i] * (digamma(a + h) - dab);
    d.gb += w[i] * (digamma(b + n - h) - dab);
    d.haa += w[i] * (trigamma(a + h) - tab);
    d.hbb += w[i] * (trigamma(b + n - h) - tab);
    d.hab -= w[i] * tab;
  }
  const double d0 = digamma(a + b);
  const double t0 = trigamma(a + b);
  d.ga -= total * (digamma(a) - d0);
  d.gb -= total * (digamma(b) - d0);
  d.haa -= total * (trigamma(a) - t0);
  d.hbb -= total * (trigamma(b) - t0);
  d.hab += total * t0;
  return d;
}

constexpr double kLogShapeMin = -12.0;
constexpr double kLogShapeMax = 16.0;

std::vector<Observation> quantile_group(std::span<const Observation> data, std::size_t group,
                                        std::size_t groups) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return data[x].value() / data[x].nuisance() < data[y].value() / data[y].nuisance();
  });
  const std::size_t lo = group * data.size() / groups;
  std::size_t hi = (group + 1) * data.size() / groups;
  if (hi <= lo) hi = std::min(lo + 1, data.size());
  std::vector<Observation> out;
  for (std::size_t k = lo; k < hi; ++k) out.push_back(data[order[k]]);
  return out;
}

}  // namespace

double weighted_beta_binomial_loglik(std::span<const Observation> data,
                                     std::span<const double> weights, BetaComponent prior) {
  double total = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const double h = data[i].value();
    const double n = data[i].nuisance();
    acc += weights[i] * log_beta(prior.alpha + h, prior.beta + n - h);
    total += weights[i];
  }
  return acc - total * log_beta(prior.alpha, prior.beta);
}

BetaComponent fit_weighted_beta_binomial(std::span<const Observation> data,
                                         std::span<const double> weights, BetaComponent start,
                                         int max_iters) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) return start;
  double u = std::clamp(std::log(start.alpha), kLogShapeMin, kLogShapeMax);
  double v = std::clamp(std::log(start.beta), kLogShapeMin, kLogShapeMax);
  auto objective = [&](double uu, double vv) {
    return weighted_beta_binomial_loglik(data, weights, {std::exp(uu), std::exp(vv)});
  };
  double f = objective(u, v);
  const double f_start = weighted_beta_binomial_loglik(data, weights, start);
  if (f_start > f) {
    // Clamping moved us downhill; keep the caller's point.
    return start;
  }
  for (int it = 0; it < max_iters; ++it) {
    const double a = std::exp(u);
    const double b = std::exp(v);
    const auto d = beta_binomial_derivatives(data, weights, total, a, b);
    const double gu = a * d.ga;
    const double gv = b * d.gb;
    const double huu = a * a * d.haa + a * d.ga;
    const double hvv = b * b * d.hbb + b * d.gb;
    const double huv = a * b * d.hab;
    const double det = huu * hvv - huv * huv;
    double du = 0.0;
    double dv = 0.0;
    if (huu < 0.0 && det > 0.0) {
      du = -(hvv * gu - huv * gv) / det;
      dv = -(huu * gv - huv * gu) / det;
    } else {
      const double scale = 1.0 / (std::abs(huu) + std::abs(hvv) + total);
      du = gu * scale;
      dv = gv * scale;
    }
    // Newton decrement: predicted gain of the full step.
    if (gu * du + gv * dv < 1e-12 * (std::abs(f) + 1.0)) break;
    const double norm = std::hypot(du, dv);
    if (norm > 2.0) {
      du *= 2.0 / norm;
      dv *= 2.0 / norm;
    }
    double t = 1.0;
    bool moved = false;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      const double nu = std::clamp(u + t * du, kLogShapeMin, kLogShapeMax);
      const double nv = std::clamp(v + t * dv, kLogShapeMin, kLogShapeMax);
      const double fn = objective(nu, nv);
      if (std::isfinite(fn) && fn > f) {
        moved = std::abs(nu - u) + std::abs(nv - v) > 1e-11;
        u = nu;
        v = nv;
        f = fn;
        break;
      }
    }
    if (!moved) break;
  }
  return {std::exp(u), std::exp(v)};
}

BetaComponent beta_method_of_moments(std::span<const Observation> data) {
  if (data.empty()) throw ContractViolation("method of moments on empty data");
  const double n = static_cast<double>(data.size());
  double m = 0.0;
  double inv_trials = 0.0;
  for (const auto& o : data) {
    m += o.value() / o.nuisance();
    inv_trials += 1.0 / o.nuisance();
  }
  m /= n;
  inv_trials /= n;
  double var = 0.0;
  for (const auto& o : data) {
    const double d = o.value() / o.nuisance() - m;
    var += d * d;
  }
  var /= n;
  m = std::clamp(m, 1e-3, 1.0 - 1e-3);
  const double noise = m * (1.0 - m) * inv_trials;
  double prior_var = inv_trials < 1.0 ? (var - noise) / (1.0 - inv_trials) : var;
  prior_var = std::max(prior_var, m * (1.0 - m) * 1e-5);
  double concentration = m * (1.0 - m) / prior_var - 1.0;
  concentration = std::clamp(concentration, 0.5, 1e5);
  return {m * concentration, (1.0 - m) * concentration};
}

EStepResult e_step(std::span<const Observation> data, const MixtureModel& model) {
  require_data(data, model.family);
  const std::size_t n = data.size();
  const std::size_t jn = model.size();
  EStepResult out;
  out.n_components = jn;
  out.responsibilities.assign(n * jn, 0.0);
  out.log_marginal.assign(n, 0.0);

  std::vector<double> log_pi(jn);
  for (std::size_t j = 0; j < jn; ++j) {
    log_pi[j] = model.weights[j] > 0.0 ? std::log(model.weights[j])
                                       : -std::numeric_limits<double>::infinity();
  }

  std::vector<double> row(jn);
  double loglik = 0.0;
  const bool fast_normal = model.family == Family::Normal;
  std::vector<double> mean(jn), var_prior(jn);
  if (fast_normal) {
    for (std::size_t j = 0; j < jn; ++j) {
      const auto& c = std::get<NormalComponent>(model.components[j]);
      mean[j] = c.mean;
      var_prior[j] = c.variance;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < jn; ++j) {
      if (!std::isfinite(log_pi[j])) {
        row[j] = log_pi[j];
      } else if (fast_normal) {
        row[j] = log_pi[j] + normal_log_pdf(data[i].value(), mean[j], var_prior[j] + data[i].nuisance());
      } else {
        row[j] = log_pi[j] + component_log_marginal(data[i], model.components[j]);
      }
    }
    const double lse = log_sum_exp(row);
    if (!std::isfinite(lse)) {
      throw NumericError("zero or non-finite total density at case " + std::to_string(i));
    }
    out.log_marginal[i] = lse;
    loglik += lse;
    double* w = &out.responsibilities[i * jn];
    for (std::size_t j = 0; j < jn; ++j) w[j] = std::exp(row[j] - lse);
  }
  out.loglik = loglik;
  double pen = loglik;
  for (std::size_t j = 0; j < jn; ++j) {
    if (model.penalty[j] > 0.0) pen += model.penalty[j] * log_pi[j];
  }
  out.penalized_loglik = pen;
  return out;
}

MixtureModel m_step(std::span<const Observation> data, const EStepResult& estep,
                    const FitConfig& config, const MixtureModel& current) {
  require_data(data, current.family);
  const std::size_t n = data.size();
  const std::size_t jn = current.size();
  if (estep.n_cases() != n || estep.n_components != jn)
    throw ContractViolation("responsibility matrix shape does not match data and model");

  MixtureModel next = current;
  next.penalty = config.penalty_vector(n);
  if (next.penalty.size() != jn) throw ContractViolation("config J differs from the model's J");

  std::vector<double> counts(jn, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < jn; ++j) counts[j] += estep.at(i, j);
  }
  double denom = 0.0;
  for (std::size_t j = 0; j < jn; ++j) denom += counts[j] + next.penalty[j];
  for (std::size_t j = 0; j < jn; ++j) next.weights[j] = (counts[j] + next.penalty[j]) / denom;

  const bool pinned = current.null_mode == NullMode::Theoretical;
  const bool same_variance = current.family == Family::Normal && homoscedastic(data);
  std::vector<double> column(n);
  for (std::size_t j = pinned ? 1 : 0; j < jn; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = estep.at(i, j);
    const double total = counts[j];
    if (!(total > 0.0)) {
      if (next.penalty[j] > 0.0) continue;
      // Empty component: re-seed it from the data quantiles.
      if (current.family == Family::Normal) {
        next.components[j] = NormalComponent{
            quantile(values_of(data), static_cast<double>(j) / static_cast<double>(jn)), 1.0};
      } else {
        next.components[j] = beta_method_of_moments(quantile_group(data, j, jn));
      }
      continue;
    }
    if (current.family == Family::Normal) {
      if (same_variance) {
        const double s2 = data.front().nuisance();
        double mu = 0.0;
        for (std::size_t i = 0; i < n; ++i) mu += column[i] * data[i].value();
        mu /= total;
        double spread = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = data[i].value() - mu;
          spread += column[i] * d * d;
        }
        next.components[j] = NormalComponent{mu, std::max(0.0, spread / total - s2)};
      } else {
        next.components[j] = update_normal_heteroscedastic(
            data, column, total, std::get<NormalComponent>(current.components[j]));
      }
    } else {
      next.components[j] =
          fit_weighted_beta_binomial(data, column, std::get<BetaComponent>(current.components[j]));
    }
  }
  return next;
}

MixtureModel initialize(std::span<const Observation> data, const FitConfig& config, int restart) {
  config.validate();
  if (data.empty()) throw ContractViolation("no observations");
  const Family family = data.front().family();
  require_data(data, family);
  const auto jn = static_cast<std::size_t>(config.components);
  Rng rng = make_rng(config.seed, {static_cast<std::uint64_t>(restart), 0x1717ULL});
  std::normal_distribution<double> jitter(0.0, 1.0);

  MixtureModel model;
  model.family = family;
  model.null_mode = config.null_mode;
  model.penalty = config.penalty_vector(data.size());
  model.weights.assign(jn, 1.0 / static_cast<double>(jn));
  model.components.reserve(jn);
  const bool has_null = config.null_mode != NullMode::None;
  if (has_null) {
    model.weights[0] = 0.9;
    for (std::size_t j = 1; j < jn; ++j) model.weights[j] = 0.1 / static_cast<double>(jn - 1);
  }

  if (family == Family::Normal) {
    const auto z = values_of(data);
    for (std::size_t j = 0; j < jn; ++j) {
      if (j == 0 && config.null_mode == NullMode::Theoretical) {
        model.components.emplace_back(NormalComponent{0.0, 0.0});
        continue;
      }
      if (j == 0 && config.null_mode == NullMode::Empirical) {
        model.components.emplace_back(NormalComponent{median(z), 0.0});
        continue;
      }
      const double p = has_null ? static_cast<double>(j) / static_cast<double>(jn)
                                : static_cast<double>(j + 1) / static_cast<double>(jn + 1);
      double centre = quantile(z, p);
      if (restart > 0) centre += jitter(rng);
      model.components.emplace_back(NormalComponent{centre, 1.0});
    }
  } else {
    for (std::size_t j = 0; j < jn; ++j) {
      BetaComponent c = (j == 0 && has_null) ? beta_method_of_moments(data)
                                             : beta_method_of_moments(quantile_group(data, j, jn));
      if (restart > 0 && !(j == 0 && has_null)) {
        const double conc = c.alpha + c.beta;
        const double logit = std::log(c.alpha / c.beta) + 0.5 * jitter(rng);
        const double m = 1.0 / (1.0 + std::exp(-logit));
        c = BetaComponent{m * conc, (1.0 - m) * conc};
      }
      model.components.emplace_back(c);
    }
  }
  return model;
}

MixtureModel em_fit(std::span<const Observation> data, const FitConfig& config,
                    const FitObserver& observer) {
  config.validate();
  if (data.empty()) throw ContractViolation("no observations");
  const Family family = data.front().family();
  require_data(data, family);
  if (config.null_mode == NullMode::Theoretical && family != Family::Normal)
    throw ContractViolation("the theoretical null is defined for the normal family only");

  std::optional<MixtureModel> best;
  std::string last_failure;
  for (int r = 0; r < config.restarts; ++r) {
    int iteration = 0;
    try {
      MixtureModel model = initialize(data, config, r);
      EStepResult es = e_step(data, model);
      double previous = es.penalized_loglik;
      if (observer) observer(r, 0, previous);
      bool converged = false;
      for (iteration = 1; iteration <= config.max_iters; ++iteration) {
        model = m_step(data, es, config, model);
        es = e_step(data, model);
        const double current = es.penalized_loglik;
        if (!std::isfinite(current)) throw NumericError("penalized log-likelihood is not finite");
        if (observer) observer(r, iteration, current);
        if (std::abs(current - previous) / (std::abs(previous) + 1.0) < config.rel_tol) {
          converged = true;
          break;
        }
        previous = current;
      }
      model.diagnostics = FitDiagnostics{es.penalized_loglik, es.loglik,
                                         std::min(iteration, config.max_iters), converged};
      if (!best || model.diagnostics.penalized_loglik > best->diagnostics.penalized_loglik) {
        best = std::move(model);
      }
    } catch (const NumericError& e) {
      last_failure = "restart " + std::to_string(r) + ", iteration " + std::to_string(iteration) +
                     ": " + e.what();
    }
  }
  if (!best) throw FittingError("all EM restarts failed; last failure: " + last_failure);
  return *best;
}

double log_likelihood(std::span<const Observation> data, const MixtureModel& model) {
  return e_step(data, model).loglik;
}

int free_parameter_count(const MixtureModel& model) {
  int k = static_cast<int>(model.size()) - 1;
  for (std::size_t j = 0; j < model.size(); ++j) {
    if (j == 0 && model.null_mode == NullMode::Theoretical) continue;
    k += 2;
  }
  return k;
}

double bic(std::span<const Observation> data, const MixtureModel& model) {
  const double ll = log_likelihood(data, model);
  return -2.0 * ll + free_parameter_count(model) * std::log(static_cast<double>(data.size()));
}

}  // namespace ebmix
