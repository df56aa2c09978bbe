#include "ebmix/baseball.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "ebmix/errors.hpp"
#include "ebmix/harness.hpp"
#include "ebmix/numeric.hpp"
#include "ebmix/random.hpp"

namespace ebmix {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string trim(std::string s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

int parse_int(const std::string& text, const char* field, std::size_t line) {
  int value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(std::string("field ") + field + " is not an integer: '" + text + "'", line);
  }
  return value;
}

bool parse_flag(const std::string& text, std::size_t line) {
  if (text == "1" || text == "true" || text == "TRUE" || text == "True") return true;
  if (text == "0" || text == "false" || text == "FALSE" || text == "False") return false;
  throw ParseError("is_pitcher must be 0/1 or true/false, got '" + text + "'", line);
}

const QuadratureRule& cached_rule(std::size_t nodes) {
  static const QuadratureRule rule256 = gauss_legendre(256, 0.0, 1.0);
  static const QuadratureRule rule1024 = gauss_legendre(1024, 0.0, 1.0);
  if (nodes == 256) return rule256;
  if (nodes == 1024) return rule1024;
  throw ContractViolation("posterior quadrature supports 256 or 1024 nodes");
}

// E(arcsin sqrt(x)) under Beta(a, b), self-normalized on the rule.
double beta_arcsine_mean(double a, double b, const QuadratureRule& rule) {
  const std::size_t n = rule.nodes.size();
  std::vector<double> logs(n);
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    const double x = rule.nodes[k];
    logs[k] = std::log(rule.weights[k]) + (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x);
    hi = std::max(hi, logs[k]);
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = std::exp(logs[k] - hi);
    num += w * std::asin(std::sqrt(rule.nodes[k]));
    den += w;
  }
  return num / den;
}

}  // namespace

std::vector<BaseballRecord> read_baseball_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  ++line_no;
  if (trim(line) != "player_id,is_pitcher,H1,N1,H2,N2") {
    throw ParseError("expected header player_id,is_pitcher,H1,N1,H2,N2", line_no);
  }
  std::vector<BaseballRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 6) throw ParseError("expected 6 fields, got " + std::to_string(fields.size()), line_no);
    for (auto& f : fields) f = trim(f);
    BaseballRecord r;
    r.player_id = fields[0];
    r.is_pitcher = parse_flag(fields[1], line_no);
    r.hits_first = parse_int(fields[2], "H1", line_no);
    r.at_bats_first = parse_int(fields[3], "N1", line_no);
    if (r.hits_first < 0 || r.hits_first > r.at_bats_first) throw ParseError("need 0 <= H1 <= N1", line_no);
    if (fields[4].empty() != fields[5].empty()) throw ParseError("H2 and N2 must both be present or both blank", line_no);
    if (!fields[4].empty()) {
      r.hits_second = parse_int(fields[4], "H2", line_no);
      r.at_bats_second = parse_int(fields[5], "N2", line_no);
      if (*r.hits_second < 0 || *r.hits_second > *r.at_bats_second)
        throw ParseError("need 0 <= H2 <= N2", line_no);
    }
    out.push_back(std::move(r));
  }
  return out;
}

double arcsine_transform(int hits, int at_bats) {
  return std::asin(std::sqrt((hits + 0.25) / (at_bats + 0.5)));
}

double posterior_arcsine_mean(const Observation& obs, const MixtureModel& model, std::size_t nodes) {
  if (model.family != Family::Binomial || obs.family() != Family::Binomial)
    throw ContractViolation("posterior arcsine mean needs a binomial model and observation");
  const QuadratureRule& rule = cached_rule(nodes);
  const std::size_t jn = model.size();
  std::vector<double> logs(jn);
  for (std::size_t j = 0; j < jn; ++j) {
    logs[j] = model.weights[j] > 0.0
                  ? std::log(model.weights[j]) + component_log_marginal(obs, model.components[j])
                  : -std::numeric_limits<double>::infinity();
  }
  const double lse = log_sum_exp(logs);
  if (!std::isfinite(lse)) throw NumericError("marginal probability is zero for this observation");
  double out = 0.0;
  for (std::size_t j = 0; j < jn; ++j) {
    const double p = std::exp(logs[j] - lse);
    if (p == 0.0) continue;
    const auto post = component_posterior(obs, model.components[j]).beta_shape.value();
    out += p * beta_arcsine_mean(post.alpha, post.beta, rule);
  }
  return out;
}

double total_squared_error(std::span<const double> estimates, std::span<const double> held_out,
                           std::span<const int> held_out_at_bats) {
  if (estimates.size() != held_out.size() || held_out.size() != held_out_at_bats.size())
    throw ContractViolation("TSE inputs differ in length");
  double tse = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double d = estimates[i] - held_out[i];
    tse += d * d - 1.0 / (4.0 * held_out_at_bats[i]);
  }
  return tse;
}

double beta_mixture_mean(const MixtureModel& model) {
  double m = 0.0;
  for (std::size_t j = 0; j < model.size(); ++j) {
    const auto& c = std::get<BetaComponent>(model.components[j]);
    m += model.weights[j] * c.alpha / (c.alpha + c.beta);
  }
  return m;
}

BaseballResult run_baseball(std::span<const BaseballRecord> records, const BaseballConfig& config) {
  BaseballResult result;
  struct Group {
    const char* name;
    int which;  // -1 all, 1 pitchers, 0 non-pitchers
  };
  for (const Group group : {Group{"overall", -1}, Group{"pitchers", 1}, Group{"nonpitchers", 0}}) {
    std::vector<const BaseballRecord*> train;
    for (const auto& r : records) {
      if (group.which >= 0 && r.is_pitcher != (group.which == 1)) continue;
      if (r.at_bats_first >= config.min_at_bats) train.push_back(&r);
    }
    if (train.empty()) continue;
    std::vector<const BaseballRecord*> test;
    std::size_t excluded = 0;
    for (const auto* r : train) {
      if (!r->at_bats_second) {
        ++excluded;
      } else if (*r->at_bats_second >= config.min_at_bats) {
        test.push_back(r);
      }
    }

    std::vector<Observation> obs;
    obs.reserve(train.size());
    for (const auto* r : train) obs.push_back(Observation::binomial(r->hits_first, r->at_bats_first));
    FitConfig cfg;
    cfg.components = config.components;
    cfg.penalty = config.penalty;
    cfg.null_mode = NullMode::None;
    cfg.restarts = config.restarts;
    cfg.seed = config.seed;
    const MixtureModel model = em_fit(obs, cfg);
    result.models.push_back(model);

    std::vector<double> train_x;
    train_x.reserve(train.size());
    for (const auto* r : train) train_x.push_back(arcsine_transform(r->hits_first, r->at_bats_first));
    const double grand_mean = std::accumulate(train_x.begin(), train_x.end(), 0.0) /
                              static_cast<double>(train_x.size());
    double avg_var = 0.0;
    for (const auto* r : train) avg_var += 1.0 / (4.0 * r->at_bats_first);
    avg_var /= static_cast<double>(train.size());
    const auto js_train = james_stein(train_x, true, avg_var);

    std::vector<double> held_out, naive, mean_est, js_est, mix_est;
    std::vector<int> held_n;
    for (const auto* r : test) {
      held_out.push_back(arcsine_transform(*r->hits_second, *r->at_bats_second));
      held_n.push_back(*r->at_bats_second);
      naive.push_back(arcsine_transform(r->hits_first, r->at_bats_first));
      mean_est.push_back(grand_mean);
      const auto idx = static_cast<std::size_t>(std::find(train.begin(), train.end(), r) - train.begin());
      js_est.push_back(js_train[idx]);
      mix_est.push_back(posterior_arcsine_mean(Observation::binomial(r->hits_first, r->at_bats_first), model));
    }
    const double naive_tse = total_squared_error(naive, held_out, held_n);
    auto add = [&](const char* method, const std::vector<double>& est) {
      BaseballRow row;
      row.method = method;
      row.group = group.name;
      row.tse = total_squared_error(est, held_out, held_n);
      row.normalized_tse = row.tse / naive_tse;
      row.n_train = train.size();
      row.n_test = test.size();
      row.excluded = excluded;
      result.rows.push_back(row);
    };
    add("naive", naive);
    add("grand_mean", mean_est);
    add("james_stein", js_est);
    add("binomial_mixture", mix_est);
  }
  return result;
}

SyntheticSeason synthetic_season(std::uint64_t seed, double alpha, double beta) {
  SyntheticSeason season;
  Rng rng = make_rng(seed, {0xBA5EBA11ULL});
  std::gamma_distribution<double> ga(alpha, 1.0);
  std::gamma_distribution<double> gb(beta, 1.0);
  std::uniform_int_distribution<int> pitcher_ab(11, 70);
  std::uniform_int_distribution<int> regular_ab(11, 320);
  std::uniform_int_distribution<int> short_ab(0, 10);
  std::bernoulli_distribution drops_out(0.12);
  constexpr int kPitchers = 81;
  constexpr int kPlayers = 567;
  for (int i = 0; i < kPlayers; ++i) {
    const bool pitcher = i < kPitchers;
    const double x = ga(rng);
    const double rate = x / (x + gb(rng));
    BaseballRecord r;
    r.player_id = "p" + std::to_string(i);
    r.is_pitcher = pitcher;
    r.at_bats_first = pitcher ? pitcher_ab(rng) : regular_ab(rng);
    const int second = drops_out(rng) ? short_ab(rng) : (pitcher ? pitcher_ab(rng) : regular_ab(rng));
    std::binomial_distribution<int> first_hits(r.at_bats_first, rate);
    std::binomial_distribution<int> second_hits(second, rate);
    r.hits_first = first_hits(rng);
    r.at_bats_second = second;
    r.hits_second = second > 0 ? second_hits(rng) : 0;
    season.records.push_back(std::move(r));
    season.true_rates.push_back(rate);
  }
  return season;
}

}  // namespace ebmix
