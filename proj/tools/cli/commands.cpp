#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ebmix/baseball.hpp"
#include "ebmix/calibration.hpp"
#include "ebmix/data_io.hpp"
#include "ebmix/errors.hpp"
#include "ebmix/harness.hpp"
#include "ebmix/inference.hpp"
#include "ebmix/mixture.hpp"
#include "ebmix/model_document.hpp"

namespace ebmix::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error("usage", what) {}
};

std::vector<CaseRecord> load_cases(const std::string& path, Family family) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open input '" + path + "'");
  return read_cases_csv(in, family);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// Creates the directory and proves it is writable before any work starts.
fs::path prepare_out_dir(const std::string& dir) {
  const fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec && !fs::is_directory(p)) throw IoError("cannot create output directory '" + dir + "'");
  const fs::path probe = p / ".ebmix-write-probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
  return p;
}

NullMode resolve_null(const std::string& text, Family family) {
  if (text.empty()) return family == Family::Normal ? NullMode::Theoretical : NullMode::None;
  const NullMode mode = parse_null_mode(text);
  if (family == Family::Binomial && mode != NullMode::None) {
    throw UsageError("--null " + text + " needs a null rate, which the binomial family does not take; use --null none");
  }
  return mode;
}

std::pair<int, int> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw UsageError("--J-range must look like a..b");
  try {
    const int a = std::stoi(text.substr(0, dots));
    const int b = std::stoi(text.substr(dots + 2));
    if (a < 1 || b < a) throw UsageError("--J-range needs 1 <= a <= b");
    return {a, b};
  } catch (const std::logic_error&) {
    throw UsageError("--J-range must look like a..b");
  }
}

std::vector<double> parse_number_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError(std::string(flag) + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw UsageError(std::string(flag) + " needs at least one value");
  return out;
}

MixtureMethod parse_mixture(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("--mixture must look like J:P");
  try {
    MixtureMethod m;
    m.components = std::stoi(text.substr(0, colon));
    m.penalty = std::stod(text.substr(colon + 1));
    return m;
  } catch (const std::logic_error&) {
    throw UsageError("--mixture must look like J:P");
  }
}

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

struct FitArgs {
  std::string input;
  std::string family = "normal";
  int components = 3;
  std::optional<double> penalty;
  std::string null_mode;
  std::uint64_t seed = 0;
  int restarts = 3;
  int max_iters = 1000;
  double rel_tol = 1e-8;
  std::string output;
  std::string timestamp = "unset";
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const Family family = parse_family(a.family);
  const NullMode mode = resolve_null(a.null_mode, family);
  const auto cases = load_cases(a.input, family);
  const auto data = observations_of(cases);
  FitConfig cfg;
  cfg.components = a.components;
  cfg.penalty = a.penalty;
  cfg.null_mode = mode;
  cfg.seed = a.seed;
  cfg.restarts = a.restarts;
  cfg.max_iters = a.max_iters;
  cfg.rel_tol = a.rel_tol;
  ModelDocument doc;
  doc.model = em_fit(data, cfg);
  doc.seed = a.seed;
  doc.fit_timestamp = a.timestamp;
  const std::string text = to_canonical_json(doc);
  if (a.output.empty()) {
    out << text;
  } else {
    write_file(a.output, text);
  }
  return 0;
}

struct EstimateArgs {
  std::string model;
  std::string input;
  std::string nearly_null = "on";
  double mean_tol = kDefaultNearlyNullMeanTol;
  double var_tol = kDefaultNearlyNullVarTol;
  std::string output;
};

int cmd_estimate(const EstimateArgs& a, std::ostream& out) {
  if (a.nearly_null != "on" && a.nearly_null != "off") throw UsageError("--nearly-null must be on or off");
  const ModelDocument doc = parse_model_document(read_file(a.model));
  const MixtureModel& model = doc.model;
  std::ifstream probe(a.input);
  if (!probe) throw IoError("cannot open input '" + a.input + "'");
  std::string header;
  std::getline(probe, header);
  const bool binomial_header = header.rfind("id,H,N", 0) == 0;
  if (binomial_header != (model.family == Family::Binomial)) {
    throw UsageError("model family '" + std::string(to_string(model.family)) + "' does not match the input data");
  }
  const auto cases = load_cases(a.input, model.family);
  const NullGrouping grouping = (a.nearly_null == "on" && model.family == Family::Normal)
                                    ? nearly_null_grouping(model, a.mean_tol, a.var_tol)
                                    : explicit_null(model);
  std::ostringstream csv;
  csv << "id,z,effect_mean,effect_var,fdr,FDR\n";
  for (const auto& c : cases) {
    const auto s = posterior_summary(c.observation, model, grouping);
    csv << c.id << ',' << format_number(c.observation.value()) << ',' << format_number(s.effect_mean) << ','
        << format_number(s.effect_var) << ',' << opt(s.fdr) << ',' << opt(s.tail_fdr) << '\n';
  }
  if (a.output.empty()) {
    out << csv.str();
  } else {
    write_file(a.output, csv.str());
  }
  return 0;
}

struct SimulateArgs {
  std::string kind;
  int reps = 100;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::string> mixtures;
  int components = -1;
  std::optional<double> penalty;
  int restarts = 3;
  std::string input;
};

int simulate_effect(const SimulateArgs& a, const fs::path& dir, std::ostream& out) {
  EffectStudyConfig cfg;
  cfg.reps = a.reps;
  cfg.seed = a.seed;
  cfg.mixtures.clear();
  if (a.mixtures.empty()) {
    MixtureMethod m;
    if (a.components > 0) m.components = a.components;
    if (a.penalty) m.penalty = *a.penalty;
    m.restarts = a.restarts;
    cfg.mixtures.push_back(m);
  }
  for (const auto& text : a.mixtures) {
    MixtureMethod m = parse_mixture(text);
    m.restarts = a.restarts;
    cfg.mixtures.push_back(m);
  }
  cfg.baselines = default_baselines();
  const auto result = run_effect_study(cfg);
  std::ostringstream rows;
  rows << "K,mu,sided,method,rel_error\n";
  for (const auto& r : result.rows) {
    rows << r.k << ',' << format_number(r.mu) << ',' << (r.two_sided ? "two" : "one") << ',' << r.method << ','
         << format_number(r.rel_error) << '\n';
  }
  write_file(dir / "effect_study.csv", rows.str());
  std::ostringstream summary;
  summary << "method,mean_rel_error,median_rel_error\n";
  for (const auto& s : result.summary) {
    summary << s.method << ',' << format_number(s.mean_rel_error) << ',' << format_number(s.median_rel_error)
            << '\n';
  }
  write_file(dir / "effect_summary.csv", summary.str());
  out << summary.str();
  return 0;
}

int simulate_fdr(const SimulateArgs& a, const fs::path& dir, std::ostream& out) {
  FdrStudyConfig cfg;
  cfg.reps = a.reps;
  cfg.seed = a.seed;
  if (a.components > 0) cfg.components = a.components;
  if (a.penalty) cfg.penalty = *a.penalty;
  cfg.restarts = a.restarts;
  const auto result = run_fdr_study(cfg);
  auto curves = [](const std::vector<CurveStat>& stats) {
    std::ostringstream s;
    s << "z,method,null_mode,mean,sd,truth\n";
    for (const auto& c : stats) {
      s << format_number(c.z) << ',' << c.method << ',' << to_string(c.null_mode) << ',' << format_number(c.mean)
        << ',' << format_number(c.sd) << ',' << format_number(c.truth) << '\n';
    }
    return s.str();
  };
  write_file(dir / "fdr_curves.csv", curves(result.fdr));
  write_file(dir / "FDR_curves.csv", curves(result.tail_fdr));
  std::ostringstream t;
  t << "q,kind,method,null_mode,mean,sd,truth,missing\n";
  for (const auto& s : result.thresholds) {
    t << format_number(s.q) << ',' << s.kind << ',' << s.method << ',' << to_string(s.null_mode) << ','
      << format_number(s.mean) << ',' << format_number(s.sd) << ',' << format_number(s.truth) << ',' << s.missing
      << '\n';
  }
  write_file(dir / "thresholds.csv", t.str());
  out << t.str();
  return 0;
}

int simulate_baseball(const SimulateArgs& a, const fs::path& dir, std::ostream& out) {
  std::vector<BaseballRecord> records;
  if (a.input.empty()) {
    records = synthetic_season(a.seed).records;
  } else {
    std::ifstream in(a.input);
    if (!in) throw IoError("cannot open input '" + a.input + "'");
    records = read_baseball_csv(in);
  }
  BaseballConfig cfg;
  cfg.seed = a.seed;
  cfg.restarts = a.restarts;
  if (a.components > 0) cfg.components = a.components;
  if (a.penalty) cfg.penalty = *a.penalty;
  const auto result = run_baseball(records, cfg);
  std::ostringstream s;
  s << "method,group,tse,normalized_tse,n_train,n_test,excluded\n";
  for (const auto& r : result.rows) {
    s << r.method << ',' << r.group << ',' << format_number(r.tse) << ',' << format_number(r.normalized_tse) << ','
      << r.n_train << ',' << r.n_test << ',' << r.excluded << '\n';
  }
  write_file(dir / "baseball_tse.csv", s.str());
  out << s.str();
  return 0;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.kind != "effect" && a.kind != "fdr" && a.kind != "baseball")
    throw UsageError("simulate needs one of effect, fdr, baseball");
  if (a.reps < 1) throw UsageError("--reps must be >= 1");
  const fs::path dir = prepare_out_dir(a.out_dir);
  if (a.kind == "effect") return simulate_effect(a, dir, out);
  if (a.kind == "fdr") return simulate_fdr(a, dir, out);
  return simulate_baseball(a, dir, out);
}

struct CalibrateArgs {
  std::string input;
  std::string candidates = "auto";
  std::string null_mode = "empirical";
  int components = 3;
  std::uint64_t seed = 0;
  int restarts = 3;
  std::optional<double> preliminary;
  int perturbed = 4;
  int bootstraps = 20;
  std::string output;
};

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
  const NullMode mode = resolve_null(a.null_mode, Family::Normal);
  if (mode == NullMode::None) throw UsageError("calibrate needs --null theoretical or empirical");
  if (!a.output.empty()) {
    std::ofstream probe(a.output);
    if (!probe) throw IoError("cannot write '" + a.output + "'");
  }
  const auto data = observations_of(load_cases(a.input, Family::Normal));
  CalibrationPlan plan;
  if (a.candidates == "auto") {
    plan = default_plan(data.size());
  } else {
    plan.candidates = parse_number_list(a.candidates, "--candidates");
    plan.preliminary_penalty = static_cast<double>(data.size()) / 5.0;
  }
  if (a.preliminary) plan.preliminary_penalty = *a.preliminary;
  plan.perturbed_models = a.perturbed;
  plan.bootstraps = a.bootstraps;
  plan.seed = a.seed;
  FitConfig cfg;
  cfg.components = a.components;
  cfg.null_mode = mode;
  cfg.restarts = a.restarts;
  cfg.seed = a.seed;
  const auto result = calibrate_penalty(data, cfg, plan);
  std::ostringstream table;
  table << "candidate_P,perturbed_model_index,bootstrap_index,score,flagged\n";
  for (const auto& c : result.cells) {
    table << format_number(c.penalty) << ',' << c.perturbed << ',' << c.bootstrap << ',' << format_number(c.score)
          << ',' << (c.flagged ? 1 : 0) << '\n';
  }
  if (!a.output.empty()) write_file(a.output, table.str());
  out << "candidate_P,mean_score\n";
  for (std::size_t k = 0; k < plan.candidates.size(); ++k) {
    out << format_number(plan.candidates[k]) << ',' << format_number(result.mean_scores[k]) << '\n';
  }
  out << "chosen_P," << format_number(result.chosen_penalty) << '\n';
  return 0;
}

struct BicArgs {
  std::string input;
  std::string family = "normal";
  std::string range = "1..6";
  std::string null_mode = "none";
  double penalty = 0.0;
  std::uint64_t seed = 0;
  int restarts = 3;
};

int cmd_bic(const BicArgs& a, std::ostream& out) {
  const Family family = parse_family(a.family);
  const NullMode mode = resolve_null(a.null_mode, family);
  const auto [lo, hi] = parse_range(a.range);
  if (mode != NullMode::None && lo < 2) throw UsageError("--J-range must start at 2 or more when a null is used");
  const auto data = observations_of(load_cases(a.input, family));
  out << "J,bic\n";
  int best_j = lo;
  double best = std::numeric_limits<double>::infinity();
  for (int j = lo; j <= hi; ++j) {
    FitConfig cfg;
    cfg.components = j;
    cfg.null_mode = mode;
    cfg.penalty = a.penalty;
    cfg.seed = a.seed;
    cfg.restarts = a.restarts;
    const double score = bic(data, em_fit(data, cfg));
    out << j << ',' << format_number(score) << '\n';
    if (score < best) {
      best = score;
      best_j = j;
    }
  }
  out << "selected_J," << best_j << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Empirical Bayes mixture-prior estimation of effect sizes and false discovery rates", "ebmix"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a mixture prior by penalized EM and print the model JSON");
  fit_cmd->add_option("--input", fit.input, "CSV of cases")->required();
  fit_cmd->add_option("--family", fit.family, "normal or binomial")->check(CLI::IsMember({"normal", "binomial"}));
  fit_cmd->add_option("--J", fit.components, "Number of mixture components");
  fit_cmd->add_option("--penalty", fit.penalty, "Null pseudo-count P (default N/5)");
  fit_cmd->add_option("--null", fit.null_mode, "theoretical, empirical or none")
      ->check(CLI::IsMember({"theoretical", "empirical", "none"}));
  fit_cmd->add_option("--seed", fit.seed);
  fit_cmd->add_option("--restarts", fit.restarts);
  fit_cmd->add_option("--max-iters", fit.max_iters);
  fit_cmd->add_option("--rel-tol", fit.rel_tol);
  fit_cmd->add_option("--output", fit.output, "Write the model here instead of stdout");
  fit_cmd->add_option("--timestamp", fit.timestamp, "Value recorded as fit_timestamp");

  EstimateArgs est;
  auto* est_cmd = app.add_subcommand("estimate", "Per-case effect sizes, fdr and FDR from a fitted model");
  est_cmd->add_option("--model", est.model)->required();
  est_cmd->add_option("--input", est.input)->required();
  est_cmd->add_option("--nearly-null", est.nearly_null, "on or off");
  est_cmd->add_option("--mean-tol", est.mean_tol);
  est_cmd->add_option("--var-tol", est.var_tol);
  est_cmd->add_option("--output", est.output);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the effect, fdr or baseball study");
  sim_cmd->add_option("kind", sim.kind, "effect, fdr or baseball")->required();
  sim_cmd->add_option("--reps", sim.reps);
  sim_cmd->add_option("--seed", sim.seed);
  sim_cmd->add_option("--out-dir", sim.out_dir)->required();
  sim_cmd->add_option("--mixture", sim.mixtures, "Mixture method J:P (effect study; repeatable)");
  sim_cmd->add_option("--J", sim.components);
  sim_cmd->add_option("--penalty", sim.penalty);
  sim_cmd->add_option("--restarts", sim.restarts);
  sim_cmd->add_option("--input", sim.input, "Baseball CSV (baseball study)");

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Choose the penalty P by parametric bootstrap");
  cal_cmd->add_option("--input", cal.input)->required();
  cal_cmd->add_option("--candidates", cal.candidates, "auto or a comma-separated list");
  cal_cmd->add_option("--null", cal.null_mode)->check(CLI::IsMember({"theoretical", "empirical"}));
  cal_cmd->add_option("--J", cal.components);
  cal_cmd->add_option("--seed", cal.seed);
  cal_cmd->add_option("--restarts", cal.restarts);
  cal_cmd->add_option("--preliminary-penalty", cal.preliminary);
  cal_cmd->add_option("--perturbed", cal.perturbed);
  cal_cmd->add_option("--bootstraps", cal.bootstraps);
  cal_cmd->add_option("--output", cal.output, "Score table CSV");

  BicArgs bic_args;
  auto* bic_cmd = app.add_subcommand("bic", "Score a range of J by BIC");
  bic_cmd->add_option("--input", bic_args.input)->required();
  bic_cmd->add_option("--family", bic_args.family)->check(CLI::IsMember({"normal", "binomial"}));
  bic_cmd->add_option("--J-range", bic_args.range, "a..b");
  bic_cmd->add_option("--null", bic_args.null_mode)->check(CLI::IsMember({"theoretical", "empirical", "none"}));
  bic_cmd->add_option("--penalty", bic_args.penalty);
  bic_cmd->add_option("--seed", bic_args.seed);
  bic_cmd->add_option("--restarts", bic_args.restarts);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "ERROR usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit, out);
    if (est_cmd->parsed()) return cmd_estimate(est, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim, out);
    if (cal_cmd->parsed()) return cmd_calibrate(cal, out);
    if (bic_cmd->parsed()) return cmd_bic(bic_args, out);
  } catch (const UsageError& e) {
    err << "ERROR usage: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "ERROR " << e.category() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "ERROR internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace ebmix::cli
