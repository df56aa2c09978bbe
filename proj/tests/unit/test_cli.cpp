#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "commands.hpp"
#include "ebmix/model_document.hpp"
#include "test_support.hpp"

namespace ebmix {
namespace {

using testing::slurp;
using testing::TempDir;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fdr_csv(std::uint64_t seed) {
  std::ostringstream s;
  s << "id,z\n";
  const auto z = testing::fdr_scenario_z(seed);
  s.precision(17);
  for (std::size_t i = 0; i < z.size(); ++i) s << "c" << i << ',' << z[i] << '\n';
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

TEST(CliFit, MinimalInputConverges) {
  TempDir dir;
  const auto in = dir.write("tiny.csv", "id,z\na,0.1\nb,-0.4\nc,2.5\n");
  const auto r = run({"fit", "--input", in, "--penalty", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = parse_model_document(r.out);
  EXPECT_TRUE(doc.model.diagnostics.converged);
  EXPECT_EQ(doc.model.size(), 3u);
}

TEST(CliFit, FdrScenarioNullFractionAndDeterminism) {
  TempDir dir;
  const auto in = dir.write("fdr.csv", fdr_csv(3));
  const auto a = dir.file("a.json").string();
  const auto b = dir.file("b.json").string();
  ASSERT_EQ(run({"fit", "--input", in, "--J", "3", "--penalty", "50", "--seed", "9", "--output", a}).code, 0);
  ASSERT_EQ(run({"fit", "--input", in, "--J", "3", "--penalty", "50", "--seed", "9", "--output", b}).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NEAR(parse_model_document(slurp(a)).model.weights[0], 0.95, 0.05);
}

TEST(CliFit, UsageAndParseErrors) {
  TempDir dir;
  const auto bin = dir.write("bin.csv", "id,H,N\na,1,4\nb,2,5\n");
  auto r = run({"fit", "--input", bin, "--family", "binomial", "--null", "theoretical"});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err.rfind("ERROR usage:", 0), 0u) << r.err;

  const auto bad = dir.write("bad.csv", "id,z\na,1\nb,x\n");
  r = run({"fit", "--input", bad});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err.rfind("ERROR parse:", 0), 0u) << r.err;
  EXPECT_NE(r.err.find("line 3"), std::string::npos);

  r = run({"fit", "--input", dir.file("missing.csv").string()});
  EXPECT_EQ(r.err.rfind("ERROR io:", 0), 0u) << r.err;

  r = run({"fit"});
  EXPECT_EQ(r.err.rfind("ERROR usage:", 0), 0u) << r.err;
  r = run({});
  EXPECT_NE(r.code, 0);
}

TEST(CliFit, BinomialWithoutNull) {
  TempDir dir;
  const auto bin = dir.write("bin.csv", "id,H,N\na,1,4\nb,2,5\nc,9,30\nd,0,12\n");
  const auto r = run({"fit", "--input", bin, "--family", "binomial", "--J", "1", "--null", "none"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(parse_model_document(r.out).model.family, Family::Binomial);
}

ModelDocument worked_document() {
  ModelDocument doc;
  doc.model.weights = {0.5, 0.5};
  doc.model.components = {NormalComponent{0, 0}, NormalComponent{0, 3}};
  doc.model.penalty = {0, 0};
  return doc;
}

TEST(CliEstimate, WorkedModelRow) {
  TempDir dir;
  const auto model = dir.write("m.json", to_canonical_json(worked_document()));
  const auto in = dir.write("d.csv", "id,z\nq,2\n");
  const auto r = run({"estimate", "--model", model, "--input", in, "--nearly-null", "off"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], "id,z,effect_mean,effect_var,fdr,FDR");
  std::istringstream row(rows[1]);
  std::vector<std::string> f;
  for (std::string x; std::getline(row, x, ',');) f.push_back(x);
  ASSERT_EQ(f.size(), 6u);
  EXPECT_EQ(f[0], "q");
  EXPECT_NEAR(std::stod(f[2]), 1.0372, 1e-4);
  EXPECT_NEAR(std::stod(f[3]), 0.9986, 1e-4);
  EXPECT_NEAR(std::stod(f[4]), 0.3086, 1e-4);
}

TEST(CliEstimate, PureNullModelAndEmptyInput) {
  TempDir dir;
  auto doc = worked_document();
  doc.model.weights = {1.0, 0.0};
  const auto model = dir.write("m.json", to_canonical_json(doc));
  const auto in = dir.write("d.csv", "id,z\na,-3\nb,0\nc,5\n");
  const auto r = run({"estimate", "--model", model, "--input", in});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1].substr(0, 2), "a,");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i].substr(rows[i].size() - 4), ",1,1");

  const auto empty = dir.write("e.csv", "id,z\n");
  const auto e = run({"estimate", "--model", model, "--input", empty});
  EXPECT_EQ(e.code, 0);
  EXPECT_EQ(e.out, "id,z,effect_mean,effect_var,fdr,FDR\n");
}

TEST(CliEstimate, FamilyMismatchIsAUsageError) {
  TempDir dir;
  const auto model = dir.write("m.json", to_canonical_json(worked_document()));
  const auto in = dir.write("b.csv", "id,H,N\na,1,3\n");
  const auto r = run({"estimate", "--model", model, "--input", in});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err.rfind("ERROR usage:", 0), 0u) << r.err;
}

TEST(CliEstimate, BinomialLeavesFdrColumnsBlank) {
  TempDir dir;
  ModelDocument doc;
  doc.model.family = Family::Binomial;
  doc.model.null_mode = NullMode::None;
  doc.model.weights = {1.0};
  doc.model.components = {BetaComponent{2, 3}};
  doc.model.penalty = {0};
  const auto model = dir.write("m.json", to_canonical_json(doc));
  const auto in = dir.write("b.csv", "id,H,N\na,1,3\n");
  const auto r = run({"estimate", "--model", model, "--input", in});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(r.out)[1].substr(lines(r.out)[1].size() - 2), ",,");
}

TEST(CliSimulate, EffectStudyShape) {
  TempDir dir;
  const auto r = run({"simulate", "effect", "--reps", "2", "--seed", "7", "--out-dir", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(dir.file("effect_study.csv")));
  EXPECT_EQ(rows[0], "K,mu,sided,method,rel_error");
  // oracle + mixture + six baselines
  EXPECT_EQ(rows.size() - 1, 24u * 8u);
  EXPECT_EQ(lines(slurp(dir.file("effect_summary.csv"))).size(), 9u);
}

TEST(CliSimulate, UnwritableOutDirFailsBeforeWork) {
  TempDir dir;
  const auto blocker = dir.write("file", "x");
  const auto r = run({"simulate", "effect", "--reps", "100", "--out-dir", blocker + "/sub"});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err.rfind("ERROR io:", 0), 0u) << r.err;
}

TEST(CliSimulate, FdrAndBaseballTables) {
  TempDir dir;
  auto r = run({"simulate", "fdr", "--reps", "2", "--out-dir", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(slurp(dir.file("fdr_curves.csv")))[0], "z,method,null_mode,mean,sd,truth");
  EXPECT_TRUE(std::filesystem::exists(dir.file("FDR_curves.csv")));
  EXPECT_TRUE(std::filesystem::exists(dir.file("thresholds.csv")));

  std::ostringstream csv;
  csv << "player_id,is_pitcher,H1,N1,H2,N2\n";
  for (int i = 0; i < 60; ++i) {
    csv << "p" << i << ',' << (i % 5 == 0) << ',' << (10 + i % 9) << ',' << (40 + i) << ',' << (8 + i % 7) << ','
        << (35 + i % 11) << '\n';
  }
  const auto in = dir.write("bb.csv", csv.str());
  r = run({"simulate", "baseball", "--input", in, "--J", "1", "--out-dir", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(dir.file("baseball_tse.csv")));
  EXPECT_EQ(rows.size(), 13u);
}

TEST(CliCalibrate, SingleCandidate) {
  TempDir dir;
  const auto in = dir.write("fdr.csv", fdr_csv(4));
  const auto table = dir.file("scores.csv").string();
  const auto r = run({"calibrate", "--input", in, "--candidates", "150", "--perturbed", "1", "--bootstraps", "2",
                      "--output", table});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("chosen_P,150"), std::string::npos);
  const auto rows = lines(slurp(table));
  EXPECT_EQ(rows[0], "candidate_P,perturbed_model_index,bootstrap_index,score,flagged");
  EXPECT_EQ(rows.size(), 3u);
}

TEST(CliCalibrate, BadCandidatesAndSmallData) {
  TempDir dir;
  const auto in = dir.write("small.csv", "id,z\na,1\nb,2\nc,0\n");
  auto r = run({"calibrate", "--input", in});
  EXPECT_EQ(r.err.rfind("ERROR degenerate-range:", 0), 0u) << r.err;
  r = run({"calibrate", "--input", in, "--candidates", "1,x"});
  EXPECT_EQ(r.err.rfind("ERROR usage:", 0), 0u) << r.err;
}

TEST(CliBic, SelectsTwoOnSeparatedData) {
  TempDir dir;
  std::ostringstream csv;
  csv << "id,z\n";
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  csv.precision(17);
  for (int i = 0; i < 2000; ++i) csv << i << ',' << (i % 2 ? 4.0 : -4.0) + nd(rng) << '\n';
  const auto in = dir.write("two.csv", csv.str());
  const auto r = run({"bic", "--input", in, "--J-range", "1..6"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  EXPECT_EQ(rows[0], "J,bic");
  EXPECT_EQ(rows.size(), 8u);
  EXPECT_EQ(rows.back(), "selected_J,2");
  EXPECT_NE(run({"bic", "--input", in, "--J-range", "3"}).code, 0);
}

}  // namespace
}  // namespace ebmix
