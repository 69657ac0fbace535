#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <string>

#include "sae/cli/csv.hpp"
#include "sae/cli/ingest.hpp"
#include "sae/cli/report.hpp"
#include "sae/cli/run.hpp"
#include "sae/error.hpp"

#ifndef SAE_DATA_DIR
#define SAE_DATA_DIR "data"
#endif

using namespace sae;
using namespace sae::cli;

namespace {

std::string fixture_path() { return std::string(SAE_DATA_DIR) + "/seinc15.csv"; }

AreaDataset fixture() {
  std::ifstream in(fixture_path());
  return ingest_area_csv(in);
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no sae::Error thrown";
  return ErrorCode::InvalidArgument;
}

template <class F>
std::string message_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Csv, ParseErrorCarriesLine) {
  std::istringstream in("area_id,y,V\nA,1,1\nB,oops,1\n");
  const auto table = read_csv(in);
  const std::string msg = message_of([&] { ingest_area_csv(table, {}); });
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_EQ(code_of([&] { ingest_area_csv(table, {}); }), ErrorCode::ParseError);
}

TEST(Csv, RaggedRowRejected) {
  std::istringstream in("a,b\n1,2\n3\n");
  const std::string msg = message_of([&] { read_csv(in); });
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Csv, QuotedFieldRoundTrip) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  std::istringstream in("id,v\n\"a,b\",1\n");
  const auto t = read_csv(in);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][0], "a,b");
}

TEST(Csv, FullPrecisionRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, 2015485.5009117816, -1e-300, 6.02214076e23})
    EXPECT_EQ(std::stod(format_full(x)), x);
  EXPECT_EQ(format_rounded(20930.457078627176, 6), "20930.5");
}

TEST(Ingest, ZeroVarianceNamesRow) {
  std::ifstream in(std::string(SAE_DATA_DIR) + "/../tests/data/bad_v.csv");
  ASSERT_TRUE(in.good());
  const auto table = read_csv(in);
  const std::string msg = message_of([&] { ingest_area_csv(table, {}); });
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("'B'"), std::string::npos) << msg;
  EXPECT_EQ(code_of([&] { ingest_area_csv(table, {}); }), ErrorCode::ValidationError);
}

TEST(Ingest, DuplicatedCovariateIsRankDeficient) {
  std::istringstream in(
      "area_id,y,x1,x2,V\nA,1,1,1,1\nB,2,2,2,1\nC,2.5,3,3,1\nD,4,4,4,1\nE,4,5,5,1\n");
  const std::string msg = message_of([&] { ingest_area_csv(in); });
  EXPECT_NE(msg.find("rank"), std::string::npos) << msg;
  EXPECT_NE(msg.find("x2"), std::string::npos) << msg;
}

TEST(Ingest, MissingColumnRejected) {
  std::istringstream in("area_id,y\nA,1\n");
  EXPECT_EQ(code_of([&] { ingest_area_csv(in); }), ErrorCode::ValidationError);
}

TEST(Ingest, IncomeFixtureShape) {
  const auto d = fixture();
  EXPECT_EQ(d.m(), 15);
  EXPECT_EQ(d.p(), 2);
  EXPECT_EQ(d.area_ids.front(), "DE");
  for (Index i = 0; i < d.m(); ++i) EXPECT_DOUBLE_EQ(d.X(i, 0), 1.0);
}

TEST(Ingest, NoInterceptOption) {
  std::ifstream in(fixture_path());
  AreaColumns cols;
  cols.intercept = false;
  const auto d = ingest_area_csv(in, cols);
  EXPECT_EQ(d.p(), 1);
}

TEST(Report, CsvAndJsonRoundTrip) {
  RunConfig cfg;
  cfg.measures = {"PR", "MORRIS", "HB"};
  const Report r = run_fit(cfg, fixture());
  std::istringstream csv(to_csv(r));
  EXPECT_EQ(parse_report_csv(csv), r);
  std::istringstream json(to_json(r));
  EXPECT_EQ(parse_report_json(json), r);
}

TEST(Report, MetadataPresent) {
  RunConfig cfg;
  const Report r = run_fit(cfg, fixture());
  ASSERT_NE(r.find_meta("tool_version"), nullptr);
  EXPECT_EQ(*r.find_meta("tool_version"), kToolVersion);
  EXPECT_NE(to_csv(r).find("# schema_version=" + std::to_string(kSchemaVersion)), std::string::npos);
  ASSERT_NE(r.find_meta("seed"), nullptr);
  EXPECT_EQ(*r.find_meta("seed"), "20090101");
  ASSERT_NE(r.find_meta("method"), nullptr);
}

TEST(Run, SameSeedIsByteIdentical) {
  RunConfig cfg;
  cfg.measures = {"PR", "MORRIS", "HB"};
  const auto d = fixture();
  EXPECT_EQ(to_csv(run_fit(cfg, d)), to_csv(run_fit(cfg, d)));
  EXPECT_EQ(to_json(run_fit(cfg, d)), to_json(run_fit(cfg, d)));

  CoverageConfig cc;
  cc.m = 10;
  cc.B_values = {0.5};
  cc.modes = {IntervalMode::NAIVE, IntervalMode::CALIBRATED_T4};
  cc.reps = 2000;
  cc.seed = 17;
  cc.threads = 1;
  const std::string a = run_coverage(cc);
  cc.threads = 2;
  EXPECT_EQ(a, run_coverage(cc));
}

TEST(Run, EmptyMeasuresGivesPointEstimatesOnly) {
  RunConfig cfg;
  const Report r = run_fit(cfg, fixture());
  for (const auto& c : r.columns) {
    EXPECT_EQ(c.find("pr_"), std::string::npos) << c;
    EXPECT_EQ(c.find("morris_"), std::string::npos) << c;
    EXPECT_EQ(c.find("hb_"), std::string::npos) << c;
  }
  EXPECT_NO_THROW(r.column_index("eblup"));
  EXPECT_NO_THROW(r.column_index("B_hat"));
}

TEST(Run, MeasureColumnsAreConsistent) {
  RunConfig cfg;
  cfg.measures = parse_measures("pr,hb");
  const Report r = run_fit(cfg, fixture());
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    // pr_g1 already carries the bias-corrected g1 + g3 - bias term.
    const double mse = r.at(i, "pr_g1") + r.at(i, "pr_g2") + r.at(i, "pr_g3");
    EXPECT_NEAR(r.at(i, "pr_mse"), mse, 1e-9 * mse);
    const double var = r.at(i, "hb_g1") + r.at(i, "hb_g2") + r.at(i, "hb_g3");
    EXPECT_NEAR(r.at(i, "hb_var"), var, 1e-9 * var);
    EXPECT_GT(r.at(i, "B_hat"), 0.0);
    EXPECT_LT(r.at(i, "B_hat"), 1.0);
  }
  EXPECT_THROW(r.column_index("morris_g1"), std::exception);
}

TEST(RunConfig, ValidateRejectsBadInput) {
  RunConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.model = "nonsense";
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::ValidationError);
  cfg = {};
  cfg.alpha = 1.0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::ValidationError);
  cfg = {};
  cfg.output_format = "xml";
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::ValidationError);
  cfg = {};
  cfg.measures = {"BOOTSTRAP"};
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::ValidationError);
  cfg = {};
  cfg.measures = parse_measures(" pr, Hb ,PR");
  EXPECT_EQ(cfg.measures, (std::vector<std::string>{"PR", "HB"}));
  cfg.measures = parse_measures("PR,foo");
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::ValidationError);
}

TEST(Run, UnknownMethodRejected) {
  RunConfig cfg;
  cfg.method = "MOM";
  EXPECT_EQ(code_of([&] { run_fit(cfg, fixture()); }), ErrorCode::ValidationError);
}
