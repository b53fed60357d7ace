// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "quantlab/error.h"
#include "quantlab/infotheory.h"
#include "quantlab/lab.h"
#include "quantlab/sources.h"

namespace quantlab {
namespace {

std::optional<ErrorCode> CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

TEST(Config, ParsesGrammar) {
  const ExperimentConfig c = parse_config(
      "# header\n"
      "experiment = mutual-info\n"
      "seed = 17   # trailing comment\n"
      "threads = 2\n"
      "\n"
      "[params]\n"
      "calcs = ROUND, SUA@5\n"
      "mus = 0, 0.5\n");
  EXPECT_EQ(c.experiment, Experiment::kMutualInfo);
  EXPECT_EQ(c.seed, 17u);
  EXPECT_EQ(c.threads, 2);
  EXPECT_EQ(c.get_strings("calcs"), (std::vector<std::string>{"ROUND", "SUA@5"}));
  EXPECT_EQ(c.get_doubles("mus"), (std::vector<double>{0.0, 0.5}));
}

TEST(Config, SyntaxErrors) {
  for (const char* text : {"experiment = nope\n", "experiment = mi-2d\nbogus = 1\n",
                           "experiment = mi-2d\n[other]\n", "experiment = mi-2d\nno equals\n",
                           "experiment = mi-2d\n[params]\nrho = 1\nrho = 2\n", "seed = 1\n",
                           "experiment = mi-2d\nseed = -4\n"}) {
    EXPECT_EQ(CodeOf([&] { parse_config(text); }), ErrorCode::kConfigError) << text;
  }
  EXPECT_EQ(CodeOf([] { parse_config("experiment = mi-2d\n", Experiment::kLaplaceRd); }),
            ErrorCode::kConfigError);
  EXPECT_EQ(parse_config("seed = 3\n", Experiment::kMi2d).experiment, Experiment::kMi2d);
}

TEST(Config, UnknownAndMissingKeys) {
  ExperimentConfig c = parse_config("experiment = mi-2d\n[params]\nsigmaz = 1\n");
  try {
    c.resolve();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigError);
    EXPECT_NE(std::string(e.what()).find("sigmaz"), std::string::npos);
  }
  ExperimentConfig d = parse_config("experiment = distortion-sim\n[params]\nmus = 0\n");
  try {
    d.resolve();
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("calcs"), std::string::npos);
    EXPECT_NE(msg.find("sigmas"), std::string::npos);
    EXPECT_EQ(msg.find("mus"), std::string::npos);
  }
}

TEST(Config, DefaultsTextRoundTripAndHash) {
  ExperimentConfig c = parse_config("experiment = entropy-compare\nseed = 5\n");
  c.resolve();
  EXPECT_EQ(c.get_string("mus"), "0, 0.25, 0.5");
  ExperimentConfig back = parse_config(c.to_text());
  back.resolve();
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.hash(), c.hash());
  back.threads = 4;
  back.output_path = "elsewhere.csv";
  EXPECT_EQ(back.hash(), c.hash());
  back.seed = 6;
  EXPECT_NE(back.hash(), c.hash());
  EXPECT_EQ(c.hash().size(), 16u);
}

TEST(Config, TypedAccessors) {
  ExperimentConfig c = parse_config("experiment = mi-2d\n[params]\nrho = x\nsigmas = 1, inf\n");
  EXPECT_EQ(CodeOf([&] { c.get_double("rho"); }), ErrorCode::kConfigError);
  EXPECT_EQ(CodeOf([&] { c.get_doubles("sigmas"); }), ErrorCode::kConfigError);
  EXPECT_EQ(CodeOf([&] { c.get_int("missing"); }), ErrorCode::kConfigError);
}

TEST(NumberList, Expansions) {
  const std::vector<double> lin = parse_number_list("linspace(0, 1, 5)");
  ASSERT_EQ(lin.size(), 5u);
  EXPECT_DOUBLE_EQ(lin[1], 0.25);
  EXPECT_DOUBLE_EQ(lin.back(), 1.0);
  const std::vector<double> log = parse_number_list("logspace(0.01, 100, 5)");
  ASSERT_EQ(log.size(), 5u);
  EXPECT_NEAR(log[2], 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(log.back(), 100.0);
  const std::vector<double> mixed = parse_number_list("3, linspace(0, 1, 2), 7");
  EXPECT_EQ(mixed, (std::vector<double>{3, 0, 1, 7}));
  EXPECT_TRUE(parse_number_list("").empty());
  for (const char* bad : {"linspace(0, 1)", "logspace(-1, 1, 3)", "linspace(0, 1, 3", "1,,2", "abc"}) {
    EXPECT_THROW(parse_number_list(bad), Error) << bad;
  }
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code_for(ErrorCode::kConfigError), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::kInvalidParameter), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::kUnsupportedMethod), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::kNumericalError), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::kNonConvergence), 3);
}

ResultTable SampleTable() {
  ResultTable t({{"calc", ColumnType::kText}, {"x", ColumnType::kNumber}, {"x_se", ColumnType::kNumber}});
  t.add_row({std::string("AUN"), 0.1, 0.01});
  t.add_row({std::string("SUA@5"), 1.0 / 3.0, 0.02});
  t.metadata().push_back({"seed", "9"});
  return t;
}

TEST(ResultTable, CsvRoundTrip) {
  const ResultTable t = SampleTable();
  std::stringstream ss;
  t.write_csv(ss);
  EXPECT_EQ(ss.str().rfind("# seed: 9\n", 0), 0u);
  const ResultTable back = ResultTable::read_csv(ss);
  EXPECT_EQ(back.csv_body(), t.csv_body());
  EXPECT_EQ(back.number(1, "x"), 1.0 / 3.0);
  EXPECT_EQ(back.text(1, "calc"), "SUA@5");
  ASSERT_EQ(back.metadata().size(), 1u);
  EXPECT_EQ(back.metadata()[0].second, "9");
}

TEST(ResultTable, RejectsBadRows) {
  ResultTable t = SampleTable();
  EXPECT_EQ(CodeOf([&] { t.add_row({std::string("A"), 1.0}); }), ErrorCode::kShapeMismatch);
  EXPECT_EQ(CodeOf([&] { t.add_row({1.0, 1.0, 1.0}); }), ErrorCode::kShapeMismatch);
  EXPECT_EQ(CodeOf([&] { t.add_row({std::string("A"), std::nan(""), 1.0}); }), ErrorCode::kNumericalError);
}

TEST(ResultTable, JsonHasColumns) {
  std::stringstream ss;
  SampleTable().write_json(ss);
  EXPECT_NE(ss.str().find("\"calc\""), std::string::npos);
  EXPECT_NE(ss.str().find("SUA@5"), std::string::npos);
}

TEST(Compare, SelfAndTolerances) {
  const ResultTable a = SampleTable();
  EXPECT_TRUE(compare_tables(a, a).pass);
  ResultTable b({{"calc", ColumnType::kText}, {"x", ColumnType::kNumber}, {"x_se", ColumnType::kNumber}});
  b.add_row({std::string("AUN"), 0.1, 0.01});
  b.add_row({std::string("SUA@5"), 1.0 / 3.0 + 0.03, 0.02});
  EXPECT_FALSE(compare_tables(a, b).pass);
  CompareOptions loose;
  loose.fallback.abs = 0.05;
  EXPECT_TRUE(compare_tables(a, b, loose).pass);
  CompareOptions se;
  se.se_multiple = 3.0;
  const CompareReport r = compare_tables(a, b, se);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.columns[1].max_se_ratio, 0.03 / std::hypot(0.02, 0.02), 1e-9);
  CompareOptions per;
  per.tolerances["x"] = {0.0, 0.1};
  EXPECT_TRUE(compare_tables(a, b, per).pass);
  EXPECT_EQ(report_table(r).num_rows(), r.columns.size());
}

TEST(Compare, SchemaMismatch) {
  ResultTable other({{"calc", ColumnType::kText}, {"y", ColumnType::kNumber}, {"x_se", ColumnType::kNumber}});
  EXPECT_EQ(CodeOf([&] { compare_tables(SampleTable(), other); }), ErrorCode::kConfigError);
  ResultTable shorter({{"calc", ColumnType::kText}, {"x", ColumnType::kNumber}, {"x_se", ColumnType::kNumber}});
  EXPECT_EQ(CodeOf([&] { compare_tables(SampleTable(), shorter); }), ErrorCode::kConfigError);
  ResultTable text = SampleTable();
  ResultTable renamed({{"calc", ColumnType::kText}, {"x", ColumnType::kNumber}, {"x_se", ColumnType::kNumber}});
  renamed.add_row({std::string("AUN"), 0.1, 0.01});
  renamed.add_row({std::string("SRA@5"), 1.0 / 3.0, 0.02});
  EXPECT_FALSE(compare_tables(text, renamed).pass);
}

TEST(RunExperiment, MutualInfoTableAndReproducibility) {
  ExperimentConfig c = parse_config(
      "experiment = mutual-info\nseed = 3\n[params]\ncalcs = ROUND, AUN\nmus = 0, 0.5\nsigmas = 0.3, 1\n");
  const RunOutput a = run_experiment(c);
  ASSERT_EQ(a.table.num_rows(), 8u);
  EXPECT_EQ(a.table.text(0, "calc"), "ROUND");
  EXPECT_NEAR(a.table.number(5, "I_bits"), mi_aun(Gaussian1D(0.0, 1.0)), 1e-12);
  EXPECT_EQ(a.table.number(0, "I_minus_round_bits"), 0.0);
  c.threads = 3;
  const RunOutput b = run_experiment(c);
  EXPECT_EQ(a.table.csv_body(), b.table.csv_body());
  bool has_hash = false;
  for (const auto& [k, v] : a.table.metadata()) has_hash |= (k == "config_hash" && v == c.hash());
  EXPECT_TRUE(has_hash);
}

TEST(RunExperiment, GradStatsSmallIsDeterministic) {
  ExperimentConfig c = parse_config(
      "experiment = grad-stats\nseed = 4\n[params]\nrows = PGE:AUN, STE:SR\nsigma_q = 0.3\n"
      "n_y = 50\nn_trials = 20\n");
  const std::string a = run_experiment(c).table.csv_body();
  c.threads = 2;
  EXPECT_EQ(run_experiment(c).table.csv_body(), a);
  c.seed = 5;
  EXPECT_NE(run_experiment(c).table.csv_body(), a);
}

TEST(RunExperiment, BadParameters) {
  ExperimentConfig c = parse_config("experiment = mutual-info\n[params]\ncalcs = FOO\n");
  EXPECT_EQ(CodeOf([&] { run_experiment(c); }), ErrorCode::kConfigError);
  ExperimentConfig d = parse_config("experiment = mi-2d\n[params]\nsigmas = -1\n");
  const std::optional<ErrorCode> code = CodeOf([&] { run_experiment(d); });
  ASSERT_TRUE(code.has_value());
  EXPECT_EQ(exit_code_for(*code), 2);
}

}  // namespace
}  // namespace quantlab
