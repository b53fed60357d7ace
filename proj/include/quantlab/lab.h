// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment driver: config files, result tables, the experiment runners and
// table comparison.
//
// Config grammar (one entry per line):
//
//   # comment                     (also after a value: "key = 1  # note")
//   key = value                   top-level keys: experiment, seed, out,
//                                 threads, json
//   [params]                      experiment parameters follow
//   key = value
//
// List values are comma separated. Numeric lists also accept
// linspace(a, b, n) and logspace(a, b, n) terms, which may be mixed with
// plain numbers. Unknown keys are rejected.

#ifndef QUANTLAB_LAB_H_
#define QUANTLAB_LAB_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "quantlab/error.h"

namespace quantlab {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum class Experiment {
  kMutualInfo,
  kDistortionSim,
  kRateSurface,
  kGradStats,
  kMi2d,
  kEntropyCompare,
  kLaplaceRd,
  kLowerBoundSweep,
};

std::string_view ExperimentName(Experiment e);
// Throws ConfigError.
Experiment ParseExperiment(std::string_view name);
const std::vector<Experiment>& AllExperiments();

struct ParamDef {
  std::string key;
  std::string default_value;  // ignored when required
  bool required = false;
  std::string help;
};

// Parameter schema of an experiment, in output order.
const std::vector<ParamDef>& ParamSchema(Experiment e);

struct ExperimentConfig {
  Experiment experiment = Experiment::kMutualInfo;
  std::uint64_t seed = 0;
  std::string output_path;
  int threads = 1;
  bool json = false;
  std::map<std::string, std::string> params;

  // Fills defaults, rejects unknown keys and reports every missing required
  // key in one ConfigError.
  void resolve();
  // Canonical text form; parses back to the same config.
  std::string to_text() const;
  // FNV-1a over the experiment, seed and parameters (not the output path,
  // thread count or format, which do not change results), as 16 hex digits.
  std::string hash() const;

  // Typed accessors; ConfigError on malformed values.
  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;
};

// Parses the grammar above. `experiment` may be absent when the caller
// supplies it (the CLI does). ConfigError on syntax errors.
ExperimentConfig parse_config(std::string_view text,
                              std::optional<Experiment> experiment = std::nullopt);
ExperimentConfig load_config(const std::string& path,
                             std::optional<Experiment> experiment = std::nullopt);

// CLI exit status for a library error: 2 for configuration problems, 3 for
// numerical failures.
int exit_code_for(ErrorCode code);

// Expands "1, linspace(0, 1, 3), logspace(0.1, 10, 3)".
std::vector<double> parse_number_list(std::string_view text);

// ---------------------------------------------------------------------------
// Result tables
// ---------------------------------------------------------------------------

enum class ColumnType { kText, kNumber };

struct Column {
  std::string name;
  ColumnType type = ColumnType::kNumber;
};

using Cell = std::variant<std::string, double>;

class ResultTable {
 public:
  ResultTable() = default;
  explicit ResultTable(std::vector<Column> columns);

  const std::vector<Column>& columns() const { return columns_; }
  const std::vector<std::vector<Cell>>& rows() const { return rows_; }
  std::size_t num_rows() const { return rows_.size(); }
  // -1 when absent.
  int column_index(std::string_view name) const;

  // Throws ShapeMismatch on a wrong cell count or type and NumericalError on
  // a non-finite number.
  void add_row(std::vector<Cell> row);

  double number(std::size_t row, std::string_view column) const;
  const std::string& text(std::size_t row, std::string_view column) const;

  // Ordered metadata, written as "# key: value" lines before the header.
  std::vector<std::pair<std::string, std::string>>& metadata() { return metadata_; }
  const std::vector<std::pair<std::string, std::string>>& metadata() const { return metadata_; }

  void write_csv(std::ostream& os) const;
  // Header and rows only; identical across reruns of one config and seed.
  std::string csv_body() const;
  void write_json(std::ostream& os) const;

  // Reads write_csv() output. Columns whose every cell parses as a number
  // become numeric.
  static ResultTable read_csv(std::istream& is);
  static ResultTable read_csv_file(const std::string& path);

 private:
  std::vector<Column> columns_;
  std::vector<std::vector<Cell>> rows_;
  std::vector<std::pair<std::string, std::string>> metadata_;
};

// %.17g.
std::string format_number(double v);

// ---------------------------------------------------------------------------
// Running experiments
// ---------------------------------------------------------------------------

struct RunOutput {
  ResultTable table;
  // Extra tables keyed by a short name ("summary"); written next to the main
  // output as <stem>_<name>.csv.
  std::vector<std::pair<std::string, ResultTable>> extra;
};

// Resolves the config, runs it and stamps metadata (config, hash, seed,
// version, wall time) on every table.
RunOutput run_experiment(ExperimentConfig config);

// Writes the main table to `path` (CSV, or JSON when `json`) plus the extra
// tables beside it. An empty path writes the main table to stdout.
void write_outputs(const RunOutput& out, const std::string& path, bool json);

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

struct Tolerance {
  double abs = 0.0;
  double rel = 0.0;
};

struct CompareOptions {
  // Per-column tolerances; columns without an entry use `fallback`.
  std::map<std::string, Tolerance> tolerances;
  Tolerance fallback;
  // When > 0, a column X with a companion X_se passes if
  // |a - b| <= se_multiple * sqrt(se_a^2 + se_b^2), in addition to the
  // absolute and relative tolerances.
  double se_multiple = 0.0;
};

struct ColumnDeviation {
  std::string column;
  double max_abs = 0.0;
  double max_rel = 0.0;
  // Largest |a - b| / sqrt(se_a^2 + se_b^2); zero without an SE column.
  double max_se_ratio = 0.0;
  std::int64_t failures = 0;
  bool pass = true;
};

struct CompareReport {
  std::vector<ColumnDeviation> columns;
  bool pass = true;
};

// Row-by-row comparison. Text columns must match exactly. ConfigError when
// the schemas or row counts differ.
CompareReport compare_tables(const ResultTable& a, const ResultTable& b,
                             const CompareOptions& options = {});
ResultTable report_table(const CompareReport& report);

}  // namespace quantlab

#endif  // QUANTLAB_LAB_H_
