// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "quantlab/lab.h"

namespace quantlab {

CompareReport compare_tables(const ResultTable& a, const ResultTable& b,
                             const CompareOptions& options) {
  const auto& ca = a.columns();
  const auto& cb = b.columns();
  bool same_schema = ca.size() == cb.size();
  for (std::size_t i = 0; same_schema && i < ca.size(); ++i) {
    same_schema = ca[i].name == cb[i].name && ca[i].type == cb[i].type;
  }
  if (!same_schema) {
    std::string msg = "schemas differ:";
    for (const Column& c : ca) msg += " " + c.name;
    msg += " vs";
    for (const Column& c : cb) msg += " " + c.name;
    throw Error(ErrorCode::kConfigError, msg);
  }
  Require(a.num_rows() == b.num_rows(), ErrorCode::kConfigError,
          "row counts differ: " + std::to_string(a.num_rows()) + " vs " +
              std::to_string(b.num_rows()));

  CompareReport report;
  for (std::size_t c = 0; c < ca.size(); ++c) {
    ColumnDeviation dev;
    dev.column = ca[c].name;
    if (ca[c].type == ColumnType::kText) {
      for (std::size_t r = 0; r < a.num_rows(); ++r) {
        if (std::get<std::string>(a.rows()[r][c]) != std::get<std::string>(b.rows()[r][c])) {
          ++dev.failures;
        }
      }
    } else {
      auto tol_it = options.tolerances.find(dev.column);
      const Tolerance tol = tol_it == options.tolerances.end() ? options.fallback : tol_it->second;
      const int se_col = options.se_multiple > 0.0 ? a.column_index(dev.column + "_se") : -1;
      for (std::size_t r = 0; r < a.num_rows(); ++r) {
        const double va = std::get<double>(a.rows()[r][c]);
        const double vb = std::get<double>(b.rows()[r][c]);
        const double d = std::abs(va - vb);
        const double scale = std::max(std::abs(va), std::abs(vb));
        const double rel = scale > 0.0 ? d / scale : 0.0;
        dev.max_abs = std::max(dev.max_abs, d);
        dev.max_rel = std::max(dev.max_rel, rel);
        bool ok = d <= tol.abs || rel <= tol.rel;
        if (se_col >= 0) {
          const double sa = std::get<double>(a.rows()[r][se_col]);
          const double sb = std::get<double>(b.rows()[r][se_col]);
          const double se = std::hypot(sa, sb);
          if (se > 0.0) {
            dev.max_se_ratio = std::max(dev.max_se_ratio, d / se);
            ok = ok || d <= options.se_multiple * se;
          }
        }
        if (!ok) ++dev.failures;
      }
    }
    dev.pass = dev.failures == 0;
    report.pass = report.pass && dev.pass;
    report.columns.push_back(std::move(dev));
  }
  return report;
}

ResultTable report_table(const CompareReport& report) {
  ResultTable t({{"column", ColumnType::kText},
                 {"max_abs", ColumnType::kNumber},
                 {"max_rel", ColumnType::kNumber},
                 {"max_se_ratio", ColumnType::kNumber},
                 {"failures", ColumnType::kNumber},
                 {"pass", ColumnType::kText}});
  for (const ColumnDeviation& d : report.columns) {
    t.add_row({d.column, d.max_abs, d.max_rel, d.max_se_ratio, static_cast<double>(d.failures),
               std::string(d.pass ? "true" : "false")});
  }
  return t;
}

}  // namespace quantlab
