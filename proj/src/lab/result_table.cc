// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "quantlab/lab.h"

namespace quantlab {

namespace {

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

bool ParseFinite(const std::string& s, double* v) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), *v);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(*v);
}

}  // namespace

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ResultTable::ResultTable(std::vector<Column> columns) : columns_(std::move(columns)) {}

int ResultTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

void ResultTable::add_row(std::vector<Cell> row) {
  Require(row.size() == columns_.size(), ErrorCode::kShapeMismatch,
          "row has " + std::to_string(row.size()) + " cells, table has " +
              std::to_string(columns_.size()) + " columns");
  for (std::size_t i = 0; i < row.size(); ++i) {
    const bool is_number = std::holds_alternative<double>(row[i]);
    Require(is_number == (columns_[i].type == ColumnType::kNumber), ErrorCode::kShapeMismatch,
            "cell type does not match column '" + columns_[i].name + "'");
    if (is_number) {
      Require(std::isfinite(std::get<double>(row[i])), ErrorCode::kNumericalError,
              "non-finite value in column '" + columns_[i].name + "'");
    }
  }
  rows_.push_back(std::move(row));
}

double ResultTable::number(std::size_t row, std::string_view column) const {
  const int c = column_index(column);
  Require(c >= 0 && columns_[c].type == ColumnType::kNumber, ErrorCode::kShapeMismatch,
          "no numeric column '" + std::string(column) + "'");
  return std::get<double>(rows_.at(row)[c]);
}

const std::string& ResultTable::text(std::size_t row, std::string_view column) const {
  const int c = column_index(column);
  Require(c >= 0 && columns_[c].type == ColumnType::kText, ErrorCode::kShapeMismatch,
          "no text column '" + std::string(column) + "'");
  return std::get<std::string>(rows_.at(row)[c]);
}

std::string ResultTable::csv_body() const {
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i) out += ',';
    out += CsvField(columns_[i].name);
  }
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      if (const auto* d = std::get_if<double>(&row[i])) {
        out += format_number(*d);
      } else {
        out += CsvField(std::get<std::string>(row[i]));
      }
    }
    out += '\n';
  }
  return out;
}

void ResultTable::write_csv(std::ostream& os) const {
  for (const auto& [key, value] : metadata_) {
    // Multi-line values (the config) become one comment line per line.
    std::istringstream lines(value);
    std::string line;
    bool any = false;
    while (std::getline(lines, line)) {
      os << "# " << key << ": " << line << "\n";
      any = true;
    }
    if (!any) os << "# " << key << ":\n";
  }
  os << csv_body();
}

void ResultTable::write_json(std::ostream& os) const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [key, value] : metadata_) meta[key] = value;
  j["metadata"] = meta;
  nlohmann::ordered_json cols = nlohmann::ordered_json::array();
  for (const Column& c : columns_) {
    cols.push_back({{"name", c.name}, {"type", c.type == ColumnType::kNumber ? "number" : "text"}});
  }
  j["columns"] = cols;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : rows_) {
    nlohmann::ordered_json r = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (const auto* d = std::get_if<double>(&row[i])) {
        r[columns_[i].name] = *d;
      } else {
        r[columns_[i].name] = std::get<std::string>(row[i]);
      }
    }
    rows.push_back(std::move(r));
  }
  j["rows"] = rows;
  os << j.dump(2) << "\n";
}

ResultTable ResultTable::read_csv(std::istream& is) {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> raw;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::size_t colon = line.find(':');
      if (colon != std::string::npos && line.size() > 2) {
        std::string key = line.substr(2, colon - 2);
        std::string value = colon + 2 <= line.size() ? line.substr(colon + 2) : "";
        if (!meta.empty() && meta.back().first == key) {
          meta.back().second += "\n" + value;
        } else {
          meta.emplace_back(std::move(key), std::move(value));
        }
      }
      continue;
    }
    if (header.empty()) {
      header = SplitCsvLine(line);
    } else {
      raw.push_back(SplitCsvLine(line));
      Require(raw.back().size() == header.size(), ErrorCode::kConfigError,
              "CSV row " + std::to_string(raw.size()) + " has the wrong number of fields");
    }
  }
  Require(!header.empty(), ErrorCode::kConfigError, "CSV has no header row");
  std::vector<Column> cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    bool numeric = !raw.empty();
    double v = 0.0;
    for (const auto& r : raw) numeric = numeric && ParseFinite(r[c], &v);
    cols.push_back({header[c], numeric ? ColumnType::kNumber : ColumnType::kText});
  }
  ResultTable t(cols);
  for (const auto& r : raw) {
    std::vector<Cell> row;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (cols[c].type == ColumnType::kNumber) {
        double v = 0.0;
        ParseFinite(r[c], &v);
        row.emplace_back(v);
      } else {
        row.emplace_back(r[c]);
      }
    }
    t.add_row(std::move(row));
  }
  t.metadata_ = std::move(meta);
  return t;
}

ResultTable ResultTable::read_csv_file(const std::string& path) {
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorCode::kConfigError, "cannot read table '" + path + "'");
  return read_csv(in);
}

}  // namespace quantlab
