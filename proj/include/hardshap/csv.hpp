/*
 * Copyright 2026 The hardshap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Plain comma-separated files: one header row, '.' decimal point, no quoting.
// Lines starting with '#' are comments and are skipped on read.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hardshap/common.hpp"
#include "hardshap/dataset.hpp"

namespace hardshap {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or -1.
  long column(std::string_view name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return static_cast<long>(c);
    return -1;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    auto field = trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"')
      field = field.substr(1, field.size() - 2);
    out.emplace_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline double parse_double(std::string_view text, std::string_view what) {
  text = detail::trim(text);
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw InvalidInput("non-numeric value '" + std::string(text) + "' in " + std::string(what));
  return value;
}

inline std::uint64_t parse_uint(std::string_view text, std::string_view what) {
  text = detail::trim(text);
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw InvalidInput("invalid integer '" + std::string(text) + "' in " + std::string(what));
  return value;
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open file: " + path.string());
  Table table;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto fields = detail::split_fields(view);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(table.header.size()) + " fields, got " +
                         std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw InvalidInput("empty file: " + path.string());
  return table;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Comment lines (without the leading '#') are written first.
inline std::string comment_block(const std::vector<std::string>& comments) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  return out;
}

// Reads a dataset. A column named "id" (other than the label column) supplies
// the row ids; otherwise ids are 0..n-1 in file order.
inline Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  const Table table = read_table(path);
  std::size_t label_hits = 0;
  for (const auto& h : table.header) label_hits += (h == label_column);
  if (label_hits == 0) throw InvalidInput("label column '" + label_column + "' not found in " + path.string());
  if (label_hits > 1) throw InvalidInput("duplicate label column '" + label_column + "' in " + path.string());
  if (table.rows.empty()) throw InvalidInput("no data rows in " + path.string());

  const auto label_col = static_cast<std::size_t>(table.column(label_column));
  const long id_col = label_column == "id" ? -1 : table.column("id");
  std::vector<std::size_t> feature_cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == label_col || static_cast<long>(c) == id_col) continue;
    feature_cols.push_back(c);
    names.push_back(table.header[c]);
  }
  if (feature_cols.empty()) throw InvalidInput("no feature columns in " + path.string());

  const std::size_t n = table.rows.size(), d = feature_cols.size();
  std::vector<double> feats;
  feats.reserve(n * d);
  std::vector<Label> labels;
  std::vector<RowId> ids;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = table.rows[r];
    for (auto c : feature_cols) feats.push_back(parse_double(row[c], "column '" + table.header[c] + "'"));
    const auto& raw = detail::trim(row[label_col]);
    double y = 0.0;
    try {
      y = parse_double(raw, "label");
    } catch (const InvalidInput&) {
      throw InvalidInput("invalid label '" + std::string(raw) + "' at data row " + std::to_string(r + 1));
    }
    if (y != 0.0 && y != 1.0)
      throw InvalidInput("invalid label '" + std::string(raw) + "' at data row " + std::to_string(r + 1));
    labels.push_back(static_cast<Label>(y));
    ids.push_back(id_col >= 0 ? parse_uint(row[static_cast<std::size_t>(id_col)], "id column")
                              : static_cast<RowId>(r));
  }
  return Dataset(d, std::move(feats), std::move(labels), std::move(ids), std::move(names), label_column);
}

// Layout: id, features..., label.
inline std::string dataset_csv(const Dataset& ds, const std::vector<std::string>& comments = {}) {
  std::ostringstream out;
  out << comment_block(comments) << "id";
  for (const auto& name : ds.feature_names()) out << ',' << name;
  out << ',' << ds.label_name() << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.id(i);
    for (double v : ds.row(i)) out << ',' << format_double(v);
    out << ',' << static_cast<int>(ds.label(i)) << '\n';
  }
  return out.str();
}

inline void save_csv(const Dataset& ds, const std::filesystem::path& path,
                     const std::vector<std::string>& comments = {}) {
  write_text(path, dataset_csv(ds, comments));
}

}  // namespace hardshap
