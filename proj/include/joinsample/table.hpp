#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "joinsample/error.hpp"

namespace joinsample {

// Row-major string table. Every row has exactly columns.size() fields.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::size_t size() const noexcept { return rows.size(); }
  [[nodiscard]] bool empty() const noexcept { return rows.empty(); }

  [[nodiscard]] std::size_t column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
    }
    throw SchemaError("missing column '" + std::string(name) + "'");
  }

  [[nodiscard]] bool has_column(std::string_view name) const noexcept {
    for (const auto& c : columns) {
      if (c == name) return true;
    }
    return false;
  }

  // Same schema, no rows.
  [[nodiscard]] Table empty_like() const { return Table{columns, {}}; }
};

// Separator used when several key columns form one composite join key.
inline constexpr char kCompositeKeySeparator = '\x1f';

// Numeric keys are canonicalized to their decimal text form so that "007",
// "7" and "+7" hash identically. Anything that is not a plain integer is
// kept byte-for-byte.
inline std::string canonical_key(std::string_view raw) {
  std::string_view s = raw;
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  std::string_view num = s;
  if (!num.empty() && num.front() == '+') num.remove_prefix(1);
  if (!num.empty() && num.front() != '+' && !(num.front() == '-' && num.size() < s.size())) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), value);
    if (ec == std::errc{} && ptr == num.data() + num.size()) return std::to_string(value);
  }
  return std::string(raw);
}

// Resolves one or more key columns (comma separated, e.g. "a,b") into
// column indices.
inline std::vector<std::size_t> key_indices(const Table& t, std::string_view key_spec) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= key_spec.size()) {
    auto end = key_spec.find(',', start);
    if (end == std::string_view::npos) end = key_spec.size();
    out.push_back(t.column_index(key_spec.substr(start, end - start)));
    start = end + 1;
  }
  return out;
}

inline std::string row_key(const std::vector<std::string>& row, std::span<const std::size_t> idx) {
  if (idx.size() == 1) return canonical_key(row[idx[0]]);
  std::string key;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) key.push_back(kCompositeKeySeparator);
    key += canonical_key(row[idx[i]]);
  }
  return key;
}

inline double parse_double(std::string_view text, std::string_view what) {
  std::string_view s = text;
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError("non-numeric value '" + std::string(text) + "' in " + std::string(what));
  }
  return v;
}

namespace csv {

namespace detail {

// Splits one logical CSV record (RFC 4180 quoting). Returns false at EOF.
inline bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int ch;
  while ((ch = in.get()) != EOF) {
    any = true;
    char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      fields.push_back(std::move(field));
      return true;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted CSV field");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

inline void write_field(std::ostream& out, const std::string& f) {
  if (f.find_first_of(",\"\n\r") == std::string::npos) {
    out << f;
    return;
  }
  out << '"';
  for (char c : f) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

}  // namespace detail

inline Table read(std::istream& in) {
  Table t;
  if (!detail::read_record(in, t.columns)) throw SchemaError("CSV input has no header row");
  std::vector<std::string> rec;
  std::size_t line = 1;
  while (detail::read_record(in, rec)) {
    ++line;
    if (rec.size() == 1 && rec[0].empty()) continue;
    if (rec.size() != t.columns.size()) {
      throw SchemaError("CSV line " + std::to_string(line) + " has " + std::to_string(rec.size()) +
                        " fields, header has " + std::to_string(t.columns.size()));
    }
    t.rows.push_back(rec);
  }
  return t;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read(in);
}

inline Table parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  return read(in);
}

inline void write(std::ostream& out, const Table& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out << ',';
    detail::write_field(out, t.columns[i]);
  }
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      detail::write_field(out, row[i]);
    }
    out << '\n';
  }
}

inline void write_file(const std::string& path, const Table& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  write(out, t);
}

}  // namespace csv

}  // namespace joinsample
