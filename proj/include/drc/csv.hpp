#pragma once

// RFC 4180 CSV output: CRLF line ends, fields quoted only when they contain
// a comma, quote, CR or LF, embedded quotes doubled.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "drc/errors.hpp"

namespace drc::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) {
    if (row.size() != header.size()) {
      throw InvalidArgument(fmt::format("csv row has {} fields, header has {}", row.size(), header.size()));
    }
    rows.push_back(std::move(row));
  }
};

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Shortest decimal form that reads back to the same double.
inline std::string number(double x) { return fmt::format("{}", x); }

inline std::string to_string(const Table& t) {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += quote(fields[i]);
    }
    out += "\r\n";
  };
  line(t.header);
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw InvalidArgument("csv row does not match header");
    line(r);
  }
  return out;
}

/// Writes the table to `path`; "-" means standard output.
inline void emit_report(const Table& t, const std::filesystem::path& path) {
  const auto text = to_string(t);
  if (path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    std::fflush(stdout);
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw StoreError(fmt::format("cannot open {} for writing", path.string()));
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw StoreError(fmt::format("write to {} failed", path.string()));
}

}  // namespace drc::csv
