#pragma once

// Deterministic CSV emission: '.' decimal separator regardless of locale,
// 17-significant-digit doubles (round-trip exact), a schema-version comment
// line followed by a header row. Identical inputs produce byte-identical
// files: no timestamps, no pointers, fixed column order.

#include <charconv>
#include <cstddef>
#include <fstream>
#include <initializer_list>
#include <string>
#include <system_error>
#include <vector>

#include "lwrnet/errors.hpp"

namespace lwrnet {

inline std::string csv_num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (res.ec != std::errc()) throw InternalError("number formatting failed");
  return std::string(buf, res.ptr);
}

inline std::string csv_num(long long v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw InternalError("number formatting failed");
  return std::string(buf, res.ptr);
}

inline std::string csv_num(int v) { return csv_num(static_cast<long long>(v)); }
inline std::string csv_num(std::size_t v) { return csv_num(static_cast<long long>(v)); }

// Cell text is written verbatim except for quoting when it contains a comma,
// quote, or newline; numeric helpers above produce quote-free text.
inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

class CsvWriter {
public:
  CsvWriter(const std::string& path, const std::string& schema,
            const std::vector<std::string>& columns)
      : out_(path, std::ios::binary), columns_(columns.size()) {
    if (!out_) throw ValidationError("cannot open CSV file for writing: " + path);
    out_ << "# schema: " << schema << " v1\n";
    write_row(columns);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
      throw InternalError("CSV row width does not match the header");
    write_row(cells);
  }

  void row(std::initializer_list<std::string> cells) {
    row(std::vector<std::string>(cells));
  }

private:
  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_escape(cells[i]);
    }
    out_ << '\n';
  }

  std::ofstream out_;
  std::size_t columns_;
};

// The run summary consumed by scripts and the acceptance harness: plain
// key=value lines, numbers in the same round-trip format as the CSVs.
class SummaryWriter {
public:
  explicit SummaryWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw ValidationError("cannot open summary file for writing: " + path);
  }

  void kv(const std::string& key, const std::string& value) {
    out_ << key << '=' << value << '\n';
  }
  void kv(const std::string& key, double value) { kv(key, csv_num(value)); }
  void kv(const std::string& key, int value) { kv(key, csv_num(value)); }
  void kv(const std::string& key, std::size_t value) { kv(key, csv_num(value)); }

private:
  std::ofstream out_;
};

}  // namespace lwrnet
