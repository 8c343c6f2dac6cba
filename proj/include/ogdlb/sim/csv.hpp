#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "ogdlb/common.hpp"

namespace ogdlb::sim {

/// Shortest decimal string that parses back to exactly `x`.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string format_optional(const std::optional<double>& x) {
  return x ? format_double(*x) : std::string("NA");
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path);
    row_begin();
    for (const auto& h : header) field(h);
    row_end();
  }

  CsvWriter& field(const std::string& s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }
  CsvWriter& field(double x) { return field(format_double(x)); }
  CsvWriter& field(std::int64_t x) { return field(std::to_string(x)); }
  CsvWriter& field(int x) { return field(std::to_string(x)); }
  CsvWriter& field(const std::optional<double>& x) { return field(format_optional(x)); }

  void row_end() {
    out_ << '\n';
    first_ = true;
    ++rows_;
  }

  /// Data rows written so far (the header is not counted).
  std::size_t rows() const { return rows_ - 1; }

  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("write failed");
  }

 private:
  void row_begin() { first_ = true; }

  std::ofstream out_;
  bool first_ = true;
  std::size_t rows_ = 0;
};

}  // namespace ogdlb::sim
