#pragma once

// Minimal CSV writer. Floats are printed with 17 significant digits so the
// text round-trips to the same double.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "homeostat/errors.hpp"

namespace homeostat {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using CsvCell = std::variant<std::monostate, double, long long, std::string>;

inline CsvCell cell(std::optional<double> v) {
  return v ? CsvCell{*v} : CsvCell{std::monostate{}};
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
    if (!out_) throw Error("cannot open " + path + " for writing");
    write_fields(header);
  }

  void row(const std::vector<CsvCell>& cells) {
    if (cells.size() != columns_) throw Error("csv row has the wrong number of columns");
    std::vector<std::string> f;
    f.reserve(cells.size());
    for (const auto& c : cells) {
      if (std::holds_alternative<std::monostate>(c)) {
        f.emplace_back();
      } else if (const auto* d = std::get_if<double>(&c)) {
        f.push_back(format_double(*d));
      } else if (const auto* i = std::get_if<long long>(&c)) {
        f.push_back(std::to_string(*i));
      } else {
        f.push_back(std::get<std::string>(c));
      }
    }
    write_fields(f);
  }

 private:
  void write_fields(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }

  std::ofstream out_;
  std::size_t columns_;
};

}  // namespace homeostat
