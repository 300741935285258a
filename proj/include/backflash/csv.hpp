#pragma once

// Minimal comma-separated text reading shared by the file formats. Lines that
// start with '#' are metadata/comments; "# key = value" lines are collected.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace backflash::csv {

using Metadata = std::map<std::string, std::string>;

class Reader {
 public:
  Reader(std::istream& in, std::string source, std::vector<std::string> expected_header);

  // Next data row split on ','; std::nullopt at end of input.
  std::optional<std::vector<std::string_view>> next();

  std::size_t line() const { return line_; }
  const std::string& source() const { return source_; }
  const Metadata& metadata() const { return metadata_; }

  double to_double(std::string_view field, std::string_view name) const;
  std::int64_t to_int(std::string_view field, std::string_view name) const;
  [[noreturn]] void fail(const std::string& what) const;

 private:
  bool read_line();

  std::istream& in_;
  std::string source_;
  std::vector<std::string> expected_;
  std::string buf_;
  std::vector<std::string_view> fields_;
  std::size_t line_ = 0;
  bool header_seen_ = false;
  Metadata metadata_;
};

double parse_double(std::string_view text);  // throws std::invalid_argument
std::optional<double> metadata_double(const Metadata& meta, const std::string& key);

// Shortest round-trip representation ("%.17g"-like but minimal).
std::string format_double(double v);
// Fixed-point with the given number of decimals.
std::string format_fixed(double v, int decimals);

}  // namespace backflash::csv
