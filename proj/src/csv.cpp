#include "backflash/csv.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <stdexcept>

#include "backflash/error.hpp"

namespace backflash::csv {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

Reader::Reader(std::istream& in, std::string source, std::vector<std::string> expected_header)
    : in_(in), source_(std::move(source)), expected_(std::move(expected_header)) {}

bool Reader::read_line() {
  if (!std::getline(in_, buf_)) return false;
  ++line_;
  return true;
}

void Reader::fail(const std::string& what) const { throw ParseError(source_, line_, what); }

std::optional<std::vector<std::string_view>> Reader::next() {
  while (read_line()) {
    const std::string_view line = trim(buf_);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string_view body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string_view::npos)
        metadata_[std::string(trim(body.substr(0, eq)))] = std::string(trim(body.substr(eq + 1)));
      continue;
    }
    fields_.clear();
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields_.push_back(trim(line.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!header_seen_) {
      header_seen_ = true;
      bool match = fields_.size() == expected_.size();
      for (std::size_t i = 0; match && i < fields_.size(); ++i) match = fields_[i] == expected_[i];
      if (!match) {
        std::string want;
        for (const auto& h : expected_) want += (want.empty() ? "" : ",") + h;
        fail("expected header '" + want + "'");
      }
      continue;
    }
    if (fields_.size() != expected_.size())
      fail("expected " + std::to_string(expected_.size()) + " fields, got " +
           std::to_string(fields_.size()));
    return fields_;
  }
  if (!header_seen_) fail("missing header line");
  return std::nullopt;
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last)
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  return v;
}

double Reader::to_double(std::string_view field, std::string_view name) const {
  try {
    return parse_double(field);
  } catch (const std::invalid_argument&) {
    fail("field '" + std::string(name) + "': not a number: '" + std::string(field) + "'");
  }
}

std::int64_t Reader::to_int(std::string_view field, std::string_view name) const {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
    fail("field '" + std::string(name) + "': not an integer: '" + std::string(field) + "'");
  return v;
}

std::optional<double> metadata_double(const Metadata& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) return std::nullopt;
  try {
    return parse_double(it->second);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

std::string format_fixed(double v, int decimals) {
  char buf[96];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

}  // namespace backflash::csv
