#include "ebmix/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "ebmix/errors.hpp"

namespace ebmix {

namespace {

std::string trim(std::string s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_real(const std::string& text, const char* field, std::size_t line) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ParseError(std::string("field ") + field + " is not a finite number: '" + text + "'", line);
  return v;
}

int parse_count(const std::string& text, const char* field, std::size_t line) {
  int v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end)
    throw ParseError(std::string("field ") + field + " is not an integer: '" + text + "'", line);
  return v;
}

}  // namespace

std::vector<CaseRecord> read_cases_csv(std::istream& in, Family family) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  const auto header = split(trim(line));
  bool with_variance = false;
  if (family == Family::Normal) {
    if (header == std::vector<std::string>{"id", "z", "s2"}) {
      with_variance = true;
    } else if (header != std::vector<std::string>{"id", "z"}) {
      throw ParseError("expected header id,z or id,z,s2", 1);
    }
  } else if (header != std::vector<std::string>{"id", "H", "N"}) {
    throw ParseError("expected header id,H,N", 1);
  }
  const std::size_t width = header.size();

  std::vector<CaseRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != width && !(with_variance && fields.size() == 2)) {
      throw ParseError("expected " + std::to_string(width) + " fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    try {
      if (family == Family::Normal) {
        const double z = parse_real(fields[1], "z", line_no);
        const double s2 = fields.size() == 3 && !fields[2].empty() ? parse_real(fields[2], "s2", line_no) : 1.0;
        out.push_back({fields[0], Observation::normal(z, s2)});
      } else {
        const int h = parse_count(fields[1], "H", line_no);
        const int n = parse_count(fields[2], "N", line_no);
        out.push_back({fields[0], Observation::binomial(h, n)});
      }
    } catch (const ContractViolation& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

std::vector<Observation> observations_of(const std::vector<CaseRecord>& cases) {
  std::vector<Observation> out;
  out.reserve(cases.size());
  for (const auto& c : cases) out.push_back(c.observation);
  return out;
}

std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
  return std::string(buf, ptr);
}

}  // namespace ebmix
