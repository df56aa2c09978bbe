#pragma once

#include <istream>
#include <string>
#include <vector>

#include "ebmix/families.hpp"

namespace ebmix {

struct CaseRecord {
  std::string id;
  Observation observation;
};

// Normal data: header `id,z` or `id,z,s2` (missing s2 means 1).
// Binomial data: header `id,H,N`.
// Blank lines are skipped; any other malformed row throws ParseError with
// its 1-based line number.
std::vector<CaseRecord> read_cases_csv(std::istream& in, Family family);

std::vector<Observation> observations_of(const std::vector<CaseRecord>& cases);

// Shortest text that reads back to the same double.
std::string format_number(double v);

}  // namespace ebmix
