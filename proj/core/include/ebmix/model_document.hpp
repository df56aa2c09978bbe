#pragma once

#include <cstdint>
#include <string>

#include "ebmix/mixture.hpp"

namespace ebmix {

// On-disk form of a fitted model.
struct ModelDocument {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  MixtureModel model;
  std::string fit_timestamp = "unset";
  std::uint64_t seed = 0;

  friend bool operator==(const ModelDocument&, const ModelDocument&) = default;
};

// Canonical JSON: keys sorted, two-space indent, every real printed with 17
// significant digits, trailing newline. Equal documents give equal bytes.
std::string to_canonical_json(const ModelDocument& doc);

// Throws ParseError on malformed JSON or a missing/ill-typed field and
// ContractViolation when the decoded model breaks an invariant.
ModelDocument parse_model_document(const std::string& text);

}  // namespace ebmix
