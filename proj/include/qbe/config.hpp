#pragma once

#include <span>
#include <string>
#include <string_view>

#include "qbe/model.hpp"

namespace qbe {

/// A fully validated model plus the initial product state it was configured with.
struct ModelConfig {
  TripartiteModel model;
  ProductState initial;
};

/// `key=value` applied to the parsed document before validation. The key is a
/// dotted path ("h_qb.c", "dims.1"); the value is parsed as JSON when possible
/// and taken as a string otherwise.
struct Override {
  std::string key;
  std::string value;
};

Override parse_override(std::string_view text);

/// Parses the JSON model document. Syntax errors throw ParseError with line and
/// column; wrong types or unknown keys throw ParseError naming the field path;
/// violated model invariants throw ModelError.
ModelConfig load_model(std::string_view text, std::span<const Override> overrides = {});

/// Inverse of load_model: load_model(serialize_model(x)) reproduces x field for field.
std::string serialize_model(const ModelConfig& config);

}  // namespace qbe
