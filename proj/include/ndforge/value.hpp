#pragma once

#include "ndforge/ndimage.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ndforge {

/// Runtime type tags for module parameters, op arguments and conversions.
enum class SemanticType {
  None,
  String,
  Int8,
  Int16,
  Int32,
  Int64,
  Float32,
  Float64,
  Boolean,
  Dataset,
  Image,
  FilePath,
  Float64List,
};

struct FilePath {
  std::string path;
  friend bool operator==(const FilePath &, const FilePath &) = default;
};

using Value = std::variant<std::monostate, std::string, std::int8_t,
                           std::int16_t, std::int32_t, std::int64_t, float,
                           double, bool, FilePath, DatasetPtr, ImagePtr,
                           std::vector<double>>;

using ValueMap = std::map<std::string, Value>;

SemanticType type_of(const Value &value);
std::string_view to_string(SemanticType type);
std::optional<SemanticType> parse_semantic_type(std::string_view name);

bool is_numeric(SemanticType type);
/// Numeric value as double; nullopt for non-numbers.
std::optional<double> as_double(const Value &value);
/// Image behind an image or dataset value, or null.
ImagePtr as_image(const Value &value);

/// Shortest round-trip decimal form ("5", "2.5", "1e+300").
std::string format_double(double v);

/// Headless textual rendering used by the display postprocessor.
std::string render(const Value &value);

} // namespace ndforge
