#pragma once

#include "ndforge/container.hpp"
#include "ndforge/value.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace ndforge {

/// Single-hop value transformation between two semantic types.
struct Converter {
  std::string id;
  SemanticType source = SemanticType::None;
  SemanticType target = SemanticType::None;
  std::int32_t priority = 0;
  unsigned cost = 1;
  /// Lossless numeric widening; the op matcher scores it as type distance
  /// instead of as a converter-assisted parameter.
  bool widening = false;
  /// Value-dependent acceptance (e.g. a string must parse). Null accepts all.
  std::function<bool(const Value &)> accepts;
  std::function<Value(const Value &)> apply;
};

void register_converter(Context &ctx, Converter converter);

/// Best converter for `value` → `target`: lowest cost, then highest priority,
/// then earliest registration. Never returns an identity converter.
std::optional<Converter> find_converter(const Context &ctx, const Value &value,
                                        SemanticType target);

bool supports(const Context &ctx, const Value &value, SemanticType target);

/// Identity when the type already matches. Throws ConversionError otherwise
/// if no converter accepts the value.
Value convert(const Context &ctx, const Value &value, SemanticType target);

/// string→float64/int64/boolean/file-path, pairwise integer widening,
/// int64→float64, float32→float64, dataset↔image.
void register_builtin_converters(Context &ctx);

std::optional<double> parse_float64(std::string_view text);
std::optional<std::int64_t> parse_int64(std::string_view text);
std::optional<bool> parse_boolean(std::string_view text);

} // namespace ndforge
