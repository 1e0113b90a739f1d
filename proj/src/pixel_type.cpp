#include "ndforge/pixel_type.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <limits>

namespace ndforge {

namespace {

constexpr std::array<std::string_view, kPixelTypeCount> kNames{
    "bool1", "bit",   "uint2", "uint4", "uint8",  "uint12",  "uint16",
    "uint32", "uint64", "int8", "int16", "int32", "float32", "float64"};

constexpr std::uint64_t mask_for(unsigned bits) {
  return bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
}

} // namespace

std::optional<PixelType> PixelType::from_code(std::uint8_t code) {
  if (code >= kPixelTypeCount)
    return std::nullopt;
  return PixelType(static_cast<PixelTypeCode>(code));
}

std::optional<PixelType> PixelType::parse(std::string_view name) {
  for (int i = 0; i < kPixelTypeCount; ++i)
    if (kNames[i] == name)
      return PixelType(static_cast<PixelTypeCode>(i));
  if (name == "bool")
    return PixelType(PixelTypeCode::Bool1);
  return std::nullopt;
}

std::string_view PixelType::name() const {
  return kNames[static_cast<int>(code_)];
}

std::int64_t PixelType::min_integer() const {
  switch (code_) {
  case PixelTypeCode::Int8:
    return -128;
  case PixelTypeCode::Int16:
    return -32768;
  case PixelTypeCode::Int32:
    return std::numeric_limits<std::int32_t>::min();
  default:
    return 0;
  }
}

std::uint64_t PixelType::max_integer() const {
  switch (code_) {
  case PixelTypeCode::Int8:
    return 127;
  case PixelTypeCode::Int16:
    return 32767;
  case PixelTypeCode::Int32:
    return std::numeric_limits<std::int32_t>::max();
  default:
    return mask_for(bits());
  }
}

double PixelType::min_value() const {
  switch (code_) {
  case PixelTypeCode::Float32:
    return -static_cast<double>(std::numeric_limits<float>::max());
  case PixelTypeCode::Float64:
    return -std::numeric_limits<double>::max();
  default:
    return static_cast<double>(min_integer());
  }
}

double PixelType::max_value() const {
  switch (code_) {
  case PixelTypeCode::Float32:
    return static_cast<double>(std::numeric_limits<float>::max());
  case PixelTypeCode::Float64:
    return std::numeric_limits<double>::max();
  default:
    return static_cast<double>(max_integer());
  }
}

std::uint64_t PixelType::encode(double value) const {
  if (code_ == PixelTypeCode::Float64)
    return std::bit_cast<std::uint64_t>(value);
  if (code_ == PixelTypeCode::Float32) {
    float f;
    if (std::isnan(value))
      f = std::numeric_limits<float>::quiet_NaN();
    else if (value > std::numeric_limits<float>::max())
      f = std::isinf(value) ? std::numeric_limits<float>::infinity()
                            : std::numeric_limits<float>::max();
    else if (value < -std::numeric_limits<float>::max())
      f = std::isinf(value) ? -std::numeric_limits<float>::infinity()
                            : -std::numeric_limits<float>::max();
    else
      f = static_cast<float>(value);
    return std::bit_cast<std::uint32_t>(f);
  }
  if (std::isnan(value))
    return 0;
  double r = std::round(value);
  if (code_ == PixelTypeCode::UInt64) {
    if (r <= 0)
      return 0;
    // 2^64 is the first double above the uint64 range.
    if (r >= 18446744073709551616.0)
      return ~std::uint64_t{0};
    return static_cast<std::uint64_t>(r);
  }
  double lo = static_cast<double>(min_integer());
  double hi = static_cast<double>(max_integer());
  if (r < lo)
    r = lo;
  if (r > hi)
    r = hi;
  return static_cast<std::uint64_t>(static_cast<std::int64_t>(r)) &
         mask_for(bits());
}

std::uint64_t PixelType::encode_integer(std::int64_t value) const {
  if (is_float())
    return encode(static_cast<double>(value));
  if (value < min_integer())
    value = min_integer();
  if (value > 0 && static_cast<std::uint64_t>(value) > max_integer())
    return max_integer() & mask_for(bits());
  return static_cast<std::uint64_t>(value) & mask_for(bits());
}

double PixelType::decode(std::uint64_t raw) const {
  switch (code_) {
  case PixelTypeCode::Float64:
    return std::bit_cast<double>(raw);
  case PixelTypeCode::Float32:
    return std::bit_cast<float>(static_cast<std::uint32_t>(raw));
  case PixelTypeCode::UInt64:
    return static_cast<double>(raw);
  default:
    return static_cast<double>(decode_integer(raw));
  }
}

std::int64_t PixelType::decode_integer(std::uint64_t raw) const {
  switch (code_) {
  case PixelTypeCode::Int8:
    return static_cast<std::int8_t>(raw);
  case PixelTypeCode::Int16:
    return static_cast<std::int16_t>(raw);
  case PixelTypeCode::Int32:
    return static_cast<std::int32_t>(raw);
  case PixelTypeCode::UInt64:
    return raw > static_cast<std::uint64_t>(
                     std::numeric_limits<std::int64_t>::max())
               ? std::numeric_limits<std::int64_t>::max()
               : static_cast<std::int64_t>(raw);
  case PixelTypeCode::Float32:
  case PixelTypeCode::Float64:
    return static_cast<std::int64_t>(std::round(decode(raw)));
  default:
    return static_cast<std::int64_t>(raw & mask_for(bits()));
  }
}

std::uint64_t packed_storage_bytes(PixelType type, std::uint64_t n_samples) {
  unsigned bits = type.bits();
  if (bits % 8 == 0)
    return n_samples * (bits / 8);
  // n * bits may overflow for huge n; split the multiplication.
  std::uint64_t whole = (n_samples / 8) * bits;
  std::uint64_t rest = ((n_samples % 8) * bits + 7) / 8;
  return whole + rest;
}

namespace detail {

std::uint64_t load_packed(const std::byte *base, unsigned bits,
                          std::uint64_t index) {
  switch (bits) {
  case 8:
    return std::to_integer<std::uint8_t>(base[index]);
  case 16: {
    std::uint16_t v;
    std::memcpy(&v, base + index * 2, 2);
    return v;
  }
  case 32: {
    std::uint32_t v;
    std::memcpy(&v, base + index * 4, 4);
    return v;
  }
  case 64: {
    std::uint64_t v;
    std::memcpy(&v, base + index * 8, 8);
    return v;
  }
  default:
    break;
  }
  std::uint64_t bit = index * bits;
  std::uint64_t byte = bit / 8;
  unsigned shift = static_cast<unsigned>(bit % 8);
  unsigned span = (shift + bits + 7) / 8;
  std::uint32_t acc = 0;
  for (unsigned i = 0; i < span; ++i)
    acc |= std::to_integer<std::uint32_t>(base[byte + i]) << (8 * i);
  return (acc >> shift) & mask_for(bits);
}

void store_packed(std::byte *base, unsigned bits, std::uint64_t index,
                  std::uint64_t raw) {
  switch (bits) {
  case 8:
    base[index] = static_cast<std::byte>(raw);
    return;
  case 16: {
    auto v = static_cast<std::uint16_t>(raw);
    std::memcpy(base + index * 2, &v, 2);
    return;
  }
  case 32: {
    auto v = static_cast<std::uint32_t>(raw);
    std::memcpy(base + index * 4, &v, 4);
    return;
  }
  case 64:
    std::memcpy(base + index * 8, &raw, 8);
    return;
  default:
    break;
  }
  std::uint64_t bit = index * bits;
  std::uint64_t byte = bit / 8;
  unsigned shift = static_cast<unsigned>(bit % 8);
  unsigned span = (shift + bits + 7) / 8;
  std::uint32_t acc = 0;
  for (unsigned i = 0; i < span; ++i)
    acc |= std::to_integer<std::uint32_t>(base[byte + i]) << (8 * i);
  auto m = static_cast<std::uint32_t>(mask_for(bits)) << shift;
  acc = (acc & ~m) | ((static_cast<std::uint32_t>(raw) << shift) & m);
  for (unsigned i = 0; i < span; ++i)
    base[byte + i] = static_cast<std::byte>(acc >> (8 * i));
}

} // namespace detail

} // namespace ndforge
