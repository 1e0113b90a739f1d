#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace ndforge {

/// Sample types. The numeric values are the on-disk codes used by NCHK.
enum class PixelTypeCode : std::uint8_t {
  Bool1 = 0,
  Bit = 1,
  UInt2 = 2,
  UInt4 = 3,
  UInt8 = 4,
  UInt12 = 5,
  UInt16 = 6,
  UInt32 = 7,
  UInt64 = 8,
  Int8 = 9,
  Int16 = 10,
  Int32 = 11,
  Float32 = 12,
  Float64 = 13,
};

inline constexpr int kPixelTypeCount = 14;

class PixelType {
public:
  constexpr PixelType() = default;
  constexpr PixelType(PixelTypeCode code) : code_(code) {}

  static std::optional<PixelType> from_code(std::uint8_t code);
  static std::optional<PixelType> parse(std::string_view name);

  constexpr PixelTypeCode code() const { return code_; }

  constexpr unsigned bits() const {
    switch (code_) {
    case PixelTypeCode::Bool1:
    case PixelTypeCode::Bit:
      return 1;
    case PixelTypeCode::UInt2:
      return 2;
    case PixelTypeCode::UInt4:
      return 4;
    case PixelTypeCode::UInt8:
    case PixelTypeCode::Int8:
      return 8;
    case PixelTypeCode::UInt12:
      return 12;
    case PixelTypeCode::UInt16:
    case PixelTypeCode::Int16:
      return 16;
    case PixelTypeCode::UInt32:
    case PixelTypeCode::Int32:
    case PixelTypeCode::Float32:
      return 32;
    case PixelTypeCode::UInt64:
    case PixelTypeCode::Float64:
      return 64;
    }
    return 0;
  }

  constexpr bool is_float() const {
    return code_ == PixelTypeCode::Float32 || code_ == PixelTypeCode::Float64;
  }
  constexpr bool is_signed() const {
    return code_ == PixelTypeCode::Int8 || code_ == PixelTypeCode::Int16 ||
           code_ == PixelTypeCode::Int32 || is_float();
  }
  /// Samples share bytes with their neighbours (1, 2, 4 and 12 bit types).
  constexpr bool is_packed() const { return bits() % 8 != 0; }

  /// Range per the supported-type table; floats report their finite limits.
  double min_value() const;
  double max_value() const;
  std::int64_t min_integer() const;
  std::uint64_t max_integer() const;

  std::string_view name() const;

  /// Clamps to range and rounds half away from zero for integer types, then
  /// encodes into the raw bit pattern stored in the low `bits()` bits.
  std::uint64_t encode(double value) const;
  std::uint64_t encode_integer(std::int64_t value) const;
  double decode(std::uint64_t raw) const;
  std::int64_t decode_integer(std::uint64_t raw) const;

  friend constexpr bool operator==(PixelType a, PixelType b) {
    return a.code_ == b.code_;
  }

private:
  PixelTypeCode code_ = PixelTypeCode::UInt8;
};

/// ceil(n * bits / 8).
std::uint64_t packed_storage_bytes(PixelType type, std::uint64_t n_samples);

namespace detail {

/// Little-endian bit order: sample i occupies bits [i*bits, (i+1)*bits).
std::uint64_t load_packed(const std::byte *base, unsigned bits,
                          std::uint64_t index);
void store_packed(std::byte *base, unsigned bits, std::uint64_t index,
                  std::uint64_t raw);

} // namespace detail

} // namespace ndforge
