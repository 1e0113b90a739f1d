#pragma once

#include "ndforge/io.hpp"

namespace ndforge::io::detail {

FormatPtr make_pgm_format();
FormatPtr make_nchk_format();

/// Packs raw samples into `bits`-wide little-endian slots.
std::vector<std::byte> pack(std::span<const std::uint64_t> raw, PixelType type);
void unpack(std::span<const std::byte> bytes, PixelType type, std::span<std::uint64_t> raw);

} // namespace ndforge::io::detail
