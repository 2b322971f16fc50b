#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dxcast {

/// Fixed-point formatting, e.g. format_fixed(1.5, 3) == "1.500".
std::string format_fixed(double value, int decimals);

/// Shortest decimal string that parses back to exactly the same double.
std::string format_shortest(double value);

/// FNV-1a 64-bit hash, used to stamp outputs with the config they came from.
std::uint64_t fnv1a64(std::string_view text);

/// fnv1a64 rendered as 16 hex digits.
std::string hash_hex(std::string_view text);

}  // namespace dxcast
