#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sla {

std::vector<std::string> split(const std::string& s, char sep);
std::string join(const std::vector<std::string>& parts, char sep);

/// Strict integer/double parsing; DomainError naming `what` on junk.
int parse_int(const std::string& s, const std::string& what);
std::uint64_t parse_u64(const std::string& s, const std::string& what);
std::size_t parse_size(const std::string& s, const std::string& what);
double parse_double(const std::string& s, const std::string& what);

/// Shortest decimal that round-trips the exact binary64 value.
std::string format_g17(double v);

/// Fixed 6-decimal formatting used by prediction files.
std::string format_f6(double v);

/// Fixed-point with decimal round-half-even ties, as report tables use
/// (0.8915 -> "0.892" at 3 digits).
std::string format_fixed(double v, int digits);

/// 16-hex-digit encoding of the IEEE-754 binary64 bit pattern.
std::string double_to_hex(double v);
double double_from_hex(const std::string& hex);

/// FNV-1a 64-bit checksum of a file's bytes, as 16 hex digits.
std::string fnv1a_file(const std::string& path);

}  // namespace sla
