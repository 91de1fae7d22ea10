#include "sla/format.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>

#include "sla/error.hpp"

namespace sla {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

int parse_int(const std::string& s, const std::string& what) {
  long long v = 0;
  try {
    std::size_t used = 0;
    v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw DomainError("invalid " + what + " '" + s + "'");
  }
  if (v < std::numeric_limits<int>::min() ||
      v > std::numeric_limits<int>::max()) {
    throw DomainError(what + " '" + s + "' out of range");
  }
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    unsigned long long v = std::stoull(s, &used);
    if (used != s.size() || s.empty() || s[0] == '-') {
      throw std::invalid_argument(s);
    }
    return v;
  } catch (const std::exception&) {
    throw DomainError("invalid " + what + " '" + s + "'");
  }
}

std::size_t parse_size(const std::string& s, const std::string& what) {
  return static_cast<std::size_t>(parse_u64(s, what));
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size() || s.empty()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DomainError("invalid " + what + " '" + s + "'");
  }
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shorter form when it round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

std::string format_f6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string format_fixed(double v, int digits) {
  double scale = std::pow(10.0, digits);
  bool negative = std::signbit(v);
  double s = std::abs(v) * scale;
  double f = std::floor(s);
  double frac = s - f;
  double n;
  // Values within 1e-9 of a tie are treated as exact decimal halves so
  // that e.g. 0.8915 (stored as 0.89149999...) rounds half-even to 0.892.
  if (std::abs(frac - 0.5) < 1e-9) {
    n = (std::fmod(f, 2.0) == 0.0) ? f : f + 1.0;
  } else {
    n = frac < 0.5 ? f : f + 1.0;
  }
  double int_part = std::floor(n / scale);
  auto frac_part = static_cast<long long>(n - int_part * scale);
  char buf[64];
  if (digits > 0) {
    std::snprintf(buf, sizeof(buf), "%s%.0f.%0*lld", negative && n > 0 ? "-" : "",
                  int_part, digits, frac_part);
  } else {
    std::snprintf(buf, sizeof(buf), "%s%.0f", negative && n > 0 ? "-" : "",
                  int_part);
  }
  return buf;
}

std::string double_to_hex(double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(bits));
  return buf;
}

double double_from_hex(const std::string& hex) {
  if (hex.size() != 16) {
    throw DomainError("malformed hex scalar '" + hex + "'");
  }
  std::uint64_t bits = 0;
  for (char c : hex) {
    int digit;
    if (c >= '0' && c <= '9') digit = c - '0';
    else if (c >= 'a' && c <= 'f') digit = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') digit = c - 'A' + 10;
    else throw DomainError("malformed hex scalar '" + hex + "'");
    bits = (bits << 4) | static_cast<std::uint64_t>(digit);
  }
  return std::bit_cast<double>(bits);
}

std::string fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "' for checksum");
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(h));
  return out;
}

}  // namespace sla
