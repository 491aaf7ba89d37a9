#pragma once
// Small shared utilities: string splitting, strict number parsing, half-up
// decimal rounding, IPv4 and RFC 3339 parsing, CSV reading, atomic writes.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "icsmap/errors.hpp"

namespace icsmap {

// ---------------------------------------------------------------- strings

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t p = s.find(sep, start);
    if (p == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, p - start));
    start = p + 1;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline bool contains(std::string_view hay, std::string_view needle) {
  return hay.find(needle) != std::string_view::npos;
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

// Strict unsigned parse: nonempty, decimal digits only, no sign, must fit.
inline std::optional<uint64_t> parse_uint(std::string_view s) {
  if (s.empty()) return std::nullopt;
  uint64_t value = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  if (!std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return std::nullopt;
  return value;
}

// ------------------------------------------------------- half-up rounding

namespace detail {
inline long long pow10ll(int digits) {
  long long v = 1;
  for (int i = 0; i < digits; ++i) v *= 10;
  return v;
}
}  // namespace detail

// Round half away from zero at `digits` decimals (half-up for the
// non-negative values used throughout): llround(x * 10^d) / 10^d.
inline double round_half_up(double x, int digits) {
  const long long scale = detail::pow10ll(digits);
  return static_cast<double>(std::llround(x * static_cast<double>(scale))) /
         static_cast<double>(scale);
}

// Same rounding, rendered with exactly `digits` decimals.
inline std::string format_fixed(double x, int digits) {
  const long long scale = detail::pow10ll(digits);
  long long n = std::llround(x * static_cast<double>(scale));
  std::string sign;
  if (n < 0) {
    sign = "-";
    n = -n;
  }
  std::string out = sign + std::to_string(n / scale);
  if (digits > 0) {
    std::string frac = std::to_string(n % scale);
    out += "." + std::string(static_cast<size_t>(digits) - frac.size(), '0') + frac;
  }
  return out;
}

// ----------------------------------------------------------------- IPv4

struct Ipv4 {
  uint32_t value = 0;
  std::string text;  // canonical dotted quad

  friend bool operator==(const Ipv4& a, const Ipv4& b) { return a.value == b.value; }
  friend auto operator<=>(const Ipv4& a, const Ipv4& b) { return a.value <=> b.value; }
};

enum class IpParseStatus { ok, malformed, ipv6_unsupported };

struct IpParseResult {
  IpParseStatus status = IpParseStatus::malformed;
  Ipv4 ip;
};

// Strict dotted quad: four decimal octets 0..255, no leading zeros.
// Anything containing ':' is reported as IPv6, a distinct status.
inline IpParseResult parse_ipv4(std::string_view s) {
  IpParseResult result;
  if (s.find(':') != std::string_view::npos) {
    result.status = IpParseStatus::ipv6_unsupported;
    return result;
  }
  const std::vector<std::string> octets = split(s, '.');
  if (octets.size() != 4) return result;
  uint32_t value = 0;
  for (const std::string& o : octets) {
    if (o.empty() || o.size() > 3) return result;
    if (o.size() > 1 && o[0] == '0') return result;  // no leading zeros
    auto n = parse_uint(o);
    if (!n || *n > 255) return result;
    value = (value << 8) | static_cast<uint32_t>(*n);
  }
  result.status = IpParseStatus::ok;
  result.ip.value = value;
  result.ip.text = std::string(s);
  return result;
}

inline Ipv4 ipv4_from_value(uint32_t value) {
  Ipv4 ip;
  ip.value = value;
  ip.text = std::to_string((value >> 24) & 255) + "." + std::to_string((value >> 16) & 255) +
            "." + std::to_string((value >> 8) & 255) + "." + std::to_string(value & 255);
  return ip;
}

// ------------------------------------------------------------- RFC 3339

struct Timestamp {
  int64_t seconds = 0;  // seconds since the Unix epoch, UTC
  uint32_t nanos = 0;
  std::string raw;  // original text, preserved for round-tripping

  friend bool operator==(const Timestamp& a, const Timestamp& b) {
    return a.seconds == b.seconds && a.nanos == b.nanos;
  }
  friend auto operator<=>(const Timestamp& a, const Timestamp& b) {
    if (auto c = a.seconds <=> b.seconds; c != 0) return c;
    return a.nanos <=> b.nanos;
  }
};

namespace detail {
// Days since 1970-01-01 for a proleptic Gregorian date.
inline int64_t days_from_civil(int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

inline bool is_leap(int64_t y) { return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0); }

inline unsigned days_in_month(int64_t y, unsigned m) {
  static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return kDays[m - 1];
}

inline bool two_digits(std::string_view s, size_t pos, unsigned& out) {
  if (pos + 2 > s.size()) return false;
  char a = s[pos], b = s[pos + 1];
  if (a < '0' || a > '9' || b < '0' || b > '9') return false;
  out = static_cast<unsigned>(a - '0') * 10 + static_cast<unsigned>(b - '0');
  return true;
}
}  // namespace detail

// RFC 3339 date-time: YYYY-MM-DDTHH:MM:SS[.fraction](Z|+HH:MM|-HH:MM).
// 'T'/'Z' may be lowercase. Returns nullopt on any malformation.
inline std::optional<Timestamp> parse_rfc3339(std::string_view s) {
  using namespace detail;
  if (s.size() < 20) return std::nullopt;
  unsigned mo = 0, da = 0, hh = 0, mi = 0, ss = 0;
  // year: exactly 4 digits
  for (int i = 0; i < 4; ++i)
    if (s[static_cast<size_t>(i)] < '0' || s[static_cast<size_t>(i)] > '9') return std::nullopt;
  int64_t year = (s[0] - '0') * 1000 + (s[1] - '0') * 100 + (s[2] - '0') * 10 + (s[3] - '0');
  if (s[4] != '-' || !two_digits(s, 5, mo) || s[7] != '-' || !two_digits(s, 8, da))
    return std::nullopt;
  if (s[10] != 'T' && s[10] != 't') return std::nullopt;
  if (!two_digits(s, 11, hh) || s[13] != ':' || !two_digits(s, 14, mi) || s[16] != ':' ||
      !two_digits(s, 17, ss))
    return std::nullopt;
  if (mo < 1 || mo > 12 || da < 1 || da > days_in_month(year, mo)) return std::nullopt;
  if (hh > 23 || mi > 59 || ss > 60) return std::nullopt;  // 60 tolerates leap seconds
  size_t pos = 19;
  uint32_t nanos = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    size_t digits = 0;
    uint64_t frac = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (digits < 9) frac = frac * 10 + static_cast<uint64_t>(s[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
    size_t kept = std::min<size_t>(digits, 9);
    for (size_t i = kept; i < 9; ++i) frac *= 10;
    nanos = static_cast<uint32_t>(frac);
  }
  if (pos >= s.size()) return std::nullopt;
  int64_t offset = 0;
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    const bool negative = s[pos] == '-';
    unsigned oh = 0, om = 0;
    if (!two_digits(s, pos + 1, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
        !two_digits(s, pos + 4, om))
      return std::nullopt;
    if (oh > 23 || om > 59) return std::nullopt;
    offset = static_cast<int64_t>(oh) * 3600 + static_cast<int64_t>(om) * 60;
    if (negative) offset = -offset;
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;
  Timestamp ts;
  ts.seconds = days_from_civil(year, mo, da) * 86400 + static_cast<int64_t>(hh) * 3600 +
               static_cast<int64_t>(mi) * 60 + static_cast<int64_t>(ss) - offset;
  ts.nanos = nanos;
  ts.raw = std::string(s);
  return ts;
}

// ------------------------------------------------------------------ files

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return std::move(buf).str();
}

// Write via temp file + rename so readers never observe a torn file.
inline void atomic_write(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("rename failed: " + path.string());
  }
}

// ------------------------------------------------------------------- CSV

struct CsvRow {
  size_t line_no = 0;  // 1-based line in the source file
  std::vector<std::string> fields;
};

namespace detail {
// RFC 4180 style fields; embedded newlines are not supported (one row per line).
inline std::vector<std::string> parse_csv_line(std::string_view line, const std::string& where) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          i += 2;
          continue;
        }
        quoted = false;
        ++i;
        continue;
      }
      cur += c;
      ++i;
      continue;
    }
    if (c == '"' && cur.empty()) {
      quoted = true;
      ++i;
      continue;
    }
    if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      ++i;
      continue;
    }
    cur += c;
    ++i;
  }
  if (quoted) throw ValidationError(where + ": unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}
}  // namespace detail

inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// Read a headed CSV file. Blank lines and lines starting with '#' in column 0
// are skipped. The first remaining line must equal `expected_header` exactly;
// every data row must have the same number of fields as the header.
inline std::vector<CsvRow> read_csv(const std::filesystem::path& path,
                                    const std::vector<std::string>& expected_header) {
  const std::string text = read_file(path);
  std::vector<CsvRow> rows;
  bool header_seen = false;
  size_t line_no = 0;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    std::string_view line;
    if (end == std::string::npos) {
      if (start == text.size()) break;
      line = std::string_view(text).substr(start);
      start = text.size() + 1;
    } else {
      line = std::string_view(text).substr(start, end - start);
      start = end + 1;
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::vector<std::string> fields = detail::parse_csv_line(line, where);
    if (!header_seen) {
      if (fields != expected_header)
        throw ValidationError(where + ": expected header '" + join(expected_header, ",") +
                              "', got '" + join(fields, ",") + "'");
      header_seen = true;
      continue;
    }
    if (fields.size() != expected_header.size())
      throw ValidationError(where + ": expected " + std::to_string(expected_header.size()) +
                            " fields, got " + std::to_string(fields.size()));
    rows.push_back(CsvRow{line_no, std::move(fields)});
  }
  if (!header_seen)
    throw ValidationError(path.string() + ": missing header '" + join(expected_header, ",") + "'");
  return rows;
}

}  // namespace icsmap
