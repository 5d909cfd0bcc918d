#include "ecodrive/time_util.hpp"

#include <charconv>
#include <cstdio>

namespace ecodrive {

// Civil <-> serial day conversions (proleptic Gregorian, day 0 = 1970-01-01).
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  std::int64_t r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) --q;
  return q;
}

CivilDateTime civil_from_epoch(EpochSeconds t) {
  const std::int64_t z = floor_div(t, 86400);
  std::int64_t sod = t - z * 86400;  // 0..86399

  const std::int64_t za = z + 719468;
  const std::int64_t era = floor_div(za, 146097);
  const unsigned doe = static_cast<unsigned>(za - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : static_cast<unsigned>(-9));

  CivilDateTime c;
  c.year = static_cast<int>(y + (m <= 2));
  c.month = static_cast<int>(m);
  c.day = static_cast<int>(d);
  c.hour = static_cast<int>(sod / 3600);
  c.minute = static_cast<int>((sod % 3600) / 60);
  c.second = static_cast<int>(sod % 60);
  return c;
}

EpochSeconds epoch_from_civil(const CivilDateTime& c) {
  return days_from_civil(c.year, c.month, c.day) * 86400 + c.hour * 3600 + c.minute * 60 +
         c.second;
}

namespace {

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

std::optional<EpochSeconds> parse_iso8601(std::string_view text) {
  if (!text.empty() && (text.back() == 'Z' || text.back() == 'z')) {
    text.remove_suffix(1);
  }
  if (text.size() != 19) return std::nullopt;
  if (text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':') {
    return std::nullopt;
  }
  CivilDateTime c;
  if (!parse_int(text.substr(0, 4), c.year) || !parse_int(text.substr(5, 2), c.month) ||
      !parse_int(text.substr(8, 2), c.day) || !parse_int(text.substr(11, 2), c.hour) ||
      !parse_int(text.substr(14, 2), c.minute) || !parse_int(text.substr(17, 2), c.second)) {
    return std::nullopt;
  }
  if (c.month < 1 || c.month > 12 || c.day < 1 || c.hour > 23 || c.minute > 59 ||
      c.second > 59 || c.hour < 0 || c.minute < 0 || c.second < 0) {
    return std::nullopt;
  }
  const EpochSeconds t = epoch_from_civil(c);
  // Rejects impossible dates such as Feb 30 (they round-trip to a different day).
  if (civil_from_epoch(t) != c) return std::nullopt;
  return t;
}

std::string format_iso8601(EpochSeconds t) {
  const CivilDateTime c = civil_from_epoch(t);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", c.year, c.month, c.day,
                c.hour, c.minute, c.second);
  return buf;
}

std::string format_iso_date(int year, int month, int day) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

EpochSeconds truncate_to_minute(EpochSeconds t) { return floor_div(t, 60) * 60; }

EpochSeconds round_to_hour(EpochSeconds t) { return floor_div(t + 1800, 3600) * 3600; }

int derive_hour(EpochSeconds t) { return civil_from_epoch(round_to_hour(t)).hour; }

}  // namespace ecodrive
