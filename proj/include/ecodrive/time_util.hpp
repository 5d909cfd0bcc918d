#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ecodrive {

/// Seconds since the Unix epoch, UTC. Telemetry timestamps have second resolution.
using EpochSeconds = std::int64_t;

struct CivilDateTime {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31
  int hour = 0;   // 0..23
  int minute = 0;
  int second = 0;

  bool operator==(const CivilDateTime&) const = default;
};

std::int64_t days_from_civil(int year, int month, int day);
CivilDateTime civil_from_epoch(EpochSeconds t);
EpochSeconds epoch_from_civil(const CivilDateTime& c);

/// Accepts "YYYY-MM-DDTHH:MM:SS" with 'T' or ' ' separator and optional
/// trailing 'Z'. Returns nullopt for anything else (including impossible dates).
std::optional<EpochSeconds> parse_iso8601(std::string_view text);

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_iso8601(EpochSeconds t);

/// "YYYY-MM-DD"
std::string format_iso_date(int year, int month, int day);

std::int64_t floor_div(std::int64_t a, std::int64_t b);

EpochSeconds truncate_to_minute(EpochSeconds t);

/// Start of the hour nearest to t (minute 30 rounds up).
EpochSeconds round_to_hour(EpochSeconds t);

/// Hour of day after nearest-hour rounding; 23:40 wraps to 0.
int derive_hour(EpochSeconds t);

}  // namespace ecodrive
