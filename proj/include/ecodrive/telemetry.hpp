#pragma once

#include <algorithm>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecodrive/time_util.hpp"
#include "ecodrive/weather.hpp"

namespace ecodrive {

enum class Label { Unlabeled = 0, Efficient, Inefficient };

std::string to_string(Label label);
std::optional<Label> parse_label(std::string_view text);

/// One telemetry sample as transmitted by the vehicle tracker.
struct RawRecord {
  EpochSeconds timestamp = 0;
  double longitude = 0.0;       // degrees, [-180, 180]
  double latitude = 0.0;        // degrees, [-90, 90]
  double bearing = 0.0;         // degrees, [0, 360)
  double elevation = 0.0;       // meters
  double distance = 0.0;        // km since previous record
  double speed = 0.0;           // km/h
  double acceleration = 0.0;    // km/h^2
  bool ignition = false;
  double battery_voltage = 0.0;
  double fuel_level = 0.0;      // liters
  double fuel_consumed = 0.0;   // liters since previous record
};

/// Reported fuel economies are capped here; near-zero consumption minutes
/// would otherwise blow up summary means.
inline constexpr double kMileageCap = 999.0;

/// One-minute aggregated behavior vector with derived features.
struct DrivingEvent {
  std::string journey_id;
  EpochSeconds minute_start = 0;  // truncated to the minute
  double avg_speed = 0.0;
  double avg_acceleration = 0.0;
  double elevation_change = 0.0;  // last minus first elevation in the minute
  double distance = 0.0;          // km, sum over the minute
  double fuel_consumed = 0.0;     // liters, sum over the minute
  bool is_idling = false;
  int hour = 0;  // nearest local hour, 0..23
  WeatherCondition weather = WeatherCondition::Clear;
  std::optional<double> fuel_mileage;  // km/L; absent when fuel_consumed == 0
  double anchor_latitude = 0.0;        // first record in the minute
  double anchor_longitude = 0.0;
  Label label = Label::Unlabeled;

  std::optional<double> capped_mileage() const {
    if (!fuel_mileage) return std::nullopt;
    return std::min(*fuel_mileage, kMileageCap);
  }
};

/// Header names for the twelve telemetry columns; remap to ingest foreign files.
struct ColumnSchema {
  std::string timestamp = "timestamp";
  std::string longitude = "longitude";
  std::string latitude = "latitude";
  std::string bearing = "bearing";
  std::string elevation = "elevation";
  std::string distance = "distance";
  std::string speed = "speed";
  std::string acceleration = "acceleration";
  std::string ignition = "ignition";
  std::string battery_voltage = "battery_voltage";
  std::string fuel_level = "fuel_level";
  std::string fuel_consumed = "fuel_consumed";
};

enum class ParseIssueKind { MalformedRow, RangeViolation };

struct ParseIssue {
  ParseIssueKind kind = ParseIssueKind::MalformedRow;
  long line = 0;       // 1-based, header is line 1
  std::string field;   // offending column for range violations
  std::string detail;
};

struct ParseOptions {
  char delimiter = ',';
  ColumnSchema schema;
  double tank_capacity = 218.0;  // liters; upper bound for fuel_level
};

struct ParseResult {
  std::vector<RawRecord> records;
  std::vector<ParseIssue> issues;

  long malformed_count() const;
  long range_violation_count() const;
};

/// Malformed rows and range violations are collected, not fatal; a missing or
/// incomplete header is a ConfigError. An empty stream parses to zero records.
ParseResult parse_telemetry(std::istream& in, const ParseOptions& options = {});
ParseResult parse_telemetry_file(const std::string& path, const ParseOptions& options = {});

void write_telemetry_csv(std::ostream& out, std::span<const RawRecord> records);
void write_telemetry_csv_file(const std::string& path, std::span<const RawRecord> records);

struct Journey {
  std::string id;
  std::vector<RawRecord> records;
};

struct SplitOptions {
  double gap_threshold_minutes = 120.0;
  double ignition_gap_minutes = 30.0;
};

/// Records must be time-ordered. A new journey starts when the inter-record
/// gap exceeds gap_threshold, or when ignition flips off->on after a gap
/// longer than ignition_gap. Ids are assigned J0001, J0002, ... in order.
std::vector<Journey> split_journeys(std::vector<RawRecord> records,
                                    const SplitOptions& options = {});

/// True when every record in the minute has zero speed and ignition on; this
/// is the per-minute condition that arms the idling flag.
bool idle_candidate(std::span<const RawRecord> minute_records);

/// Idling requires the zero-speed/ignition-on condition to extend past one
/// minute: the current minute must satisfy it AND it must have held through
/// the previous minute (previous_minute_idle_candidate).
bool derive_is_idling(std::span<const RawRecord> minute_records,
                      bool previous_minute_idle_candidate);

struct AggregateOptions {
  int timezone_offset_minutes = 0;  // applied before hour rounding and weather dates
  WeatherCondition weather_fallback = WeatherCondition::Clear;
};

struct AggregateResult {
  std::vector<DrivingEvent> events;
  long weather_unavailable = 0;
};

/// One event per wall-clock minute containing at least one record. Speeds and
/// accelerations are unweighted means over the minute's records; distance and
/// fuel are sums; elevation_change is last minus first. Minutes without
/// records produce no event, and a gap resets the idling candidate. `provider`
/// may be null; unavailable weather falls back to options.weather_fallback.
AggregateResult aggregate_events(const Journey& journey, WeatherProvider* provider,
                                 const AggregateOptions& options = {});

// Events travel between pipeline stages as JSON lines, one object per event.
void write_events_jsonl(std::ostream& out, std::span<const DrivingEvent> events);
void write_events_jsonl_file(const std::string& path, std::span<const DrivingEvent> events);
std::vector<DrivingEvent> read_events_jsonl(std::istream& in);
std::vector<DrivingEvent> read_events_jsonl_file(const std::string& path);

}  // namespace ecodrive
