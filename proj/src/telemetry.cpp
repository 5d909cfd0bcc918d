#include "ecodrive/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace ecodrive {

std::string to_string(Label label) {
  switch (label) {
    case Label::Efficient: return "Efficient";
    case Label::Inefficient: return "Inefficient";
    default: return "Unlabeled";
  }
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "Efficient") return Label::Efficient;
  if (text == "Inefficient") return Label::Inefficient;
  if (text == "Unlabeled") return Label::Unlabeled;
  return std::nullopt;
}

long ParseResult::malformed_count() const {
  return std::count_if(issues.begin(), issues.end(), [](const ParseIssue& i) {
    return i.kind == ParseIssueKind::MalformedRow;
  });
}

long ParseResult::range_violation_count() const {
  return std::count_if(issues.begin(), issues.end(), [](const ParseIssue& i) {
    return i.kind == ParseIssueKind::RangeViolation;
  });
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
}

bool parse_bool(std::string_view s, bool& out) {
  if (s == "1") { out = true; return true; }
  if (s == "0") { out = false; return true; }
  std::string lower;
  for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "true") { out = true; return true; }
  if (lower == "false") { out = false; return true; }
  return false;
}

struct ColumnIndex {
  int timestamp, longitude, latitude, bearing, elevation, distance;
  int speed, acceleration, ignition, battery_voltage, fuel_level, fuel_consumed;
};

ColumnIndex resolve_columns(const std::vector<std::string_view>& header,
                            const ColumnSchema& schema) {
  const auto find = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw ConfigError("telemetry header is missing column '" + name + "'");
  };
  return ColumnIndex{
      find(schema.timestamp),     find(schema.longitude),  find(schema.latitude),
      find(schema.bearing),       find(schema.elevation),  find(schema.distance),
      find(schema.speed),         find(schema.acceleration), find(schema.ignition),
      find(schema.battery_voltage), find(schema.fuel_level), find(schema.fuel_consumed)};
}

}  // namespace

ParseResult parse_telemetry(std::istream& in, const ParseOptions& options) {
  ParseResult result;
  std::string line;
  long line_no = 0;

  // Header. An entirely empty stream is a valid empty dataset.
  if (!std::getline(in, line)) return result;
  ++line_no;
  const auto header = split_fields(line, options.delimiter);
  const ColumnIndex cols = resolve_columns(header, options.schema);
  const std::size_t expected_fields = header.size();

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, options.delimiter);
    if (fields.size() != expected_fields) {
      result.issues.push_back({ParseIssueKind::MalformedRow, line_no, "",
                               "expected " + std::to_string(expected_fields) + " fields, got " +
                                   std::to_string(fields.size())});
      continue;
    }

    RawRecord rec;
    bool malformed = false;
    const auto field_d = [&](int idx, double& out, const char* name) {
      if (!parse_double(fields[static_cast<std::size_t>(idx)], out)) {
        if (!malformed) {
          result.issues.push_back({ParseIssueKind::MalformedRow, line_no, name,
                                   "unparseable value '" +
                                       std::string(fields[static_cast<std::size_t>(idx)]) + "'"});
        }
        malformed = true;
      }
    };

    const auto ts = parse_iso8601(fields[static_cast<std::size_t>(cols.timestamp)]);
    if (!ts) {
      result.issues.push_back({ParseIssueKind::MalformedRow, line_no, "timestamp",
                               "unparseable timestamp '" +
                                   std::string(fields[static_cast<std::size_t>(cols.timestamp)]) +
                                   "'"});
      continue;
    }
    rec.timestamp = *ts;
    field_d(cols.longitude, rec.longitude, "longitude");
    field_d(cols.latitude, rec.latitude, "latitude");
    field_d(cols.bearing, rec.bearing, "bearing");
    field_d(cols.elevation, rec.elevation, "elevation");
    field_d(cols.distance, rec.distance, "distance");
    field_d(cols.speed, rec.speed, "speed");
    field_d(cols.acceleration, rec.acceleration, "acceleration");
    field_d(cols.battery_voltage, rec.battery_voltage, "battery_voltage");
    field_d(cols.fuel_level, rec.fuel_level, "fuel_level");
    field_d(cols.fuel_consumed, rec.fuel_consumed, "fuel_consumed");
    if (!parse_bool(fields[static_cast<std::size_t>(cols.ignition)], rec.ignition)) {
      if (!malformed) {
        result.issues.push_back({ParseIssueKind::MalformedRow, line_no, "ignition",
                                 "unparseable boolean '" +
                                     std::string(fields[static_cast<std::size_t>(cols.ignition)]) +
                                     "'"});
      }
      malformed = true;
    }
    if (malformed) continue;

    bool violated = false;
    const auto check = [&](bool ok, const char* field, const std::string& why) {
      if (!ok) {
        result.issues.push_back({ParseIssueKind::RangeViolation, line_no, field, why});
        violated = true;
      }
    };
    check(rec.speed >= 0.0, "speed", "must be >= 0");
    check(rec.distance >= 0.0, "distance", "must be >= 0");
    check(rec.fuel_consumed >= 0.0, "fuel_consumed", "must be >= 0");
    check(rec.fuel_level >= 0.0 && rec.fuel_level <= options.tank_capacity, "fuel_level",
          "must be within [0, " + std::to_string(options.tank_capacity) + "]");
    check(rec.latitude >= -90.0 && rec.latitude <= 90.0, "latitude", "must be within [-90, 90]");
    check(rec.longitude >= -180.0 && rec.longitude <= 180.0, "longitude",
          "must be within [-180, 180]");
    check(rec.bearing >= 0.0 && rec.bearing < 360.0, "bearing", "must be within [0, 360)");
    if (violated) continue;

    result.records.push_back(rec);
  }
  return result;
}

ParseResult parse_telemetry_file(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open telemetry file: " + path);
  return parse_telemetry(in, options);
}

void write_telemetry_csv(std::ostream& out, std::span<const RawRecord> records) {
  out << "timestamp,longitude,latitude,bearing,elevation,distance,speed,acceleration,"
         "ignition,battery_voltage,fuel_level,fuel_consumed\n";
  char buf[512];
  for (const RawRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.2f,%.2f,%.6f,%.3f,%.3f,%d,%.2f,%.4f,%.6f\n",
                  format_iso8601(r.timestamp).c_str(), r.longitude, r.latitude, r.bearing,
                  r.elevation, r.distance, r.speed, r.acceleration, r.ignition ? 1 : 0,
                  r.battery_voltage, r.fuel_level, r.fuel_consumed);
    out << buf;
  }
}

void write_telemetry_csv_file(const std::string& path, std::span<const RawRecord> records) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write telemetry file: " + path);
  write_telemetry_csv(out, records);
}

std::vector<Journey> split_journeys(std::vector<RawRecord> records, const SplitOptions& options) {
  std::vector<Journey> journeys;
  if (records.empty()) return journeys;

  const double gap_s = options.gap_threshold_minutes * 60.0;
  const double ignition_gap_s = options.ignition_gap_minutes * 60.0;

  const auto next_id = [&journeys] {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "J%04zu", journeys.size() + 1);
    return std::string(buf);
  };

  journeys.push_back(Journey{next_id(), {records.front()}});
  for (std::size_t i = 1; i < records.size(); ++i) {
    const RawRecord& prev = records[i - 1];
    const RawRecord& cur = records[i];
    const double dt = static_cast<double>(cur.timestamp - prev.timestamp);
    const bool gap_break = dt > gap_s;
    const bool ignition_break = !prev.ignition && cur.ignition && dt > ignition_gap_s;
    if (gap_break || ignition_break) {
      journeys.push_back(Journey{next_id(), {}});
    }
    journeys.back().records.push_back(cur);
  }
  return journeys;
}

bool idle_candidate(std::span<const RawRecord> minute_records) {
  if (minute_records.empty()) return false;
  return std::all_of(minute_records.begin(), minute_records.end(),
                     [](const RawRecord& r) { return r.speed == 0.0 && r.ignition; });
}

bool derive_is_idling(std::span<const RawRecord> minute_records,
                      bool previous_minute_idle_candidate) {
  return previous_minute_idle_candidate && idle_candidate(minute_records);
}

AggregateResult aggregate_events(const Journey& journey, WeatherProvider* provider,
                                 const AggregateOptions& options) {
  AggregateResult result;
  if (journey.records.empty()) return result;

  const std::int64_t tz_s = static_cast<std::int64_t>(options.timezone_offset_minutes) * 60;

  bool prev_candidate = false;
  EpochSeconds prev_minute = 0;
  bool have_prev_minute = false;

  std::size_t begin = 0;
  const auto& recs = journey.records;
  while (begin < recs.size()) {
    const EpochSeconds minute = truncate_to_minute(recs[begin].timestamp);
    std::size_t end = begin + 1;
    while (end < recs.size() && truncate_to_minute(recs[end].timestamp) == minute) ++end;
    const std::span<const RawRecord> window(recs.data() + begin, end - begin);

    DrivingEvent ev;
    ev.journey_id = journey.id;
    ev.minute_start = minute;
    double speed_sum = 0.0, accel_sum = 0.0;
    for (const RawRecord& r : window) {
      speed_sum += r.speed;
      accel_sum += r.acceleration;
      ev.distance += r.distance;
      ev.fuel_consumed += r.fuel_consumed;
    }
    const double n = static_cast<double>(window.size());
    ev.avg_speed = speed_sum / n;
    ev.avg_acceleration = accel_sum / n;
    ev.elevation_change = window.back().elevation - window.front().elevation;
    ev.anchor_latitude = window.front().latitude;
    ev.anchor_longitude = window.front().longitude;
    if (ev.fuel_consumed > 0.0) ev.fuel_mileage = ev.distance / ev.fuel_consumed;

    // The candidate only carries across adjacent minutes; a tracker gap means
    // the condition cannot be shown to have held continuously.
    const bool consecutive = have_prev_minute && minute == prev_minute + 60;
    ev.is_idling = derive_is_idling(window, prev_candidate && consecutive);
    prev_candidate = idle_candidate(window);
    prev_minute = minute;
    have_prev_minute = true;

    const EpochSeconds rounded = round_to_hour(minute + tz_s);
    const CivilDateTime civil = civil_from_epoch(rounded);
    ev.hour = civil.hour;

    std::optional<WeatherCondition> weather;
    if (provider != nullptr) {
      weather = provider->lookup(WeatherQuery{ev.anchor_latitude, ev.anchor_longitude,
                                              civil.year, civil.month, civil.day, civil.hour});
    }
    if (weather) {
      ev.weather = *weather;
    } else {
      ev.weather = options.weather_fallback;
      ++result.weather_unavailable;
    }

    result.events.push_back(std::move(ev));
    begin = end;
  }
  return result;
}

// ---------------------------------------------------------------------------
// JSONL serialization

namespace {

nlohmann::ordered_json event_to_json(const DrivingEvent& ev) {
  nlohmann::ordered_json j;
  j["journey_id"] = ev.journey_id;
  j["minute_start"] = format_iso8601(ev.minute_start);
  j["avg_speed"] = ev.avg_speed;
  j["avg_acceleration"] = ev.avg_acceleration;
  j["elevation_change"] = ev.elevation_change;
  j["distance"] = ev.distance;
  j["fuel_consumed"] = ev.fuel_consumed;
  j["is_idling"] = ev.is_idling;
  j["hour"] = ev.hour;
  j["weather"] = to_string(ev.weather);
  if (ev.fuel_mileage) {
    j["fuel_mileage"] = *ev.fuel_mileage;
  } else {
    j["fuel_mileage"] = nullptr;
  }
  j["location_anchor"] = {{"latitude", ev.anchor_latitude}, {"longitude", ev.anchor_longitude}};
  j["label"] = to_string(ev.label);
  return j;
}

DrivingEvent event_from_json(const nlohmann::json& j, long line_no) {
  const auto fail = [line_no](const std::string& what) -> DataError {
    return DataError("events line " + std::to_string(line_no) + ": " + what);
  };
  try {
    DrivingEvent ev;
    ev.journey_id = j.at("journey_id").get<std::string>();
    const auto ts = parse_iso8601(j.at("minute_start").get<std::string>());
    if (!ts) throw fail("bad minute_start");
    ev.minute_start = *ts;
    ev.avg_speed = j.at("avg_speed").get<double>();
    ev.avg_acceleration = j.at("avg_acceleration").get<double>();
    ev.elevation_change = j.at("elevation_change").get<double>();
    ev.distance = j.at("distance").get<double>();
    ev.fuel_consumed = j.at("fuel_consumed").get<double>();
    ev.is_idling = j.at("is_idling").get<bool>();
    ev.hour = j.at("hour").get<int>();
    if (ev.hour < 0 || ev.hour > 23) throw fail("hour out of range");
    const auto weather = parse_weather(j.at("weather").get<std::string>());
    if (!weather) throw fail("unknown weather descriptor");
    ev.weather = *weather;
    if (j.contains("fuel_mileage") && !j.at("fuel_mileage").is_null()) {
      ev.fuel_mileage = j.at("fuel_mileage").get<double>();
    }
    ev.anchor_latitude = j.at("location_anchor").at("latitude").get<double>();
    ev.anchor_longitude = j.at("location_anchor").at("longitude").get<double>();
    const auto label = parse_label(j.at("label").get<std::string>());
    if (!label) throw fail("unknown label");
    ev.label = *label;
    return ev;
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
}

}  // namespace

void write_events_jsonl(std::ostream& out, std::span<const DrivingEvent> events) {
  for (const DrivingEvent& ev : events) {
    out << event_to_json(ev).dump() << '\n';
  }
}

void write_events_jsonl_file(const std::string& path, std::span<const DrivingEvent> events) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write events file: " + path);
  write_events_jsonl(out, events);
}

std::vector<DrivingEvent> read_events_jsonl(std::istream& in) {
  std::vector<DrivingEvent> events;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw DataError("events line " + std::to_string(line_no) + ": invalid JSON");
    }
    events.push_back(event_from_json(j, line_no));
  }
  return events;
}

std::vector<DrivingEvent> read_events_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open events file: " + path);
  return read_events_jsonl(in);
}

}  // namespace ecodrive
