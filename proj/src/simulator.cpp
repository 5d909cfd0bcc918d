#include "ecodrive/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>

#include "ecodrive/rng.hpp"
#include "json.hpp"

namespace ecodrive {

ContextKey context_key_of(const DrivingEvent& event) {
  ContextKey key;
  key.hour = event.hour;
  key.weather = event.weather;
  key.elevation_bin = static_cast<int>(std::floor(event.elevation_change / 5.0));
  key.lat_cell = static_cast<int>(std::llround(event.anchor_latitude * 100.0));
  key.lon_cell = static_cast<int>(std::llround(event.anchor_longitude * 100.0));
  return key;
}

BestIndex build_best_index(std::span<const DrivingEvent> history) {
  BestIndex index;
  for (const DrivingEvent& ev : history) {
    if (ev.label != Label::Efficient || ev.is_idling) continue;
    const auto mileage = ev.capped_mileage();
    if (!mileage) continue;
    auto [it, inserted] = index.emplace(context_key_of(ev), *mileage);
    if (!inserted) it->second = std::max(it->second, *mileage);
  }
  return index;
}

SavingsReport simulate_savings(std::span<const DrivingEvent> events,
                               std::span<const FeedbackDecision> decisions,
                               const BestIndex& index) {
  if (events.size() != decisions.size()) {
    throw LengthMismatch("simulate_savings needs one decision per event (" +
                         std::to_string(events.size()) + " events, " +
                         std::to_string(decisions.size()) + " decisions)");
  }

  SavingsReport report;
  if (!events.empty()) report.journey_id = events.front().journey_id;
  report.event_adjusted_fuel.reserve(events.size());

  for (std::size_t i = 0; i < events.size(); ++i) {
    const DrivingEvent& ev = events[i];
    const FeedbackDecision& decision = decisions[i];
    report.actual_total_fuel += ev.fuel_consumed;
    report.actual_distance += ev.distance;

    double adjusted = ev.fuel_consumed;
    if (decision.verdict == Label::Inefficient) {
      if (ev.is_idling) {
        adjusted = 0.0;
        report.substitutions.push_back(
            Substitution{i, ev.minute_start, true, 0.0, ev.fuel_consumed, 0.0});
      } else {
        const auto it = index.find(context_key_of(ev));
        if (it == index.end()) {
          ++report.unmatched_count;
        } else {
          const auto actual_mileage = ev.capped_mileage();
          // Substitute only when history is strictly better; an event already
          // beating the index (or burning no fuel) stays as driven.
          if (actual_mileage && it->second > *actual_mileage && ev.distance > 0.0) {
            adjusted = ev.distance / it->second;
            report.substitutions.push_back(
                Substitution{i, ev.minute_start, false, it->second, ev.fuel_consumed, adjusted});
          }
        }
      }
    }
    report.adjusted_total_fuel += adjusted;
    report.event_adjusted_fuel.push_back(adjusted);
  }

  const double actual_mean = report.actual_total_fuel > 0.0
                                 ? report.actual_distance / report.actual_total_fuel
                                 : 0.0;
  const double adjusted_mean = report.adjusted_total_fuel > 0.0
                                   ? report.actual_distance / report.adjusted_total_fuel
                                   : 0.0;
  if (actual_mean > 0.0 && adjusted_mean > 0.0) {
    report.efficiency_gain_percent = 100.0 * (adjusted_mean - actual_mean) / actual_mean;
  } else if (report.actual_total_fuel > 0.0 && report.adjusted_total_fuel == 0.0) {
    report.efficiency_gain_percent = std::numeric_limits<double>::infinity();
  } else {
    report.efficiency_gain_percent = 0.0;
  }
  return report;
}

namespace {

nlohmann::ordered_json savings_to_json(const SavingsReport& report) {
  nlohmann::ordered_json j;
  j["journey_id"] = report.journey_id;
  j["actual_total_fuel"] = report.actual_total_fuel;
  j["adjusted_total_fuel"] = report.adjusted_total_fuel;
  j["actual_distance"] = report.actual_distance;
  j["efficiency_gain_percent"] = report.efficiency_gain_percent;
  j["unmatched_count"] = report.unmatched_count;
  j["substitutions"] = nlohmann::ordered_json::array();
  for (const Substitution& sub : report.substitutions) {
    j["substitutions"].push_back({{"event_index", sub.event_index},
                                  {"minute_start", format_iso8601(sub.minute_start)},
                                  {"idling", sub.idling},
                                  {"best_mileage", sub.best_mileage},
                                  {"actual_fuel", sub.actual_fuel},
                                  {"adjusted_fuel", sub.adjusted_fuel}});
  }
  return j;
}

}  // namespace

void write_savings_json(std::ostream& out, std::span<const SavingsReport> reports) {
  nlohmann::ordered_json doc;
  doc["journeys"] = nlohmann::ordered_json::array();
  double actual = 0.0, adjusted = 0.0, distance = 0.0;
  for (const SavingsReport& report : reports) {
    doc["journeys"].push_back(savings_to_json(report));
    actual += report.actual_total_fuel;
    adjusted += report.adjusted_total_fuel;
    distance += report.actual_distance;
  }
  double gain = 0.0;
  if (actual > 0.0 && adjusted > 0.0) {
    gain = 100.0 * (distance / adjusted - distance / actual) / (distance / actual);
  }
  doc["overall"] = {{"actual_total_fuel", actual},
                    {"adjusted_total_fuel", adjusted},
                    {"actual_distance", distance},
                    {"efficiency_gain_percent", gain}};
  out << doc.dump(2) << '\n';
}

void write_savings_json_file(const std::string& path, std::span<const SavingsReport> reports) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write savings file: " + path);
  write_savings_json(out, reports);
}

void write_savings_events_csv(std::ostream& out, std::span<const DrivingEvent> events,
                              const SavingsReport& report) {
  if (events.size() != report.event_adjusted_fuel.size()) {
    throw LengthMismatch("savings report does not cover these events");
  }
  char buf[256];
  for (std::size_t i = 0; i < events.size(); ++i) {
    const DrivingEvent& ev = events[i];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f\n",
                  format_iso8601(ev.minute_start).c_str(), ev.anchor_latitude,
                  ev.anchor_longitude, ev.fuel_consumed, report.event_adjusted_fuel[i]);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Journey generation

std::string to_string(DriverStyle style) {
  switch (style) {
    case DriverStyle::Smooth: return "smooth";
    case DriverStyle::Aggressive: return "aggressive";
    case DriverStyle::Mixed: return "mixed";
  }
  return "?";
}

namespace {

std::optional<DriverStyle> parse_driver_style(std::string_view text) {
  if (text == "smooth") return DriverStyle::Smooth;
  if (text == "aggressive") return DriverStyle::Aggressive;
  if (text == "mixed") return DriverStyle::Mixed;
  return std::nullopt;
}

}  // namespace

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kEarthRadiusKm = 6371.0088;
  const double to_rad = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * to_rad;
  const double dlon = (lon2 - lon1) * to_rad;
  const double s = std::sin(dlat / 2.0) * std::sin(dlat / 2.0) +
                   std::cos(lat1 * to_rad) * std::cos(lat2 * to_rad) * std::sin(dlon / 2.0) *
                       std::sin(dlon / 2.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

void GeneratorProfile::validate() const {
  if (route.size() < 2) throw InvalidProfile("generator route needs at least 2 waypoints");
  for (std::size_t i = 1; i < route.size(); ++i) {
    if (haversine_km(route[i - 1].latitude, route[i - 1].longitude, route[i].latitude,
                     route[i].longitude) <= 0.0) {
      throw InvalidProfile("generator route has a zero-length segment at waypoint " +
                           std::to_string(i));
    }
  }
  if (cruise_speed <= 0.0) throw InvalidProfile("cruise_speed must be positive");
  if (speed_noise < 0.0) throw InvalidProfile("speed_noise must be non-negative");
  if (aggressive_spread < 0.0) throw InvalidProfile("aggressive_spread must be non-negative");
  if (cadence_seconds < 3) throw InvalidProfile("cadence_seconds must be at least 3");
  if (cadence_jitter_seconds < 0 || cadence_jitter_seconds >= cadence_seconds) {
    throw InvalidProfile("cadence_jitter_seconds must be within [0, cadence)");
  }
  for (const auto& [hour, cap] : traffic_by_hour) {
    if (hour < 0 || hour > 23) throw InvalidProfile("traffic_by_hour keys must be hours 0..23");
    if (cap <= 0.0) throw InvalidProfile("traffic_by_hour caps must be positive");
  }
  for (const IdleStop& stop : idle_stops) {
    if (stop.offset_minutes < 0 || stop.duration_minutes <= 0) {
      throw InvalidProfile("idle stops need offset >= 0 and duration > 0 minutes");
    }
  }
  if (fuel.base_rate_lph < 0.0 || fuel.k_v < 0.0 || fuel.k_a < 0.0 || fuel.idle_rate_lph < 0.0) {
    throw InvalidProfile("fuel model constants must be non-negative");
  }
  if (initial_fuel_level <= 0.0) throw InvalidProfile("initial_fuel_level must be positive");
}

namespace {

struct RoutePosition {
  double latitude = 0.0;
  double longitude = 0.0;
  double elevation = 0.0;
  double bearing = 0.0;
};

class RouteInterpolator {
 public:
  explicit RouteInterpolator(const std::vector<Waypoint>& route) : route_(route) {
    cumulative_.push_back(0.0);
    for (std::size_t i = 1; i < route.size(); ++i) {
      cumulative_.push_back(cumulative_.back() +
                            haversine_km(route[i - 1].latitude, route[i - 1].longitude,
                                         route[i].latitude, route[i].longitude));
    }
  }

  double length_km() const { return cumulative_.back(); }

  RoutePosition at(double distance_km) const {
    const double d = std::clamp(distance_km, 0.0, length_km());
    std::size_t seg = 1;
    while (seg + 1 < cumulative_.size() && cumulative_[seg] < d) ++seg;
    const Waypoint& a = route_[seg - 1];
    const Waypoint& b = route_[seg];
    const double seg_len = cumulative_[seg] - cumulative_[seg - 1];
    const double f = seg_len > 0.0 ? (d - cumulative_[seg - 1]) / seg_len : 0.0;

    RoutePosition pos;
    pos.latitude = a.latitude + f * (b.latitude - a.latitude);
    pos.longitude = a.longitude + f * (b.longitude - a.longitude);
    pos.elevation = a.elevation + f * (b.elevation - a.elevation);

    const double to_rad = std::numbers::pi / 180.0;
    const double dlon = (b.longitude - a.longitude) * to_rad;
    const double y = std::sin(dlon) * std::cos(b.latitude * to_rad);
    const double x = std::cos(a.latitude * to_rad) * std::sin(b.latitude * to_rad) -
                     std::sin(a.latitude * to_rad) * std::cos(b.latitude * to_rad) *
                         std::cos(dlon);
    pos.bearing = std::fmod(std::atan2(y, x) / to_rad + 360.0, 360.0);
    return pos;
  }

 private:
  const std::vector<Waypoint>& route_;
  std::vector<double> cumulative_;
};

}  // namespace

std::vector<RawRecord> generate_journey(const GeneratorProfile& profile, std::uint64_t seed) {
  profile.validate();
  Rng rng(derive_seed(seed, 0));
  const RouteInterpolator route(profile.route);
  const double route_len = route.length_km();

  const auto in_idle_window = [&](EpochSeconds t) {
    for (const IdleStop& stop : profile.idle_stops) {
      const EpochSeconds start = profile.departure + static_cast<EpochSeconds>(stop.offset_minutes) * 60;
      const EpochSeconds end = start + static_cast<EpochSeconds>(stop.duration_minutes) * 60;
      if (t >= start && t < end) return true;
    }
    return false;
  };

  // Style dynamics: smooth drivers track the target gently; aggressive
  // drivers chase an oscillating target with harsh transitions.
  const double smooth_accel = 800.0, smooth_decel = 1200.0;    // km/h^2
  const double harsh_accel = 4000.0, harsh_decel = 6000.0;

  std::vector<RawRecord> records;
  EpochSeconds t = profile.departure;
  double v = 0.0;
  double traveled = 0.0;
  double fuel_level = profile.initial_fuel_level;
  double target_offset = 0.0;
  EpochSeconds next_target_switch = t;
  bool aggressive_phase = profile.style == DriverStyle::Aggressive;
  EpochSeconds next_phase_switch =
      profile.style == DriverStyle::Mixed ? t + rng.range_int(240, 360) : 0;

  while (traveled < route_len - 1e-9) {
    const int dt_s = rng.range_int(profile.cadence_seconds - profile.cadence_jitter_seconds,
                                   profile.cadence_seconds + profile.cadence_jitter_seconds);
    t += dt_s;
    const double dt_h = static_cast<double>(dt_s) / 3600.0;

    if (profile.style == DriverStyle::Mixed && t >= next_phase_switch) {
      aggressive_phase = !aggressive_phase;
      next_phase_switch = t + rng.range_int(240, 360);
    }

    double v_new = 0.0;
    if (!in_idle_window(t)) {
      double target = profile.cruise_speed;
      if (aggressive_phase) {
        if (t >= next_target_switch) {
          target_offset = rng.range(-profile.aggressive_spread, profile.aggressive_spread);
          next_target_switch = t + rng.range_int(45, 90);
        }
        target += target_offset;
      }
      const int clock_hour =
          civil_from_epoch(t + static_cast<EpochSeconds>(profile.timezone_offset_minutes) * 60)
              .hour;
      if (const auto cap = profile.traffic_by_hour.find(clock_hour);
          cap != profile.traffic_by_hour.end()) {
        target = std::min(target, cap->second);
      }
      const double noise = aggressive_phase ? profile.speed_noise : 0.3 * profile.speed_noise;
      if (noise > 0.0) target += rng.range(-noise, noise);
      target = std::clamp(target, 0.0, 160.0);

      const double accel_limit = aggressive_phase ? harsh_accel : smooth_accel;
      const double decel_limit = aggressive_phase ? harsh_decel : smooth_decel;
      v_new = v + std::clamp(target - v, -decel_limit * dt_h, accel_limit * dt_h);
      if (v_new < 0.0) v_new = 0.0;
    }

    const double accel = (v_new - v) / dt_h;
    const double dist = (v + v_new) / 2.0 * dt_h;
    traveled += dist;

    double fuel = profile.fuel.base_rate_lph * dt_h +
                  profile.fuel.k_v * std::fabs(v_new - profile.fuel.v_opt) * dt_h +
                  profile.fuel.k_a * std::max(accel, 0.0) * dt_h;
    if (v_new == 0.0) fuel += profile.fuel.idle_rate_lph * dt_h;
    fuel_level = std::max(0.0, fuel_level - fuel);

    const RoutePosition pos = route.at(traveled);
    RawRecord rec;
    rec.timestamp = t;
    rec.longitude = pos.longitude;
    rec.latitude = pos.latitude;
    rec.bearing = pos.bearing;
    rec.elevation = pos.elevation;
    rec.distance = dist;
    rec.speed = v_new;
    rec.acceleration = accel;
    rec.ignition = true;
    rec.battery_voltage = profile.battery_voltage + rng.range(-0.2, 0.2);
    rec.fuel_level = fuel_level;
    rec.fuel_consumed = fuel;
    records.push_back(rec);

    v = v_new;
    if (records.size() > 200000) {
      throw InvalidProfile("generated journey exceeds 200000 records; check route and caps");
    }
  }
  return records;
}

FixtureWeatherProvider make_weather_fixture(const GeneratorProfile& profile,
                                            std::span<const RawRecord> records) {
  FixtureWeatherProvider fixture;
  const EpochSeconds tz_s = static_cast<EpochSeconds>(profile.timezone_offset_minutes) * 60;
  const auto condition_for = [&](int hour) {
    const auto it = profile.weather_by_hour.find(hour);
    return it != profile.weather_by_hour.end() ? it->second : WeatherCondition::Clear;
  };
  // Both the record's own rounding and its minute anchor's rounding are
  // covered so every ingest-side query resolves.
  for (const RawRecord& rec : records) {
    for (const EpochSeconds base : {rec.timestamp, truncate_to_minute(rec.timestamp)}) {
      const CivilDateTime civil = civil_from_epoch(round_to_hour(base + tz_s));
      fixture.insert(rec.latitude, rec.longitude, civil.year, civil.month, civil.day, civil.hour,
                     condition_for(civil.hour));
    }
  }
  return fixture;
}

// ---------------------------------------------------------------------------
// Profile file I/O

GeneratorProfile GeneratorProfile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open generator profile: " + path);
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw InvalidProfile("generator profile is not a JSON object: " + path);
  }
  GeneratorProfile profile;
  try {
    for (const auto& wp : doc.at("route")) {
      profile.route.push_back(Waypoint{wp.at("latitude").get<double>(),
                                       wp.at("longitude").get<double>(),
                                       wp.value("elevation", 0.0)});
    }
    const auto departure = parse_iso8601(doc.at("departure").get<std::string>());
    if (!departure) throw InvalidProfile("bad departure timestamp in profile " + path);
    profile.departure = *departure;
    const auto style = parse_driver_style(doc.value("style", "smooth"));
    if (!style) throw InvalidProfile("unknown driver style in profile " + path);
    profile.style = *style;
    profile.cruise_speed = doc.value("cruise_speed", profile.cruise_speed);
    profile.speed_noise = doc.value("speed_noise", profile.speed_noise);
    profile.aggressive_spread = doc.value("aggressive_spread", profile.aggressive_spread);
    if (doc.contains("traffic_by_hour")) {
      for (const auto& [hour, cap] : doc.at("traffic_by_hour").items()) {
        profile.traffic_by_hour[std::stoi(hour)] = cap.get<double>();
      }
    }
    if (doc.contains("weather_by_hour")) {
      for (const auto& [hour, name] : doc.at("weather_by_hour").items()) {
        const auto cond = parse_weather(name.get<std::string>());
        if (!cond) {
          throw InvalidProfile("unknown weather descriptor '" + name.get<std::string>() +
                               "' in profile " + path);
        }
        profile.weather_by_hour[std::stoi(hour)] = *cond;
      }
    }
    if (doc.contains("idle_stops")) {
      for (const auto& stop : doc.at("idle_stops")) {
        profile.idle_stops.push_back(IdleStop{stop.at("offset_minutes").get<int>(),
                                              stop.at("duration_minutes").get<int>()});
      }
    }
    if (doc.contains("fuel")) {
      const auto& fuel = doc.at("fuel");
      profile.fuel.base_rate_lph = fuel.value("base_rate_lph", profile.fuel.base_rate_lph);
      profile.fuel.k_v = fuel.value("k_v", profile.fuel.k_v);
      profile.fuel.v_opt = fuel.value("v_opt", profile.fuel.v_opt);
      profile.fuel.k_a = fuel.value("k_a", profile.fuel.k_a);
      profile.fuel.idle_rate_lph = fuel.value("idle_rate_lph", profile.fuel.idle_rate_lph);
    }
    profile.cadence_seconds = doc.value("cadence_seconds", profile.cadence_seconds);
    profile.cadence_jitter_seconds =
        doc.value("cadence_jitter_seconds", profile.cadence_jitter_seconds);
    profile.battery_voltage = doc.value("battery_voltage", profile.battery_voltage);
    profile.initial_fuel_level = doc.value("initial_fuel_level", profile.initial_fuel_level);
    profile.timezone_offset_minutes =
        doc.value("timezone_offset_minutes", profile.timezone_offset_minutes);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidProfile("generator profile " + path + ": " + e.what());
  }
  profile.validate();
  return profile;
}

void GeneratorProfile::save(const std::string& path) const {
  nlohmann::ordered_json doc;
  doc["route"] = nlohmann::ordered_json::array();
  for (const Waypoint& wp : route) {
    doc["route"].push_back({{"latitude", wp.latitude},
                            {"longitude", wp.longitude},
                            {"elevation", wp.elevation}});
  }
  doc["departure"] = format_iso8601(departure);
  doc["style"] = to_string(style);
  doc["cruise_speed"] = cruise_speed;
  doc["speed_noise"] = speed_noise;
  doc["aggressive_spread"] = aggressive_spread;
  doc["traffic_by_hour"] = nlohmann::ordered_json::object();
  for (const auto& [hour, cap] : traffic_by_hour) {
    doc["traffic_by_hour"][std::to_string(hour)] = cap;
  }
  doc["weather_by_hour"] = nlohmann::ordered_json::object();
  for (const auto& [hour, cond] : weather_by_hour) {
    doc["weather_by_hour"][std::to_string(hour)] = to_string(cond);
  }
  doc["idle_stops"] = nlohmann::ordered_json::array();
  for (const IdleStop& stop : idle_stops) {
    doc["idle_stops"].push_back(
        {{"offset_minutes", stop.offset_minutes}, {"duration_minutes", stop.duration_minutes}});
  }
  doc["fuel"] = {{"base_rate_lph", fuel.base_rate_lph},
                 {"k_v", fuel.k_v},
                 {"v_opt", fuel.v_opt},
                 {"k_a", fuel.k_a},
                 {"idle_rate_lph", fuel.idle_rate_lph}};
  doc["cadence_seconds"] = cadence_seconds;
  doc["cadence_jitter_seconds"] = cadence_jitter_seconds;
  doc["battery_voltage"] = battery_voltage;
  doc["initial_fuel_level"] = initial_fuel_level;
  doc["timezone_offset_minutes"] = timezone_offset_minutes;

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write generator profile: " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace ecodrive
