#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ecodrive/engine.hpp"
#include "ecodrive/telemetry.hpp"
#include "ecodrive/weather.hpp"

namespace ecodrive {

/// External-condition bucket used to match "the same conditions" across
/// history: nearest local hour, weather descriptor, 5 m elevation-change bin
/// (half-open [k*5, (k+1)*5)) and a 0.01-degree location cell.
struct ContextKey {
  int hour = 0;
  WeatherCondition weather = WeatherCondition::Clear;
  int elevation_bin = 0;
  int lat_cell = 0;  // hundredths of a degree, nearest
  int lon_cell = 0;

  auto operator<=>(const ContextKey&) const = default;
};

ContextKey context_key_of(const DrivingEvent& event);

/// Best capped fuel mileage among Efficient, non-idling events per context.
using BestIndex = std::map<ContextKey, double>;

BestIndex build_best_index(std::span<const DrivingEvent> history);

struct Substitution {
  std::size_t event_index = 0;
  EpochSeconds minute_start = 0;
  bool idling = false;        // fuel zeroed by the stop-engine advisory
  double best_mileage = 0.0;  // 0 for idling substitutions
  double actual_fuel = 0.0;
  double adjusted_fuel = 0.0;
};

struct SavingsReport {
  std::string journey_id;
  double actual_total_fuel = 0.0;
  double adjusted_total_fuel = 0.0;
  double actual_distance = 0.0;
  double efficiency_gain_percent = 0.0;
  long unmatched_count = 0;  // Inefficient events with no index entry
  std::vector<Substitution> substitutions;
  std::vector<double> event_adjusted_fuel;  // one entry per event
};

/// Replays the journey against the historical best: idling Inefficient events
/// drop their fuel to zero (engine stopped); other Inefficient events with a
/// matching key and a strictly better historical mileage are re-fueled at
/// that mileage. Events whose actual economy already beats the index are left
/// unchanged, which keeps the gain non-negative. Decisions must correspond
/// 1:1 to events.
SavingsReport simulate_savings(std::span<const DrivingEvent> events,
                               std::span<const FeedbackDecision> decisions,
                               const BestIndex& index);

void write_savings_json(std::ostream& out, std::span<const SavingsReport> reports);
void write_savings_json_file(const std::string& path, std::span<const SavingsReport> reports);

/// Per-event actual vs. adjusted fuel by location, for external plotting.
void write_savings_events_csv(std::ostream& out, std::span<const DrivingEvent> events,
                              const SavingsReport& report);

// ---------------------------------------------------------------------------
// Synthetic journey generation

enum class DriverStyle { Smooth = 0, Aggressive, Mixed };

std::string to_string(DriverStyle style);

struct Waypoint {
  double latitude = 0.0;
  double longitude = 0.0;
  double elevation = 0.0;  // meters
};

struct IdleStop {
  int offset_minutes = 0;    // from departure; keep minute-aligned departures
  int duration_minutes = 0;  // engine stays on, speed is zero
};

/// Disclosed synthetic fuel model, per record of duration dt hours at record
/// speed v (km/h) and acceleration a (km/h^2):
///   liters = base_rate*dt + k_v*|v - v_opt|*dt + k_a*max(a, 0)*dt
///          + idle_rate*dt*[v == 0 and ignition on]
struct FuelModel {
  double base_rate_lph = 1.2;
  double k_v = 0.1;       // L per km of |v - v_opt| integrated over an hour
  double v_opt = 55.0;    // km/h
  double k_a = 0.0005;    // L per (km/h^2) of positive acceleration per hour
  double idle_rate_lph = 1.0;
};

struct GeneratorProfile {
  std::vector<Waypoint> route;  // >= 2 connected waypoints
  EpochSeconds departure = 0;
  DriverStyle style = DriverStyle::Smooth;
  double cruise_speed = 55.0;       // km/h target
  double speed_noise = 2.0;         // km/h target jitter amplitude
  double aggressive_spread = 20.0;  // km/h swing around cruise for aggressive phases
  std::map<int, double> traffic_by_hour;         // local hour -> speed cap km/h
  std::map<int, WeatherCondition> weather_by_hour;  // local hour -> descriptor
  std::vector<IdleStop> idle_stops;
  FuelModel fuel;
  int cadence_seconds = 17;
  int cadence_jitter_seconds = 2;
  double battery_voltage = 27.6;
  double initial_fuel_level = 200.0;  // liters
  int timezone_offset_minutes = 0;

  void validate() const;  // throws InvalidProfile
  static GeneratorProfile load(const std::string& path);
  void save(const std::string& path) const;
};

/// Records at the profile cadence (jittered) following the route with
/// style-dependent speed dynamics. Deterministic in (profile, seed).
std::vector<RawRecord> generate_journey(const GeneratorProfile& profile, std::uint64_t seed);

/// Fixture entries covering every (cell, date, hour) the records touch, so an
/// ingest of the generated file never falls back.
FixtureWeatherProvider make_weather_fixture(const GeneratorProfile& profile,
                                            std::span<const RawRecord> records);

double haversine_km(double lat1, double lon1, double lat2, double lon2);

}  // namespace ecodrive
