#pragma once

// Shared builders for unit and acceptance tests.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ecodrive/clustering.hpp"
#include "ecodrive/rng.hpp"
#include "ecodrive/telemetry.hpp"

namespace testutil {

using namespace ecodrive;

inline constexpr EpochSeconds kBaseTime = 1431522000;  // 2015-05-13T13:00:00Z

inline DrivingEvent make_event(double speed, double accel, bool idling, double elevation_change,
                               int hour, WeatherCondition weather, double distance = 1.0,
                               double fuel = 0.05, const std::string& journey = "J0001") {
  DrivingEvent ev;
  ev.journey_id = journey;
  ev.minute_start = kBaseTime;
  ev.avg_speed = idling ? 0.0 : speed;
  ev.avg_acceleration = idling ? 0.0 : accel;
  ev.elevation_change = elevation_change;
  ev.distance = idling ? 0.0 : distance;
  ev.fuel_consumed = fuel;
  ev.is_idling = idling;
  ev.hour = hour;
  ev.weather = weather;
  if (ev.fuel_consumed > 0.0) ev.fuel_mileage = ev.distance / ev.fuel_consumed;
  ev.anchor_latitude = 6.90;
  ev.anchor_longitude = 79.90;
  return ev;
}

inline RawRecord make_record(EpochSeconds t, double speed, bool ignition = true,
                             double distance = 0.1, double fuel = 0.01, double elevation = 10.0) {
  RawRecord rec;
  rec.timestamp = t;
  rec.longitude = 79.90;
  rec.latitude = 6.90;
  rec.bearing = 45.0;
  rec.elevation = elevation;
  rec.distance = distance;
  rec.speed = speed;
  rec.acceleration = 0.0;
  rec.ignition = ignition;
  rec.battery_voltage = 27.5;
  rec.fuel_level = 100.0;
  rec.fuel_consumed = fuel;
  return rec;
}

inline FeatureVector random_vector(Rng& rng) {
  return FeatureVector{rng.range(-10, 10), rng.range(-10, 10), rng.range(-10, 10),
                       rng.range(-10, 10), rng.range(-10, 10), rng.range(-10, 10)};
}

inline std::vector<FeatureVector> random_vectors(Rng& rng, std::size_t n) {
  std::vector<FeatureVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_vector(rng));
  return out;
}

/// The label is decided purely by speed with a margin around the boundary, so
/// the generating rule doubles as the oracle for classifier checks.
inline Label separable_rule(const DrivingEvent& ev) {
  return ev.avg_speed < 10.0 ? Label::Inefficient : Label::Efficient;
}

inline std::vector<DrivingEvent> separable_events(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DrivingEvent> events;
  events.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool slow = i % 2 == 0;
    const double speed = slow ? rng.range(0.5, 8.0) : rng.range(12.0, 40.0);
    DrivingEvent ev = make_event(speed, rng.range(-2000.0, 2000.0), false,
                                 rng.range(-10.0, 10.0), rng.range_int(0, 23),
                                 static_cast<WeatherCondition>(rng.range_int(0, 11)));
    ev.label = separable_rule(ev);
    events.push_back(ev);
  }
  return events;
}

struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() / ("ecodrive_" + name);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }

  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Runs a command via the shell; returns the process exit code.
inline int run_command(const std::string& command) {
  const int status = std::system(command.c_str());
  if (status == -1) return -1;
  return WEXITSTATUS(status);
}

}  // namespace testutil
