#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ecodrive/errors.hpp"

namespace ecodrive {

/// Closed vocabulary of weather descriptors.
enum class WeatherCondition : int {
  Sunny = 0,
  Clear,
  PartlyCloudy,
  Cloudy,
  Overcast,
  PatchyRainNearby,
  LightDrizzle,
  LightRainShower,
  ModerateRain,
  ModerateOrHeavyRain,
  Mist,
  Fog,
};

inline constexpr int kWeatherConditionCount = 12;

std::string to_string(WeatherCondition c);

/// Case-insensitive; spaces, underscores and hyphens in the input are ignored,
/// so "partly cloudy", "Partly_Cloudy" and "PartlyCloudy" all parse.
std::optional<WeatherCondition> parse_weather(std::string_view text);

/// Position in the default driving-severity order: benign sky states first,
/// then rain by intensity, then visibility hazards. Bijection onto 0..11.
int severity_rank(WeatherCondition c);

/// Severity order override; the default matches severity_rank.
class SeverityMap {
 public:
  SeverityMap();

  /// `ascending` must list all 12 descriptors exactly once, least severe first.
  static SeverityMap from_order(const std::vector<std::string>& ascending);

  int rank(WeatherCondition c) const { return rank_[static_cast<int>(c)]; }

 private:
  std::array<int, kWeatherConditionCount> rank_{};
};

struct WeatherQuery {
  double latitude = 0.0;
  double longitude = 0.0;
  int year = 1970;
  int month = 1;
  int day = 1;
  int hour = 0;  // 0..23
};

/// 0.1-degree grid cell identifier, in tenths of a degree.
struct WeatherCell {
  int lat_deci = 0;
  int lon_deci = 0;

  auto operator<=>(const WeatherCell&) const = default;
};

WeatherCell weather_cell(double latitude, double longitude);

/// Formats a cell coordinate ("6.9", "-0.3") without float round-off surprises.
std::string format_deci(int deci);

class WeatherProvider {
 public:
  virtual ~WeatherProvider() = default;

  /// nullopt means unavailable. Never throws for missing data or remote
  /// failures; implementations must be callable from concurrent pipelines.
  virtual std::optional<WeatherCondition> lookup(const WeatherQuery& query) = 0;
};

/// File-backed provider. The fixture document maps "lat,lon,date,hour" keys
/// (0.1-degree cells, ISO dates) to descriptor strings.
class FixtureWeatherProvider final : public WeatherProvider {
 public:
  struct Key {
    WeatherCell cell;
    int year = 1970;
    int month = 1;
    int day = 1;
    int hour = 0;

    auto operator<=>(const Key&) const = default;
  };

  FixtureWeatherProvider() = default;

  static FixtureWeatherProvider load(const std::string& path);
  static FixtureWeatherProvider from_json_text(const std::string& text);

  void insert(double latitude, double longitude, int year, int month, int day, int hour,
              WeatherCondition condition);
  void save(const std::string& path) const;

  std::size_t size() const { return entries_.size(); }

  std::optional<WeatherCondition> lookup(const WeatherQuery& query) override;

 private:
  std::map<Key, WeatherCondition> entries_;
};

struct HttpWeatherConfig {
  std::string base_url;           // "http://host[:port]/path"
  std::string key_param = "key";  // query parameter carrying the API key
  std::string api_key;
  std::string field_path;         // dot path to the descriptor in the response JSON
  double timeout_seconds = 5.0;
};

/// Generic HTTP provider. Issues GET <path>?<key_param>=<api_key>&q=<lat>,<lon>
/// &date=<YYYY-MM-DD>&hour=<H> and extracts the descriptor at field_path.
/// Responses are cached by (cell, date, hour) and identical in-flight queries
/// are deduplicated, so a burst of lookups costs one request.
class HttpWeatherProvider final : public WeatherProvider {
 public:
  explicit HttpWeatherProvider(HttpWeatherConfig config);
  ~HttpWeatherProvider() override;

  std::optional<WeatherCondition> lookup(const WeatherQuery& query) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ecodrive
