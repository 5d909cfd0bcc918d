#include "ecodrive/weather.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <future>
#include <mutex>
#include <sstream>

#include "ecodrive/time_util.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ecodrive {

namespace {

constexpr std::array<const char*, kWeatherConditionCount> kConditionNames = {
    "Sunny",        "Clear",         "PartlyCloudy",        "Cloudy",
    "Overcast",     "PatchyRainNearby", "LightDrizzle",     "LightRainShower",
    "ModerateRain", "ModerateOrHeavyRain", "Mist",          "Fog",
};

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char ch : text) {
    if (ch == ' ' || ch == '_' || ch == '-') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

}  // namespace

std::string to_string(WeatherCondition c) { return kConditionNames[static_cast<int>(c)]; }

std::optional<WeatherCondition> parse_weather(std::string_view text) {
  const std::string needle = normalize(text);
  for (int i = 0; i < kWeatherConditionCount; ++i) {
    if (needle == normalize(kConditionNames[i])) {
      return static_cast<WeatherCondition>(i);
    }
  }
  return std::nullopt;
}

int severity_rank(WeatherCondition c) { return static_cast<int>(c); }

SeverityMap::SeverityMap() {
  for (int i = 0; i < kWeatherConditionCount; ++i) rank_[i] = i;
}

SeverityMap SeverityMap::from_order(const std::vector<std::string>& ascending) {
  if (ascending.size() != kWeatherConditionCount) {
    throw ConfigError("weather severity order must list all " +
                      std::to_string(kWeatherConditionCount) + " descriptors, got " +
                      std::to_string(ascending.size()));
  }
  SeverityMap map;
  std::array<bool, kWeatherConditionCount> seen{};
  for (int pos = 0; pos < kWeatherConditionCount; ++pos) {
    const auto cond = parse_weather(ascending[pos]);
    if (!cond) {
      throw ConfigError("unknown weather descriptor in severity order: '" + ascending[pos] +
                        "'");
    }
    const int idx = static_cast<int>(*cond);
    if (seen[idx]) {
      throw ConfigError("duplicate weather descriptor in severity order: '" + ascending[pos] +
                        "'");
    }
    seen[idx] = true;
    map.rank_[idx] = pos;
  }
  return map;
}

WeatherCell weather_cell(double latitude, double longitude) {
  return WeatherCell{static_cast<int>(std::llround(latitude * 10.0)),
                     static_cast<int>(std::llround(longitude * 10.0))};
}

std::string format_deci(int deci) {
  const int a = std::abs(deci);
  std::string out = deci < 0 ? "-" : "";
  out += std::to_string(a / 10);
  out += '.';
  out += std::to_string(a % 10);
  return out;
}

// ---------------------------------------------------------------------------
// Fixture provider

FixtureWeatherProvider FixtureWeatherProvider::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open weather fixture file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

FixtureWeatherProvider FixtureWeatherProvider::from_json_text(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ConfigError("weather fixture is not a JSON object");
  }
  FixtureWeatherProvider provider;
  for (const auto& [key, value] : doc.items()) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= key.size()) {
      const std::size_t comma = key.find(',', start);
      if (comma == std::string::npos) {
        parts.push_back(key.substr(start));
        break;
      }
      parts.push_back(key.substr(start, comma - start));
      start = comma + 1;
    }
    if (parts.size() != 4) {
      throw ConfigError("weather fixture key must be 'lat,lon,date,hour': '" + key + "'");
    }
    char* end = nullptr;
    const double lat = std::strtod(parts[0].c_str(), &end);
    if (end == parts[0].c_str()) throw ConfigError("bad latitude in fixture key: '" + key + "'");
    const double lon = std::strtod(parts[1].c_str(), &end);
    if (end == parts[1].c_str()) throw ConfigError("bad longitude in fixture key: '" + key + "'");
    int y = 0, m = 0, d = 0, hour = 0;
    if (std::sscanf(parts[2].c_str(), "%d-%d-%d", &y, &m, &d) != 3) {
      throw ConfigError("bad date in fixture key: '" + key + "'");
    }
    if (std::sscanf(parts[3].c_str(), "%d", &hour) != 1 || hour < 0 || hour > 23) {
      throw ConfigError("bad hour in fixture key: '" + key + "'");
    }
    if (!value.is_string()) {
      throw ConfigError("weather fixture value must be a string for key '" + key + "'");
    }
    const auto cond = parse_weather(value.get<std::string>());
    if (!cond) {
      throw ConfigError("unknown weather descriptor '" + value.get<std::string>() +
                        "' for fixture key '" + key + "'");
    }
    provider.insert(lat, lon, y, m, d, hour, *cond);
  }
  return provider;
}

void FixtureWeatherProvider::insert(double latitude, double longitude, int year, int month,
                                    int day, int hour, WeatherCondition condition) {
  entries_[Key{weather_cell(latitude, longitude), year, month, day, hour}] = condition;
}

void FixtureWeatherProvider::save(const std::string& path) const {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& [key, cond] : entries_) {
    std::string k = format_deci(key.cell.lat_deci) + "," + format_deci(key.cell.lon_deci) + "," +
                    format_iso_date(key.year, key.month, key.day) + "," +
                    std::to_string(key.hour);
    doc[k] = to_string(cond);
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write weather fixture file: " + path);
  out << doc.dump(2) << '\n';
}

std::optional<WeatherCondition> FixtureWeatherProvider::lookup(const WeatherQuery& query) {
  const Key key{weather_cell(query.latitude, query.longitude), query.year, query.month,
                query.day, query.hour};
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// HTTP provider

namespace {

struct ParsedUrl {
  std::string host_port;  // httplib accepts "host:port"
  std::string path;
};

ParsedUrl parse_http_url(const std::string& url) {
  const std::string prefix = "http://";
  if (url.rfind(prefix, 0) != 0) {
    throw ConfigError("weather base_url must start with http:// (got '" + url + "')");
  }
  const std::string rest = url.substr(prefix.size());
  const std::size_t slash = rest.find('/');
  ParsedUrl out;
  out.host_port = slash == std::string::npos ? rest : rest.substr(0, slash);
  out.path = slash == std::string::npos ? "/" : rest.substr(slash);
  if (out.host_port.empty()) throw ConfigError("weather base_url has no host: '" + url + "'");
  return out;
}

// Walks a dot path through a JSON document; all-digit tokens index arrays.
const nlohmann::json* walk_field_path(const nlohmann::json& doc, const std::string& path) {
  const nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot = path.find('.', start);
    const std::string token =
        dot == std::string::npos ? path.substr(start) : path.substr(start, dot - start);
    if (token.empty()) return nullptr;
    const bool numeric = std::all_of(token.begin(), token.end(),
                                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    if (numeric && node->is_array()) {
      const std::size_t idx = std::stoul(token);
      if (idx >= node->size()) return nullptr;
      node = &(*node)[idx];
    } else if (node->is_object()) {
      const auto it = node->find(token);
      if (it == node->end()) return nullptr;
      node = &*it;
    } else {
      return nullptr;
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return node;
}

}  // namespace

struct HttpWeatherProvider::Impl {
  HttpWeatherConfig config;
  ParsedUrl url;

  std::mutex mutex;
  std::map<FixtureWeatherProvider::Key, std::optional<WeatherCondition>> cache;
  std::map<FixtureWeatherProvider::Key, std::shared_future<std::optional<WeatherCondition>>>
      inflight;

  std::optional<WeatherCondition> fetch(const FixtureWeatherProvider::Key& key) {
    httplib::Client client(url.host_port);
    const auto timeout_s = static_cast<time_t>(config.timeout_seconds);
    const auto timeout_us =
        static_cast<time_t>((config.timeout_seconds - static_cast<double>(timeout_s)) * 1e6);
    client.set_connection_timeout(timeout_s, timeout_us);
    client.set_read_timeout(timeout_s, timeout_us);

    httplib::Params params;
    if (!config.key_param.empty()) params.emplace(config.key_param, config.api_key);
    params.emplace("q", format_deci(key.cell.lat_deci) + "," + format_deci(key.cell.lon_deci));
    params.emplace("date", format_iso_date(key.year, key.month, key.day));
    params.emplace("hour", std::to_string(key.hour));

    auto res = client.Get(url.path, params, httplib::Headers{});
    if (!res || res->status != 200) return std::nullopt;
    const nlohmann::json doc = nlohmann::json::parse(res->body, nullptr, false);
    if (doc.is_discarded()) return std::nullopt;
    const nlohmann::json* node = walk_field_path(doc, config.field_path);
    if (node == nullptr || !node->is_string()) return std::nullopt;
    return parse_weather(node->get<std::string>());
  }
};

HttpWeatherProvider::HttpWeatherProvider(HttpWeatherConfig config)
    : impl_(std::make_unique<Impl>()) {
  if (config.field_path.empty()) {
    throw ConfigError("weather HTTP provider requires a response field_path");
  }
  impl_->url = parse_http_url(config.base_url);
  impl_->config = std::move(config);
}

HttpWeatherProvider::~HttpWeatherProvider() = default;

std::optional<WeatherCondition> HttpWeatherProvider::lookup(const WeatherQuery& query) {
  const FixtureWeatherProvider::Key key{weather_cell(query.latitude, query.longitude),
                                        query.year, query.month, query.day, query.hour};
  std::unique_lock lock(impl_->mutex);
  if (const auto it = impl_->cache.find(key); it != impl_->cache.end()) {
    return it->second;
  }
  if (const auto it = impl_->inflight.find(key); it != impl_->inflight.end()) {
    auto future = it->second;
    lock.unlock();
    return future.get();
  }
  std::promise<std::optional<WeatherCondition>> promise;
  impl_->inflight.emplace(key, promise.get_future().share());
  lock.unlock();

  // Remote trouble of any kind is "unavailable"; it must neither abort the
  // pipeline nor strand threads waiting on the in-flight future.
  std::optional<WeatherCondition> result;
  try {
    result = impl_->fetch(key);
  } catch (...) {
    result = std::nullopt;
  }

  lock.lock();
  impl_->cache[key] = result;  // failures cached too: one probe per cell per run
  impl_->inflight.erase(key);
  lock.unlock();
  promise.set_value(result);
  return result;
}

}  // namespace ecodrive
