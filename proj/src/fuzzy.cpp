#include "ecodrive/fuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace ecodrive {

double Trapezoid::degree(double x) const {
  if (x < a || x > d) return 0.0;
  if (x < b) return (x - a) / (b - a);  // a < b here, since x >= a and x < b
  if (x <= c) return 1.0;
  if (x < d) return (d - x) / (d - c);
  return 0.0;
}

std::string to_string(ControlAction action) {
  switch (action) {
    case ControlAction::Break: return "Break";
    case ControlAction::BreakSmoothly: return "BreakSmoothly";
    case ControlAction::KeepTheSpeed: return "KeepTheSpeed";
    case ControlAction::AccelerateSmoothly: return "AccelerateSmoothly";
    case ControlAction::Accelerate: return "Accelerate";
    case ControlAction::StopEngine: return "StopEngine";
  }
  return "?";
}

std::optional<ControlAction> parse_control_action(std::string_view text) {
  if (text == "Break") return ControlAction::Break;
  if (text == "BreakSmoothly") return ControlAction::BreakSmoothly;
  if (text == "KeepTheSpeed") return ControlAction::KeepTheSpeed;
  if (text == "AccelerateSmoothly") return ControlAction::AccelerateSmoothly;
  if (text == "Accelerate") return ControlAction::Accelerate;
  if (text == "StopEngine") return ControlAction::StopEngine;
  return std::nullopt;
}

int action_scale_index(ControlAction action) {
  return action == ControlAction::StopEngine ? -1 : static_cast<int>(action);
}

std::string to_string(SpeedTerm term) {
  switch (term) {
    case SpeedTerm::L: return "L";
    case SpeedTerm::O: return "O";
    case SpeedTerm::H: return "H";
  }
  return "?";
}

std::string to_string(AccelTerm term) {
  switch (term) {
    case AccelTerm::HD: return "HD";
    case AccelTerm::A: return "A";
    case AccelTerm::HA: return "HA";
  }
  return "?";
}

namespace {

std::optional<SpeedTerm> parse_speed_term(std::string_view text) {
  if (text == "L") return SpeedTerm::L;
  if (text == "O") return SpeedTerm::O;
  if (text == "H") return SpeedTerm::H;
  return std::nullopt;
}

std::optional<AccelTerm> parse_accel_term(std::string_view text) {
  if (text == "HD") return AccelTerm::HD;
  if (text == "A") return AccelTerm::A;
  if (text == "HA") return AccelTerm::HA;
  return std::nullopt;
}

}  // namespace

FuzzyConfig FuzzyConfig::defaults() {
  FuzzyConfig config;
  config.speed_lo = 0.0;
  config.speed_hi = 120.0;
  config.speed_sets = {Trapezoid{0, 0, 15, 35},      // L
                       Trapezoid{25, 50, 50, 75},    // O
                       Trapezoid{60, 80, 120, 120}}; // H
  config.accel_lo = -10000.0;
  config.accel_hi = 10000.0;
  config.accel_sets = {Trapezoid{-10000, -10000, -2000, -500},  // HD
                       Trapezoid{-1000, 0, 0, 1000},            // A
                       Trapezoid{500, 2000, 10000, 10000}};     // HA
  config.out_lo = 0.0;
  config.out_hi = 100.0;
  config.output_sets = {OutputSet{10, 20},   // Break
                        OutputSet{30, 20},   // BreakSmoothly
                        OutputSet{50, 20},   // KeepTheSpeed
                        OutputSet{70, 20},   // AccelerateSmoothly
                        OutputSet{90, 20}};  // Accelerate
  config.rules = {
      {SpeedTerm::L, AccelTerm::HD, ControlAction::Accelerate},
      {SpeedTerm::L, AccelTerm::A, ControlAction::AccelerateSmoothly},
      {SpeedTerm::L, AccelTerm::HA, ControlAction::AccelerateSmoothly},
      {SpeedTerm::O, AccelTerm::HD, ControlAction::KeepTheSpeed},
      {SpeedTerm::O, AccelTerm::A, ControlAction::KeepTheSpeed},
      {SpeedTerm::O, AccelTerm::HA, ControlAction::KeepTheSpeed},
      {SpeedTerm::H, AccelTerm::HD, ControlAction::BreakSmoothly},
      {SpeedTerm::H, AccelTerm::A, ControlAction::Break},
      {SpeedTerm::H, AccelTerm::HA, ControlAction::Break},
  };
  return config;
}

void FuzzyConfig::validate() const {
  const auto check_sets = [](const std::array<Trapezoid, 3>& sets, const char* variable) {
    for (std::size_t i = 0; i < sets.size(); ++i) {
      if (!sets[i].valid()) {
        throw ConfigError(std::string("fuzzy ") + variable + " set " + std::to_string(i) +
                          " has decreasing breakpoints");
      }
    }
  };
  check_sets(speed_sets, "speed");
  check_sets(accel_sets, "acceleration");
  if (!(speed_lo < speed_hi) || !(accel_lo < accel_hi) || !(out_lo < out_hi)) {
    throw ConfigError("fuzzy universe bounds must satisfy lo < hi");
  }
  for (std::size_t i = 0; i < output_sets.size(); ++i) {
    if (output_sets[i].half_width <= 0.0) {
      throw ConfigError("fuzzy output set " + std::to_string(i) + " needs half_width > 0");
    }
  }

  if (rules.size() != 9) {
    throw ConfigError("fuzzy rule table must have 9 rows, got " + std::to_string(rules.size()));
  }
  std::array<bool, 9> seen{};
  for (const FuzzyRule& rule : rules) {
    if (rule.action == ControlAction::StopEngine) {
      throw ConfigError("StopEngine belongs to the idling path and cannot appear in fuzzy rules");
    }
    const std::size_t slot =
        static_cast<std::size_t>(rule.speed) * 3 + static_cast<std::size_t>(rule.accel);
    if (seen[slot]) {
      throw ConfigError("duplicate fuzzy rule for (" + to_string(rule.speed) + ", " +
                        to_string(rule.accel) + ")");
    }
    seen[slot] = true;
  }

  // Every crisp input must activate at least one term in each variable.
  const auto check_coverage = [](const std::array<Trapezoid, 3>& sets, double lo, double hi,
                                 const char* variable) {
    for (int i = 0; i < kAggregateSamples; ++i) {
      const double x = lo + (hi - lo) * static_cast<double>(i) / (kAggregateSamples - 1);
      const bool covered = std::any_of(sets.begin(), sets.end(),
                                       [x](const Trapezoid& t) { return t.degree(x) > 0.0; });
      if (!covered) {
        throw ConfigError(std::string("fuzzy ") + variable + " universe has no active term at " +
                          std::to_string(x));
      }
    }
  };
  check_coverage(speed_sets, speed_lo, speed_hi, "speed");
  check_coverage(accel_sets, accel_lo, accel_hi, "acceleration");
}

std::array<double, 3> fuzzify(double value, const std::array<Trapezoid, 3>& sets, double lo,
                              double hi) {
  const double x = std::clamp(value, lo, hi);
  return {sets[0].degree(x), sets[1].degree(x), sets[2].degree(x)};
}

AggregatedSet infer(double speed, double accel, const FuzzyConfig& config) {
  const auto speed_degrees = fuzzify(speed, config.speed_sets, config.speed_lo, config.speed_hi);
  const auto accel_degrees = fuzzify(accel, config.accel_sets, config.accel_lo, config.accel_hi);

  std::array<double, 5> action_strength{};
  double max_strength = 0.0;
  for (const FuzzyRule& rule : config.rules) {
    const double strength = std::min(speed_degrees[static_cast<std::size_t>(rule.speed)],
                                     accel_degrees[static_cast<std::size_t>(rule.accel)]);
    auto& slot = action_strength[static_cast<std::size_t>(action_scale_index(rule.action))];
    slot = std::max(slot, strength);
    max_strength = std::max(max_strength, strength);
  }
  if (max_strength <= 0.0) {
    // Unreachable for a validated config; the universes are fully covered.
    throw Error("fuzzy inference fired no rule");
  }

  AggregatedSet aggregated;
  aggregated.lo = config.out_lo;
  aggregated.hi = config.out_hi;
  aggregated.mu.resize(kAggregateSamples);
  for (int i = 0; i < kAggregateSamples; ++i) {
    const double x = aggregated.lo + (aggregated.hi - aggregated.lo) * static_cast<double>(i) /
                                         (kAggregateSamples - 1);
    double mu = 0.0;
    for (std::size_t a = 0; a < 5; ++a) {
      if (action_strength[a] <= 0.0) continue;
      mu = std::max(mu, std::min(action_strength[a], config.output_sets[a].shape().degree(x)));
    }
    aggregated.mu[static_cast<std::size_t>(i)] = mu;
  }
  return aggregated;
}

double defuzzify(const AggregatedSet& aggregated) {
  double weighted = 0.0, total = 0.0;
  for (std::size_t i = 0; i < aggregated.mu.size(); ++i) {
    weighted += aggregated.x_at(i) * aggregated.mu[i];
    total += aggregated.mu[i];
  }
  if (total <= 0.0) throw ZeroArea("cannot defuzzify an empty aggregated set");
  return weighted / total;
}

ControlAction to_action(double crisp, const FuzzyConfig& config) {
  int best = 0;
  double best_degree = -1.0;
  for (int a = 0; a < 5; ++a) {
    const double degree = config.output_sets[static_cast<std::size_t>(a)].shape().degree(crisp);
    const double center = config.output_sets[static_cast<std::size_t>(a)].center;
    const double best_center = config.output_sets[static_cast<std::size_t>(best)].center;
    if (degree > best_degree || (degree == best_degree && center < best_center)) {
      best = a;
      best_degree = degree;
    }
  }
  return static_cast<ControlAction>(best);
}

ControlAction infer_action(double speed, double accel, const FuzzyConfig& config) {
  return to_action(defuzzify(infer(speed, accel, config)), config);
}

// ---------------------------------------------------------------------------
// Config file I/O

namespace {

nlohmann::ordered_json trapezoid_to_json(const Trapezoid& t) {
  return nlohmann::ordered_json::array({t.a, t.b, t.c, t.d});
}

Trapezoid trapezoid_from_json(const nlohmann::json& j, const std::string& what) {
  const auto points = j.get<std::vector<double>>();
  if (points.size() != 4) {
    throw ConfigError("fuzzy set '" + what + "' must have 4 breakpoints [a,b,c,d]");
  }
  const Trapezoid t{points[0], points[1], points[2], points[3]};
  if (!t.valid()) {
    throw ConfigError("fuzzy set '" + what + "' has decreasing breakpoints");
  }
  return t;
}

}  // namespace

FuzzyConfig FuzzyConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open fuzzy config: " + path);
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ConfigError("fuzzy config is not a JSON object: " + path);
  }
  FuzzyConfig config = FuzzyConfig::defaults();
  try {
    const auto& speed = doc.at("speed");
    config.speed_lo = speed.at("universe").at(0).get<double>();
    config.speed_hi = speed.at("universe").at(1).get<double>();
    config.speed_sets = {trapezoid_from_json(speed.at("terms").at("L"), "speed.L"),
                         trapezoid_from_json(speed.at("terms").at("O"), "speed.O"),
                         trapezoid_from_json(speed.at("terms").at("H"), "speed.H")};
    const auto& accel = doc.at("acceleration");
    config.accel_lo = accel.at("universe").at(0).get<double>();
    config.accel_hi = accel.at("universe").at(1).get<double>();
    config.accel_sets = {trapezoid_from_json(accel.at("terms").at("HD"), "acceleration.HD"),
                         trapezoid_from_json(accel.at("terms").at("A"), "acceleration.A"),
                         trapezoid_from_json(accel.at("terms").at("HA"), "acceleration.HA")};
    const auto& output = doc.at("output");
    config.out_lo = output.at("universe").at(0).get<double>();
    config.out_hi = output.at("universe").at(1).get<double>();
    for (int a = 0; a < 5; ++a) {
      const auto& set = output.at("sets").at(to_string(static_cast<ControlAction>(a)));
      config.output_sets[static_cast<std::size_t>(a)] =
          OutputSet{set.at("center").get<double>(), set.at("half_width").get<double>()};
    }
    config.rules.clear();
    for (const auto& rule_json : doc.at("rules")) {
      const auto speed_term = parse_speed_term(rule_json.at("speed").get<std::string>());
      const auto accel_term = parse_accel_term(rule_json.at("accel").get<std::string>());
      const auto action = parse_control_action(rule_json.at("action").get<std::string>());
      if (!speed_term || !accel_term || !action) {
        throw ConfigError("fuzzy rule has unknown term or action: " + rule_json.dump());
      }
      config.rules.push_back(FuzzyRule{*speed_term, *accel_term, *action});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("fuzzy config " + path + ": " + e.what());
  }
  config.validate();
  return config;
}

void FuzzyConfig::save(const std::string& path) const {
  nlohmann::ordered_json doc;
  doc["speed"] = {{"universe", {speed_lo, speed_hi}},
                  {"terms",
                   {{"L", trapezoid_to_json(speed_sets[0])},
                    {"O", trapezoid_to_json(speed_sets[1])},
                    {"H", trapezoid_to_json(speed_sets[2])}}}};
  doc["acceleration"] = {{"universe", {accel_lo, accel_hi}},
                         {"terms",
                          {{"HD", trapezoid_to_json(accel_sets[0])},
                           {"A", trapezoid_to_json(accel_sets[1])},
                           {"HA", trapezoid_to_json(accel_sets[2])}}}};
  nlohmann::ordered_json sets;
  for (int a = 0; a < 5; ++a) {
    sets[to_string(static_cast<ControlAction>(a))] = {
        {"center", output_sets[static_cast<std::size_t>(a)].center},
        {"half_width", output_sets[static_cast<std::size_t>(a)].half_width}};
  }
  doc["output"] = {{"universe", {out_lo, out_hi}}, {"sets", sets}};
  doc["rules"] = nlohmann::ordered_json::array();
  for (const FuzzyRule& rule : rules) {
    doc["rules"].push_back({{"speed", to_string(rule.speed)},
                            {"accel", to_string(rule.accel)},
                            {"action", to_string(rule.action)}});
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write fuzzy config: " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace ecodrive
