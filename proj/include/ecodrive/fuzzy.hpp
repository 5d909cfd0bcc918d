#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ecodrive/errors.hpp"

namespace ecodrive {

/// Trapezoidal membership function: 0 at <=a and >=d, 1 on [b,c], linear
/// between. Triangles set b == c; shoulders set a == b or c == d.
struct Trapezoid {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;

  double degree(double x) const;
  bool valid() const { return a <= b && b <= c && c <= d; }
};

/// Advisory vocabulary. "Break" follows the rule table's spelling.
enum class ControlAction : int {
  Break = 0,
  BreakSmoothly,
  KeepTheSpeed,
  AccelerateSmoothly,
  Accelerate,
  StopEngine,
};

std::string to_string(ControlAction action);
std::optional<ControlAction> parse_control_action(std::string_view text);

/// Position on the braking-to-accelerating scale (Break=0 .. Accelerate=4).
/// StopEngine is not on the scale and returns -1.
int action_scale_index(ControlAction action);

enum class SpeedTerm : int { L = 0, O, H };
enum class AccelTerm : int { HD = 0, A, HA };

std::string to_string(SpeedTerm term);
std::string to_string(AccelTerm term);

struct FuzzyRule {
  SpeedTerm speed = SpeedTerm::L;
  AccelTerm accel = AccelTerm::HD;
  ControlAction action = ControlAction::KeepTheSpeed;
};

/// Symmetric triangular output set on the advice axis.
struct OutputSet {
  double center = 50.0;
  double half_width = 20.0;

  Trapezoid shape() const {
    return Trapezoid{center - half_width, center, center, center + half_width};
  }
};

struct FuzzyConfig {
  double speed_lo = 0.0, speed_hi = 120.0;
  std::array<Trapezoid, 3> speed_sets{};  // indexed by SpeedTerm
  double accel_lo = -10000.0, accel_hi = 10000.0;
  std::array<Trapezoid, 3> accel_sets{};  // indexed by AccelTerm
  double out_lo = 0.0, out_hi = 100.0;
  std::array<OutputSet, 5> output_sets{};  // indexed by action_scale_index
  std::vector<FuzzyRule> rules;            // all 9 (speed, accel) pairs exactly once

  static FuzzyConfig defaults();
  static FuzzyConfig load(const std::string& path);
  void save(const std::string& path) const;

  /// Throws ConfigError with an actionable message: bad breakpoints, missing
  /// or duplicate rule pairs, StopEngine in the table, or an input-universe
  /// region with no active term.
  void validate() const;
};

/// Degrees of the three terms at `value`, after clamping to [lo, hi].
std::array<double, 3> fuzzify(double value, const std::array<Trapezoid, 3>& sets, double lo,
                              double hi);

inline constexpr int kAggregateSamples = 1001;

/// Mamdani output: per-rule firing strength min(speed degree, accel degree),
/// output sets clipped at their strength, aggregated by pointwise max over
/// uniform samples of the advice axis.
struct AggregatedSet {
  double lo = 0.0;
  double hi = 100.0;
  std::vector<double> mu;  // kAggregateSamples values

  double x_at(std::size_t i) const {
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(mu.size() - 1);
  }
};

AggregatedSet infer(double speed, double accel, const FuzzyConfig& config);

/// Centroid of the sampled set; throws ZeroArea if nothing fired.
double defuzzify(const AggregatedSet& aggregated);

/// Action whose output set has the highest degree at `crisp`; ties pick the
/// lower-center (more cautious) action.
ControlAction to_action(double crisp, const FuzzyConfig& config);

/// infer -> defuzzify -> to_action.
ControlAction infer_action(double speed, double accel, const FuzzyConfig& config);

}  // namespace ecodrive
