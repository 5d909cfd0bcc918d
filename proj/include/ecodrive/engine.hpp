#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecodrive/forest.hpp"
#include "ecodrive/fuzzy.hpp"
#include "ecodrive/telemetry.hpp"

namespace ecodrive {

enum class FeedbackReason { None = 0, Idling, DrivingPattern };

std::string to_string(FeedbackReason reason);
std::optional<FeedbackReason> parse_feedback_reason(std::string_view text);

/// Per-minute verdict. An action is present exactly when the verdict is
/// Inefficient, and StopEngine appears exactly when the reason is Idling.
struct FeedbackDecision {
  std::string journey_id;
  EpochSeconds minute_start = 0;
  Label verdict = Label::Efficient;
  double vote_fraction = 0.0;
  std::optional<ControlAction> action;
  FeedbackReason reason = FeedbackReason::None;
  std::string message;
};

/// Classify the event; if Inefficient, the idling path short-circuits to
/// StopEngine and everything else goes through fuzzy inference on
/// (avg_speed, avg_acceleration).
FeedbackDecision evaluate_event(const DrivingEvent& event, const ForestModel& model,
                                const FuzzyConfig& fuzzy_config,
                                const SeverityMap& severity = SeverityMap{});

/// Fixed advisory template per action; empty for Efficient decisions.
std::string format_feedback(const FeedbackDecision& decision);

using DecisionSink = std::function<void(const FeedbackDecision&)>;

/// One decision per event, in order; `sink` (optional) sees each decision as
/// it is produced.
std::vector<FeedbackDecision> run_stream(std::span<const DrivingEvent> events,
                                         const ForestModel& model,
                                         const FuzzyConfig& fuzzy_config,
                                         const DecisionSink& sink = nullptr,
                                         const SeverityMap& severity = SeverityMap{});

void write_decisions_jsonl(std::ostream& out, std::span<const FeedbackDecision> decisions);
void write_decisions_jsonl_file(const std::string& path,
                                std::span<const FeedbackDecision> decisions);
std::vector<FeedbackDecision> read_decisions_jsonl(std::istream& in);
std::vector<FeedbackDecision> read_decisions_jsonl_file(const std::string& path);

}  // namespace ecodrive
