#include "ecodrive/engine.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace ecodrive {

std::string to_string(FeedbackReason reason) {
  switch (reason) {
    case FeedbackReason::Idling: return "Idling";
    case FeedbackReason::DrivingPattern: return "DrivingPattern";
    default: return "None";
  }
}

std::optional<FeedbackReason> parse_feedback_reason(std::string_view text) {
  if (text == "None") return FeedbackReason::None;
  if (text == "Idling") return FeedbackReason::Idling;
  if (text == "DrivingPattern") return FeedbackReason::DrivingPattern;
  return std::nullopt;
}

std::string format_feedback(const FeedbackDecision& decision) {
  if (!decision.action) return "";
  switch (*decision.action) {
    case ControlAction::StopEngine:
      return "Excessive idling detected: please stop the engine.";
    case ControlAction::Break:
      return "Speed is high: please brake.";
    case ControlAction::BreakSmoothly:
      return "Please brake smoothly.";
    case ControlAction::KeepTheSpeed:
      return "Please keep the current speed.";
    case ControlAction::AccelerateSmoothly:
      return "Please accelerate smoothly.";
    case ControlAction::Accelerate:
      return "Speed is low: please accelerate.";
  }
  return "";
}

FeedbackDecision evaluate_event(const DrivingEvent& event, const ForestModel& model,
                                const FuzzyConfig& fuzzy_config, const SeverityMap& severity) {
  FeedbackDecision decision;
  decision.journey_id = event.journey_id;
  decision.minute_start = event.minute_start;

  const Vote vote = predict(model, event, severity);
  decision.verdict = vote.label;
  decision.vote_fraction = vote.vote_fraction;

  if (decision.verdict == Label::Inefficient) {
    if (event.is_idling) {
      decision.action = ControlAction::StopEngine;
      decision.reason = FeedbackReason::Idling;
    } else {
      decision.action = infer_action(event.avg_speed, event.avg_acceleration, fuzzy_config);
      decision.reason = FeedbackReason::DrivingPattern;
    }
  }
  decision.message = format_feedback(decision);
  return decision;
}

std::vector<FeedbackDecision> run_stream(std::span<const DrivingEvent> events,
                                         const ForestModel& model,
                                         const FuzzyConfig& fuzzy_config, const DecisionSink& sink,
                                         const SeverityMap& severity) {
  std::vector<FeedbackDecision> decisions;
  decisions.reserve(events.size());
  for (const DrivingEvent& event : events) {
    decisions.push_back(evaluate_event(event, model, fuzzy_config, severity));
    if (sink) sink(decisions.back());
  }
  return decisions;
}

namespace {

nlohmann::ordered_json decision_to_json(const FeedbackDecision& d) {
  nlohmann::ordered_json j;
  j["journey_id"] = d.journey_id;
  j["minute_start"] = format_iso8601(d.minute_start);
  j["verdict"] = to_string(d.verdict);
  j["vote_fraction"] = d.vote_fraction;
  if (d.action) {
    j["action"] = to_string(*d.action);
  } else {
    j["action"] = nullptr;
  }
  j["reason"] = to_string(d.reason);
  j["message"] = d.message;
  return j;
}

FeedbackDecision decision_from_json(const nlohmann::json& j, long line_no) {
  const auto fail = [line_no](const std::string& what) -> DataError {
    return DataError("decisions line " + std::to_string(line_no) + ": " + what);
  };
  try {
    FeedbackDecision d;
    d.journey_id = j.at("journey_id").get<std::string>();
    const auto ts = parse_iso8601(j.at("minute_start").get<std::string>());
    if (!ts) throw fail("bad minute_start");
    d.minute_start = *ts;
    const auto verdict = parse_label(j.at("verdict").get<std::string>());
    if (!verdict || *verdict == Label::Unlabeled) throw fail("bad verdict");
    d.verdict = *verdict;
    d.vote_fraction = j.at("vote_fraction").get<double>();
    if (!j.at("action").is_null()) {
      const auto action = parse_control_action(j.at("action").get<std::string>());
      if (!action) throw fail("unknown action");
      d.action = *action;
    }
    const auto reason = parse_feedback_reason(j.at("reason").get<std::string>());
    if (!reason) throw fail("unknown reason");
    d.reason = *reason;
    d.message = j.at("message").get<std::string>();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
}

}  // namespace

void write_decisions_jsonl(std::ostream& out, std::span<const FeedbackDecision> decisions) {
  for (const FeedbackDecision& d : decisions) {
    out << decision_to_json(d).dump() << '\n';
  }
}

void write_decisions_jsonl_file(const std::string& path,
                                std::span<const FeedbackDecision> decisions) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write decisions file: " + path);
  write_decisions_jsonl(out, decisions);
}

std::vector<FeedbackDecision> read_decisions_jsonl(std::istream& in) {
  std::vector<FeedbackDecision> decisions;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw DataError("decisions line " + std::to_string(line_no) + ": invalid JSON");
    }
    decisions.push_back(decision_from_json(j, line_no));
  }
  return decisions;
}

std::vector<FeedbackDecision> read_decisions_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open decisions file: " + path);
  return read_decisions_jsonl(in);
}

}  // namespace ecodrive
