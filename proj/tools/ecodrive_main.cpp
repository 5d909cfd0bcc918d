// ecodrive CLI: file-based pipeline stages over the analytics library.
//
// Subcommands: generate, ingest, cluster, train, evaluate, replay, simulate.
// Every stage reads and writes files under --out so runs are resumable and
// independently inspectable; all randomness flows from one --seed.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ecodrive/clustering.hpp"
#include "ecodrive/engine.hpp"
#include "ecodrive/forest.hpp"
#include "ecodrive/fuzzy.hpp"
#include "ecodrive/metrics.hpp"
#include "ecodrive/simulator.hpp"
#include "ecodrive/telemetry.hpp"
#include "ecodrive/weather.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace ecodrive;

namespace {

struct PipelineConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  int timezone_offset_minutes = 0;

  std::string telemetry_input;
  std::string weather_fixture;
  HttpWeatherConfig weather_http;
  bool has_weather_http = false;

  std::string label_rules;    // empty -> built-in defaults
  std::string overrides;      // optional manual label overrides
  std::string fuzzy_config;   // empty -> built-in defaults
  std::string model_file;     // empty -> <out>/model.json
  std::string generator_profile;

  double gap_threshold_minutes = 120.0;
  double ignition_gap_minutes = 30.0;
  double tank_capacity = 218.0;
  std::string delimiter = ",";

  int cluster_k = 7;
  std::optional<double> cut_height;
  int min_events = 10;

  ForestParams forest;  // ntree=500, mtry=3 defaults
  int cv_folds = 10;
};

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ConfigError("config file is not a JSON object: " + path);
  }
  PipelineConfig config;
  try {
    config.seed = doc.value("seed", config.seed);
    config.out_dir = doc.value("out_dir", config.out_dir);
    config.timezone_offset_minutes =
        doc.value("timezone_offset_minutes", config.timezone_offset_minutes);
    config.telemetry_input = doc.value("telemetry_input", config.telemetry_input);
    config.weather_fixture = doc.value("weather_fixture", config.weather_fixture);
    if (doc.contains("weather_http")) {
      const auto& http = doc.at("weather_http");
      config.weather_http.base_url = http.at("base_url").get<std::string>();
      config.weather_http.key_param = http.value("key_param", config.weather_http.key_param);
      config.weather_http.api_key = http.value("api_key", config.weather_http.api_key);
      config.weather_http.field_path = http.at("field_path").get<std::string>();
      config.weather_http.timeout_seconds =
          http.value("timeout_seconds", config.weather_http.timeout_seconds);
      config.has_weather_http = true;
    }
    config.label_rules = doc.value("label_rules", config.label_rules);
    config.overrides = doc.value("overrides", config.overrides);
    config.fuzzy_config = doc.value("fuzzy_config", config.fuzzy_config);
    config.model_file = doc.value("model_file", config.model_file);
    config.generator_profile = doc.value("generator_profile", config.generator_profile);
    config.gap_threshold_minutes =
        doc.value("gap_threshold_minutes", config.gap_threshold_minutes);
    config.ignition_gap_minutes = doc.value("ignition_gap_minutes", config.ignition_gap_minutes);
    config.tank_capacity = doc.value("tank_capacity", config.tank_capacity);
    config.delimiter = doc.value("delimiter", config.delimiter);
    if (doc.contains("clustering")) {
      const auto& clustering = doc.at("clustering");
      config.cluster_k = clustering.value("k", config.cluster_k);
      if (clustering.contains("cut_height") && !clustering.at("cut_height").is_null()) {
        config.cut_height = clustering.at("cut_height").get<double>();
      }
      config.min_events = clustering.value("min_events", config.min_events);
    }
    if (doc.contains("forest")) {
      const auto& forest = doc.at("forest");
      config.forest.ntree = forest.value("ntree", config.forest.ntree);
      config.forest.mtry = forest.value("mtry", config.forest.mtry);
      config.forest.min_leaf = forest.value("min_leaf", config.forest.min_leaf);
      config.forest.max_depth = forest.value("max_depth", config.forest.max_depth);
    }
    config.cv_folds = doc.value("cv_folds", config.cv_folds);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  if (config.delimiter.size() != 1) {
    throw ConfigError("delimiter must be a single character");
  }
  return config;
}

std::string out_path(const PipelineConfig& config, const std::string& name) {
  return (fs::path(config.out_dir) / name).string();
}

std::string model_path(const PipelineConfig& config) {
  return config.model_file.empty() ? out_path(config, "model.json") : config.model_file;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is not configured");
  if (!fs::exists(path)) throw ConfigError(what + " does not exist: " + path);
}

void ensure_out_dir(const PipelineConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory: " + config.out_dir);
}

LabelRuleConfig load_rules_or_defaults(const PipelineConfig& config) {
  if (config.label_rules.empty()) return LabelRuleConfig::defaults();
  require_file(config.label_rules, "label rule config");
  return LabelRuleConfig::load(config.label_rules);
}

FuzzyConfig load_fuzzy_or_defaults(const PipelineConfig& config) {
  if (config.fuzzy_config.empty()) {
    FuzzyConfig fuzzy = FuzzyConfig::defaults();
    fuzzy.validate();
    return fuzzy;
  }
  require_file(config.fuzzy_config, "fuzzy config");
  return FuzzyConfig::load(config.fuzzy_config);
}

std::unique_ptr<WeatherProvider> make_weather_provider(const PipelineConfig& config) {
  if (!config.weather_fixture.empty()) {
    require_file(config.weather_fixture, "weather fixture");
    return std::make_unique<FixtureWeatherProvider>(
        FixtureWeatherProvider::load(config.weather_fixture));
  }
  if (config.has_weather_http) {
    return std::make_unique<HttpWeatherProvider>(config.weather_http);
  }
  return nullptr;  // every event gets the fallback descriptor
}

/// Consecutive runs of the same journey_id, in file order.
std::vector<std::vector<DrivingEvent>> group_by_journey(std::vector<DrivingEvent> events) {
  std::vector<std::vector<DrivingEvent>> groups;
  for (DrivingEvent& ev : events) {
    if (groups.empty() || groups.back().back().journey_id != ev.journey_id) {
      groups.emplace_back();
    }
    groups.back().push_back(std::move(ev));
  }
  return groups;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_generate(const PipelineConfig& config, bool verbose) {
  require_file(config.generator_profile, "generator profile");
  ensure_out_dir(config);
  const GeneratorProfile profile = GeneratorProfile::load(config.generator_profile);
  const std::vector<RawRecord> records = generate_journey(profile, config.seed);

  const std::string telemetry = out_path(config, "telemetry.csv");
  write_telemetry_csv_file(telemetry, records);
  const std::string fixture = out_path(config, "weather_fixture.json");
  make_weather_fixture(profile, records).save(fixture);

  double total_distance = 0.0, total_fuel = 0.0;
  for (const RawRecord& r : records) {
    total_distance += r.distance;
    total_fuel += r.fuel_consumed;
  }
  const double minutes = records.empty()
                             ? 0.0
                             : static_cast<double>(records.back().timestamp - profile.departure) /
                                   60.0;
  std::printf("generated %zu records over %.1f min (%.2f km, %.3f L) -> %s\n", records.size(),
              minutes, total_distance, total_fuel, telemetry.c_str());
  std::printf("weather fixture -> %s\n", fixture.c_str());
  if (verbose) {
    std::printf("profile: style=%s cruise=%.1f km/h route=%.2f km seed=%llu\n",
                to_string(profile.style).c_str(), profile.cruise_speed, total_distance,
                static_cast<unsigned long long>(config.seed));
  }
  return 0;
}

int cmd_ingest(const PipelineConfig& config, bool verbose) {
  require_file(config.telemetry_input, "telemetry input");
  ensure_out_dir(config);

  ParseOptions parse_options;
  parse_options.delimiter = config.delimiter[0];
  parse_options.tank_capacity = config.tank_capacity;
  ParseResult parsed = parse_telemetry_file(config.telemetry_input, parse_options);
  if (verbose) {
    for (std::size_t i = 0; i < parsed.issues.size() && i < 20; ++i) {
      const ParseIssue& issue = parsed.issues[i];
      std::fprintf(stderr, "line %ld: %s%s%s\n", issue.line,
                   issue.field.empty() ? "" : (issue.field + ": ").c_str(),
                   issue.kind == ParseIssueKind::MalformedRow ? "malformed: " : "out of range: ",
                   issue.detail.c_str());
    }
  }

  std::stable_sort(parsed.records.begin(), parsed.records.end(),
                   [](const RawRecord& a, const RawRecord& b) { return a.timestamp < b.timestamp; });

  SplitOptions split_options;
  split_options.gap_threshold_minutes = config.gap_threshold_minutes;
  split_options.ignition_gap_minutes = config.ignition_gap_minutes;
  const std::vector<Journey> journeys = split_journeys(std::move(parsed.records), split_options);

  const auto provider = make_weather_provider(config);
  AggregateOptions aggregate_options;
  aggregate_options.timezone_offset_minutes = config.timezone_offset_minutes;

  std::vector<DrivingEvent> events;
  long weather_unavailable = 0;
  for (const Journey& journey : journeys) {
    AggregateResult result = aggregate_events(journey, provider.get(), aggregate_options);
    weather_unavailable += result.weather_unavailable;
    events.insert(events.end(), result.events.begin(), result.events.end());
  }

  const std::string events_path = out_path(config, "events.jsonl");
  write_events_jsonl_file(events_path, events);

  std::size_t record_count = 0;
  for (const Journey& journey : journeys) record_count += journey.records.size();
  std::printf("parsed %zu records; %ld rows rejected (%ld malformed, %ld range violations)\n",
              record_count, parsed.malformed_count() + parsed.range_violation_count(),
              parsed.malformed_count(), parsed.range_violation_count());
  std::printf("%zu journeys, %zu events; weather unavailable for %ld events -> %s\n",
              journeys.size(), events.size(), weather_unavailable, events_path.c_str());
  return 0;
}

int cmd_cluster(const PipelineConfig& config, const std::string& events_file, bool verbose) {
  const std::string input = events_file.empty() ? out_path(config, "events.jsonl") : events_file;
  require_file(input, "events file");
  ensure_out_dir(config);

  const LabelRuleConfig rules = load_rules_or_defaults(config);
  OverrideMap overrides;
  if (!config.overrides.empty()) {
    require_file(config.overrides, "override file");
    overrides = load_overrides(config.overrides);
  }

  ClusterParams params;
  params.k = config.cluster_k;
  params.cut_height = config.cut_height;
  params.min_events = config.min_events;

  auto groups = group_by_journey(read_events_jsonl_file(input));
  std::vector<DrivingEvent> labeled;
  std::vector<ClusterSummary> all_summaries;
  for (auto& journey_events : groups) {
    JourneyClusterResult result = cluster_journey(journey_events, params, rules, overrides);
    if (result.skipped) {
      std::printf("warning: %s\n", result.warning.c_str());
    } else if (verbose) {
      std::printf("journey %s: %zu clusters over %zu events\n",
                  journey_events.front().journey_id.c_str(), result.summaries.size(),
                  journey_events.size());
    }
    all_summaries.insert(all_summaries.end(), result.summaries.begin(), result.summaries.end());
    labeled.insert(labeled.end(), journey_events.begin(), journey_events.end());
  }

  const std::string labeled_path = out_path(config, "labeled_events.jsonl");
  write_events_jsonl_file(labeled_path, labeled);
  const std::string report_path = out_path(config, "cluster_report.csv");
  {
    std::ofstream out(report_path);
    if (!out) throw ConfigError("cannot write cluster report: " + report_path);
    write_cluster_report_csv(out, all_summaries);
  }

  long efficient = 0, inefficient = 0, unlabeled = 0;
  for (const DrivingEvent& ev : labeled) {
    if (ev.label == Label::Efficient) ++efficient;
    else if (ev.label == Label::Inefficient) ++inefficient;
    else ++unlabeled;
  }
  std::printf("%zu journeys clustered, %zu cluster summaries -> %s\n", groups.size(),
              all_summaries.size(), report_path.c_str());
  std::printf("labels: %ld Efficient, %ld Inefficient, %ld Unlabeled -> %s\n", efficient,
              inefficient, unlabeled, labeled_path.c_str());
  return 0;
}

std::vector<DrivingEvent> read_labeled_events(const PipelineConfig& config,
                                              const std::string& events_file,
                                              long* dropped_out) {
  const std::string input =
      events_file.empty() ? out_path(config, "labeled_events.jsonl") : events_file;
  require_file(input, "labeled events file");
  std::vector<DrivingEvent> events = read_events_jsonl_file(input);
  std::vector<DrivingEvent> labeled;
  labeled.reserve(events.size());
  for (DrivingEvent& ev : events) {
    if (ev.label != Label::Unlabeled) labeled.push_back(std::move(ev));
  }
  if (labeled.empty()) {
    throw UnlabeledData("no labeled events in " + input + "; run the cluster stage first");
  }
  if (dropped_out != nullptr) {
    *dropped_out = static_cast<long>(events.size() - labeled.size());
  }
  return labeled;
}

int cmd_train(const PipelineConfig& config, const std::string& events_file, bool /*verbose*/) {
  long dropped = 0;
  const std::vector<DrivingEvent> events = read_labeled_events(config, events_file, &dropped);
  ensure_out_dir(config);

  ForestParams params = config.forest;
  params.seed = config.seed;
  const LabelRuleConfig rules = load_rules_or_defaults(config);
  const ForestModel model = train_forest(events, params, rules.severity);

  const std::string path = model_path(config);
  save_model(model, path);
  if (dropped > 0) std::printf("dropped %ld unlabeled events\n", dropped);
  std::printf("trained random forest on %lld events: ntree=%d mtry=%d seed=%llu\n",
              static_cast<long long>(model.training_size), params.ntree, params.mtry,
              static_cast<unsigned long long>(params.seed));
  std::printf("OOB error estimate: %.4f -> %s\n", model.oob_error, path.c_str());
  return 0;
}

int cmd_evaluate(const PipelineConfig& config, const std::string& events_file, int folds,
                 bool /*verbose*/) {
  long dropped = 0;
  const std::vector<DrivingEvent> events = read_labeled_events(config, events_file, &dropped);
  ensure_out_dir(config);

  ForestParams params = config.forest;
  params.seed = config.seed;
  const LabelRuleConfig rules = load_rules_or_defaults(config);
  const int k = folds > 0 ? folds : config.cv_folds;
  const EvaluationReport report = cross_validate(events, params, k, config.seed, rules.severity);

  const std::string path = out_path(config, "evaluation.json");
  write_evaluation_json_file(path, report);
  if (dropped > 0) std::printf("dropped %ld unlabeled events\n", dropped);
  std::printf("%d-fold cross-validation on %lld events\n", k,
              static_cast<long long>(report.evaluated));
  std::printf("accuracy %.4f kappa %.4f MAE %.4f RMSE %.4f precision %.4f recall %.4f -> %s\n",
              report.accuracy, report.kappa, report.mean_absolute_error,
              report.root_mean_squared_error, report.precision, report.recall, path.c_str());
  return 0;
}

int cmd_replay(const PipelineConfig& config, const std::string& events_file,
               const std::string& model_file, bool /*verbose*/) {
  const std::string input =
      events_file.empty() ? out_path(config, "labeled_events.jsonl") : events_file;
  require_file(input, "events file");
  const std::string model_input = model_file.empty() ? model_path(config) : model_file;
  require_file(model_input, "model file");
  ensure_out_dir(config);

  const std::vector<DrivingEvent> events = read_events_jsonl_file(input);
  const ForestModel model = load_model(model_input);
  const FuzzyConfig fuzzy = load_fuzzy_or_defaults(config);
  const LabelRuleConfig rules = load_rules_or_defaults(config);

  const std::vector<FeedbackDecision> decisions =
      run_stream(events, model, fuzzy, nullptr, rules.severity);

  const std::string path = out_path(config, "decisions.jsonl");
  write_decisions_jsonl_file(path, decisions);

  long inefficient = 0, idling = 0;
  for (const FeedbackDecision& d : decisions) {
    if (d.verdict == Label::Inefficient) ++inefficient;
    if (d.reason == FeedbackReason::Idling) ++idling;
  }
  std::printf("%zu decisions (%ld inefficient, %ld stop-engine) -> %s\n", decisions.size(),
              inefficient, idling, path.c_str());
  return 0;
}

int cmd_simulate(const PipelineConfig& config, const std::string& events_file,
                 const std::string& decisions_file, bool /*verbose*/) {
  const std::string events_input =
      events_file.empty() ? out_path(config, "labeled_events.jsonl") : events_file;
  require_file(events_input, "events file");
  const std::string decisions_input =
      decisions_file.empty() ? out_path(config, "decisions.jsonl") : decisions_file;
  require_file(decisions_input, "decisions file");
  ensure_out_dir(config);

  const std::vector<DrivingEvent> events = read_events_jsonl_file(events_input);
  const std::vector<FeedbackDecision> decisions = read_decisions_jsonl_file(decisions_input);
  if (events.size() != decisions.size()) {
    throw LengthMismatch("events and decisions differ in length (" +
                         std::to_string(events.size()) + " vs " +
                         std::to_string(decisions.size()) + ")");
  }

  const BestIndex index = build_best_index(events);

  std::vector<SavingsReport> reports;
  const std::string csv_path = out_path(config, "savings_events.csv");
  std::ofstream csv(csv_path);
  if (!csv) throw ConfigError("cannot write savings events: " + csv_path);
  csv << "minute_start,latitude,longitude,actual_fuel_l,adjusted_fuel_l\n";

  std::size_t offset = 0;
  for (const auto& journey_events : group_by_journey(events)) {
    const std::span<const FeedbackDecision> journey_decisions(decisions.data() + offset,
                                                              journey_events.size());
    SavingsReport report = simulate_savings(journey_events, journey_decisions, index);
    write_savings_events_csv(csv, journey_events, report);
    std::printf("journey %s: gain %.2f%% (actual %.3f L, adjusted %.3f L, %zu substitutions, "
                "%ld unmatched)\n",
                report.journey_id.c_str(), report.efficiency_gain_percent,
                report.actual_total_fuel, report.adjusted_total_fuel,
                report.substitutions.size(), report.unmatched_count);
    reports.push_back(std::move(report));
    offset += journey_events.size();
  }

  const std::string path = out_path(config, "savings.json");
  write_savings_json_file(path, reports);
  std::printf("savings report -> %s; per-event table -> %s\n", path.c_str(), csv_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ecodrive: fuel-efficiency analytics and replay pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string events_file;
  std::string decisions_file;
  std::string model_file;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
  app.add_option("--config", config_path, "pipeline config JSON");
  app.add_option("--out", out_dir, "output directory (default: out)");
  app.add_option("--seed", seed, "seed for every stochastic component");
  app.add_flag("--verbose", verbose, "more detail on stdout/stderr");

  auto* generate = app.add_subcommand("generate", "synthesize a telemetry file from a profile");
  std::string profile_file;
  generate->add_option("--profile", profile_file, "generator profile JSON");

  auto* ingest = app.add_subcommand("ingest", "parse, split and aggregate raw telemetry");
  std::string telemetry_input;
  ingest->add_option("--input", telemetry_input, "telemetry CSV path");

  auto* cluster = app.add_subcommand("cluster", "per-journey clustering and labeling");
  std::optional<int> cluster_k;
  std::optional<double> cut_height;
  std::optional<int> min_events;
  std::string rules_file, overrides_file;
  cluster->add_option("--events", events_file, "events JSONL (default: <out>/events.jsonl)");
  cluster->add_option("--k", cluster_k, "cluster count for the dendrogram cut");
  cluster->add_option("--height", cut_height, "cut height (used instead of --k)");
  cluster->add_option("--min-events", min_events, "skip journeys below this many events");
  cluster->add_option("--rules", rules_file, "label rule config JSON");
  cluster->add_option("--overrides", overrides_file, "manual override CSV");

  auto* train = app.add_subcommand("train", "train the random-forest classifier");
  std::optional<int> ntree, mtry;
  train->add_option("--events", events_file,
                    "labeled events JSONL (default: <out>/labeled_events.jsonl)");
  train->add_option("--model", model_file, "model output path (default: <out>/model.json)");
  train->add_option("--ntree", ntree, "trees in the forest");
  train->add_option("--mtry", mtry, "features drawn per split");

  auto* evaluate = app.add_subcommand("evaluate", "k-fold cross-validation report");
  int folds = 0;
  evaluate->add_option("--events", events_file,
                       "labeled events JSONL (default: <out>/labeled_events.jsonl)");
  evaluate->add_option("--folds", folds, "cross-validation folds (default: 10)");

  auto* replay = app.add_subcommand("replay", "run the per-minute decision flow");
  replay->add_option("--events", events_file,
                     "events JSONL (default: <out>/labeled_events.jsonl)");
  replay->add_option("--model", model_file, "model path (default: <out>/model.json)");
  std::string fuzzy_file;
  replay->add_option("--fuzzy", fuzzy_file, "fuzzy config JSON");

  auto* simulate = app.add_subcommand("simulate", "savings against the historical best");
  simulate->add_option("--events", events_file,
                       "labeled events JSONL (default: <out>/labeled_events.jsonl)");
  simulate->add_option("--decisions", decisions_file,
                       "decisions JSONL (default: <out>/decisions.jsonl)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    PipelineConfig config = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (seed) config.seed = *seed;
    if (!telemetry_input.empty()) config.telemetry_input = telemetry_input;
    if (!profile_file.empty()) config.generator_profile = profile_file;
    if (!rules_file.empty()) config.label_rules = rules_file;
    if (!overrides_file.empty()) config.overrides = overrides_file;
    if (!fuzzy_file.empty()) config.fuzzy_config = fuzzy_file;
    if (!model_file.empty()) config.model_file = model_file;
    if (cluster_k) config.cluster_k = *cluster_k;
    if (cut_height) config.cut_height = cut_height;
    if (min_events) config.min_events = *min_events;
    if (ntree) config.forest.ntree = *ntree;
    if (mtry) config.forest.mtry = *mtry;

    if (generate->parsed()) return cmd_generate(config, verbose);
    if (ingest->parsed()) return cmd_ingest(config, verbose);
    if (cluster->parsed()) return cmd_cluster(config, events_file, verbose);
    if (train->parsed()) return cmd_train(config, events_file, verbose);
    if (evaluate->parsed()) return cmd_evaluate(config, events_file, folds, verbose);
    if (replay->parsed()) return cmd_replay(config, events_file, model_file, verbose);
    if (simulate->parsed()) return cmd_simulate(config, events_file, decisions_file, verbose);
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
