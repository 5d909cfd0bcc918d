#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>

#include "doctest.h"
#include "ecodrive/simulator.hpp"
#include "ecodrive/telemetry.hpp"
#include "test_helpers.hpp"

using namespace ecodrive;
using namespace testutil;

namespace {

const std::string kCli = ECODRIVE_CLI_PATH;

int cli(const std::string& args, const std::string& log) {
  return run_command("\"" + kCli + "\" " + args + " >" + log + " 2>&1");
}

void write_profile(const std::string& path, bool valid = true) {
  std::ofstream out(path);
  out << R"({
  "route": [
    {"latitude": 6.90, "longitude": 79.90, "elevation": 5.0},
    {"latitude": 6.95, "longitude": 79.95, "elevation": 8.0},
    {"latitude": 7.00, "longitude": 80.00, "elevation": 5.0})"
      << (valid ? "" : R"(,
    {"latitude": 7.00, "longitude": 80.00, "elevation": 5.0})")
      << R"(
  ],
  "departure": "2015-05-13T21:00:00",
  "style": "mixed",
  "idle_stops": [{"offset_minutes": 8, "duration_minutes": 5}],
  "weather_by_hour": {"21": "Clear", "22": "PartlyCloudy"}
})";
}

}  // namespace

TEST_CASE("missing input files exit with code 2") {
  TempDir dir("cli_missing");
  CHECK(cli("--out " + dir.file("out") + " ingest --input " + dir.file("nope.csv"),
            dir.file("log.txt")) == 2);
  const std::string log = read_file(dir.file("log.txt"));
  CHECK(log.find("does not exist") != std::string::npos);

  CHECK(cli("--out " + dir.file("out") + " train", dir.file("log2.txt")) == 2);
  CHECK(cli("--config " + dir.file("ghost.json") + " ingest", dir.file("log3.txt")) == 2);
}

TEST_CASE("unknown flags and subcommands exit with code 2") {
  TempDir dir("cli_usage");
  CHECK(cli("frobnicate", dir.file("log.txt")) == 2);
  CHECK(cli("ingest --no-such-flag", dir.file("log2.txt")) == 2);
}

TEST_CASE("ingest reports rejected rows but succeeds") {
  TempDir dir("cli_ingest");
  {
    std::ofstream out(dir.file("telemetry.csv"));
    out << "timestamp,longitude,latitude,bearing,elevation,distance,speed,acceleration,ignition,"
           "battery_voltage,fuel_level,fuel_consumed\n";
    out << "2015-05-13T16:40:00,79.9,6.9,45.0,10.0,0.1,40.0,0.0,1,27.5,100.0,0.01\n";
    out << "broken,row\n";
    out << "2015-05-13T16:40:20,79.9,95.0,45.0,10.0,0.1,40.0,0.0,1,27.5,100.0,0.01\n";
    out << "2015-05-13T16:40:40,79.9,6.9,45.0,10.0,0.1,999,0.0,notabool,27.5,100.0,0.01\n";
    out << "2015-05-13T16:41:00,79.9,6.9,45.0,10.0,0.1,42.0,0.0,1,27.5,100.0,0.01\n";
  }
  CHECK(cli("--out " + dir.file("out") + " ingest --input " + dir.file("telemetry.csv"),
            dir.file("log.txt")) == 0);
  const std::string log = read_file(dir.file("log.txt"));
  CHECK(log.find("3 rows rejected") != std::string::npos);
  CHECK(log.find("2 malformed") != std::string::npos);
  CHECK(log.find("1 range violations") != std::string::npos);

  const auto events = read_events_jsonl_file(dir.file("out") + "/events.jsonl");
  CHECK(events.size() == 2);
}

TEST_CASE("generate round-trips through ingest losslessly") {
  TempDir dir("cli_roundtrip");
  write_profile(dir.file("profile.json"));
  const std::string out = dir.file("out");
  REQUIRE(cli("--out " + out + " --seed 42 generate --profile " + dir.file("profile.json"),
              dir.file("log.txt")) == 0);

  {
    std::ofstream config(dir.file("config.json"));
    config << R"({"out_dir": ")" << out << R"(", "telemetry_input": ")" << out
           << R"(/telemetry.csv", "weather_fixture": ")" << out << R"(/weather_fixture.json"})";
  }
  REQUIRE(cli("--config " + dir.file("config.json") + " ingest", dir.file("log2.txt")) == 0);
  const std::string log = read_file(dir.file("log2.txt"));
  CHECK(log.find("0 rows rejected") != std::string::npos);
  CHECK(log.find("weather unavailable for 0 events") != std::string::npos);

  // the CSV is the canonical form: parse -> rewrite reproduces it byte for byte
  const ParseResult parsed = parse_telemetry_file(out + "/telemetry.csv");
  CHECK(parsed.issues.empty());
  std::ostringstream rewritten;
  write_telemetry_csv(rewritten, parsed.records);
  CHECK(rewritten.str() == read_file(out + "/telemetry.csv"));
}

TEST_CASE("invalid generator profile exits with code 2") {
  TempDir dir("cli_badprofile");
  write_profile(dir.file("profile.json"), false);  // repeated waypoint: zero-length segment
  CHECK(cli("--out " + dir.file("out") + " generate --profile " + dir.file("profile.json"),
            dir.file("log.txt")) == 2);
}

TEST_CASE("evaluate writes the statistics report") {
  TempDir dir("cli_evaluate");
  const auto events = separable_events(120, 3);
  write_events_jsonl_file(dir.file("labeled.jsonl"), events);
  REQUIRE(cli("--out " + dir.file("out") + " --seed 9 evaluate --events " +
                  dir.file("labeled.jsonl") + " --folds 5",
              dir.file("log.txt")) == 0);
  const std::string report = read_file(dir.file("out") + "/evaluation.json");
  for (const char* field :
       {"accuracy", "kappa", "mean_absolute_error", "root_mean_squared_error",
        "relative_absolute_error", "root_relative_squared_error", "precision", "recall"}) {
    CHECK(report.find(field) != std::string::npos);
  }
  // tiny dataset cannot be folded
  const auto few = separable_events(4, 3);
  write_events_jsonl_file(dir.file("tiny.jsonl"), few);
  CHECK(cli("--out " + dir.file("out") + " evaluate --events " + dir.file("tiny.jsonl") +
                " --folds 10",
            dir.file("log2.txt")) == 1);
}

TEST_CASE("cluster warns on tiny journeys and honors overrides") {
  TempDir dir("cli_cluster");
  std::vector<DrivingEvent> events;
  for (int i = 0; i < 15; ++i) {
    DrivingEvent ev = make_event(50.0 + (i % 5), 10.0 * i, false, 0, 22,
                                 WeatherCondition::Clear, 1.0, 0.02, "J0001");
    ev.minute_start = kBaseTime + i * 60;
    events.push_back(ev);
  }
  for (int i = 0; i < 3; ++i) {
    DrivingEvent ev = make_event(30.0, 0, false, 0, 10, WeatherCondition::Sunny, 1.0, 0.05,
                                 "J0002");
    ev.minute_start = kBaseTime + (100 + i) * 60;
    events.push_back(ev);
  }
  write_events_jsonl_file(dir.file("events.jsonl"), events);
  {
    std::ofstream overrides(dir.file("overrides.csv"));
    overrides << "J0001,1,Inefficient\n";
  }

  const std::string out = dir.file("out");
  REQUIRE(cli("--out " + out + " cluster --events " + dir.file("events.jsonl") +
                  " --k 3 --overrides " + dir.file("overrides.csv"),
              dir.file("log.txt")) == 0);
  const std::string log = read_file(dir.file("log.txt"));
  CHECK(log.find("warning: journey J0002 has 3 events") != std::string::npos);

  const auto labeled = read_events_jsonl_file(out + "/labeled_events.jsonl");
  REQUIRE(labeled.size() == events.size());
  for (std::size_t i = 15; i < 18; ++i) CHECK(labeled[i].label == Label::Unlabeled);

  // the override forced cluster 1 of J0001 to Inefficient in the report
  const std::string report = read_file(out + "/cluster_report.csv");
  CHECK(report.find("J0001,1,") != std::string::npos);
  std::istringstream lines(report);
  std::string line;
  bool override_applied = false;
  while (std::getline(lines, line)) {
    if (line.rfind("J0001,1,", 0) == 0 && line.find("Inefficient") != std::string::npos) {
      override_applied = true;
    }
  }
  CHECK(override_applied);
}

TEST_CASE("train then replay produce aligned artifacts") {
  TempDir dir("cli_train_replay");
  auto events = separable_events(100, 77);
  // a short idle block; the separable rule labels zero speed Inefficient
  for (int i = 0; i < 3; ++i) {
    DrivingEvent idle = make_event(0, 0, true, 0, 3, WeatherCondition::Clear, 0.0, 0.02);
    idle.minute_start = kBaseTime + (200 + i) * 60;
    idle.label = Label::Inefficient;
    events.push_back(idle);
  }
  write_events_jsonl_file(dir.file("labeled.jsonl"), events);
  const std::string out = dir.file("out");

  // defaults echoed when no overrides are given
  REQUIRE(cli("--out " + out + " --seed 5 train --events " + dir.file("labeled.jsonl"),
              dir.file("log0.txt")) == 0);
  CHECK(read_file(dir.file("log0.txt")).find("ntree=500 mtry=3") != std::string::npos);

  REQUIRE(cli("--out " + out + " --seed 5 train --events " + dir.file("labeled.jsonl") +
                  " --ntree 50",
              dir.file("log.txt")) == 0);
  const std::string train_log = read_file(dir.file("log.txt"));
  CHECK(train_log.find("ntree=50 mtry=3") != std::string::npos);
  CHECK(train_log.find("OOB error estimate") != std::string::npos);

  REQUIRE(cli("--out " + out + " replay --events " + dir.file("labeled.jsonl"),
              dir.file("log2.txt")) == 0);
  const auto decisions = read_decisions_jsonl_file(out + "/decisions.jsonl");
  CHECK(decisions.size() == events.size());
  CHECK(read_file(out + "/decisions.jsonl").find("StopEngine") != std::string::npos);

  REQUIRE(cli("--out " + out + " simulate --events " + dir.file("labeled.jsonl") +
                  " --decisions " + out + "/decisions.jsonl",
              dir.file("log3.txt")) == 0);
  CHECK(read_file(out + "/savings.json").find("efficiency_gain_percent") != std::string::npos);
}

TEST_CASE("train refuses a fully unlabeled input") {
  TempDir dir("cli_unlabeled");
  auto events = separable_events(40, 3);
  for (auto& ev : events) ev.label = Label::Unlabeled;
  write_events_jsonl_file(dir.file("events.jsonl"), events);
  CHECK(cli("--out " + dir.file("out") + " train --events " + dir.file("events.jsonl"),
            dir.file("log.txt")) == 1);
}
