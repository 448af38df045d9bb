#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "arm/metrics.hpp"
#include "arm/placement.hpp"
#include "arm/scenario.hpp"

namespace arm {

struct LatencyRow {
  std::string relation;  // "*" for all relations
  std::string origin_zone;
  Summary summary;
};

struct MigrationEvent {
  double start_ms = 0;
  double end_ms = 0;
  std::string relation;
  std::string from;
  std::string to;
  bool ok = false;
  std::string reason;
};

struct ControllerCycle {
  double ts_ms = 0;
  std::optional<double> current_cost;
  std::optional<double> target_cost;
  std::size_t planned = 0;
  std::string note;
};

struct ClientTotals {
  std::string name;
  std::string origin_zone;
  std::uint64_t issued = 0;
  std::uint64_t acknowledged = 0;
  std::uint64_t failed = 0;
  std::map<std::string, std::uint64_t> failures;  // error code -> count
};

struct RunReport {
  std::string scenario;
  std::uint64_t seed = 0;
  double duration_ms = 0;
  std::vector<LatencyRow> latency;  // per relation and origin
  std::vector<LatencyRow> origins;  // per origin over all relations
  std::vector<MigrationEvent> migrations;
  bool controller_enabled = false;
  std::vector<ControllerCycle> cycles;
  PlacementMap final_assignment;
  std::vector<ClientTotals> clients;
  std::uint64_t issued = 0;
  std::uint64_t acknowledged = 0;
  std::uint64_t failed = 0;
  std::uint64_t single_owner_violations = 0;
  bool replicas_converged = true;
};

struct RunResult {
  RunReport report;
  std::vector<OperationRecord> records;  // successful client requests
  std::string events;                    // events.log contents
};

// Runs the scenario on the simulated network until quiescence.
RunResult run(const Scenario& scenario, std::optional<std::uint64_t> seed = std::nullopt);

// Latency tables from raw records; `pairs` adds zero rows for
// (relation, origin) combinations without records.
void fill_latency(RunReport& report, const std::vector<OperationRecord>& records,
                  const std::vector<std::pair<std::string, std::string>>& pairs = {});

std::string report_json(const RunReport& report);
std::string report_text(const RunReport& report);
// `format` is "text" or "json"; anything else throws invalid_argument.
std::string format_report(const RunReport& report, std::string_view format);

// report.json, metrics.csv and events.log under `dir` (created if needed).
void write_outputs(const RunResult& result, const std::filesystem::path& dir);

}  // namespace arm
