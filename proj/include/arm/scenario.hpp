#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arm/notifier.hpp"
#include "arm/simnet.hpp"
#include "arm/store.hpp"

namespace arm {

struct ScenarioNode {
  std::string id;
  std::string zone;  // "private" or "public"
  std::uint64_t capacity_rows = 1'000'000;
  double processing_ms = 1;
};

struct ScenarioLink {
  std::string a;
  std::string b;
  LinkModel model;
  bool directed = false;  // only a -> b when set
};

struct ScenarioRelation {
  Relation schema;
  std::string owner;
  bool sensitive = false;
  std::vector<std::string> replicas;
  std::vector<Row> rows;
  // Synthetic rows with keys 1..n appended after `rows` (int64 keys only).
  std::uint64_t generate_rows = 0;
};

struct MixEntry {
  std::string relation;
  CommandKind op = CommandKind::select;
  double weight = 0;
};

struct ScenarioClient {
  std::string name;
  std::string origin_zone;
  std::string via;  // node the client submits through
  double rate = 0;  // requests/s, Poisson arrivals
  double start_s = 0;
  double duration_s = 0;
  std::vector<MixEntry> mix;
};

struct ControllerConfig {
  bool enabled = false;
  double period_s = 10;
  double hysteresis = 0.10;
  double window_s = 60;
  std::size_t max_migrations_per_cycle = 1;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  std::optional<double> duration_s;  // default: last client end
  std::optional<LinkModel> default_link = [] {
    LinkModel m;
    m.latency_ms = 1;
    return m;
  }();
  std::vector<ScenarioNode> nodes;
  std::vector<ScenarioLink> links;
  std::vector<ScenarioRelation> relations;
  std::vector<ScenarioClient> clients;
  ControllerConfig controller;
  RetryPolicy retry;
  bool log_deliveries = true;

  double end_s() const;
  const ScenarioNode& node(const std::string& id) const;
};

// Throws syntax_error with a byte offset for malformed JSON and
// validation_error naming the offending field otherwise.
Scenario parse_scenario(std::string_view json_text);
Scenario load_scenario(const std::filesystem::path& path);
void validate(const Scenario& scenario);

}  // namespace arm
