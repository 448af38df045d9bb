#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace arm {

struct NodeSpec {
  std::string id;
  std::string zone;  // "private" or "public"
  std::uint64_t capacity_rows = 0;

  bool is_private() const { return zone == "private"; }
};

struct RelationProfile {
  std::string relation;
  std::uint64_t size_rows = 0;
  bool sensitive = false;
  double t_proc_ms = 0;
  std::map<std::string, double> freq;  // requests/s by origin zone
};

// relation -> node id
using PlacementMap = std::map<std::string, std::string>;
// (origin zone, node id) -> round trip in ms
using RttTable = std::map<std::pair<std::string, std::string>, double>;

struct Migration {
  std::string relation;
  std::string from;
  std::string to;

  friend bool operator==(const Migration&, const Migration&) = default;
};

struct PlacementOptions {
  double hysteresis = 0.10;
  std::size_t max_migrations_per_cycle = 1;
  // Instances up to this size are solved by enumeration.
  std::size_t exact_max_relations = 6;
  std::size_t exact_max_nodes = 4;
};

struct PlacementPlan {
  PlacementMap assignment;  // cost-minimal feasible target
  double predicted_cost_ms_per_s = 0;
  double current_cost_ms_per_s = 0;
  std::vector<Migration> migrations;  // moves to make this cycle
  bool exact = true;
};

// Sum over relations r and origin zones z of freq[r][z] * (t_proc(r) + rtt(z, node(r))).
double predict_cost(const std::vector<RelationProfile>& profiles, const PlacementMap& assignment, const RttTable& rtt);

// Sensitive relations on private nodes only; per-node rows within capacity.
bool feasible(const std::vector<RelationProfile>& profiles, const std::vector<NodeSpec>& nodes,
              const PlacementMap& assignment);

// Throws infeasible when no assignment satisfies the constraints and
// invalid_argument for malformed input.
PlacementPlan evaluate(const std::vector<RelationProfile>& profiles, const std::vector<NodeSpec>& nodes,
                       const RttTable& rtt, const PlacementMap& current, const PlacementOptions& options = {});

}  // namespace arm
