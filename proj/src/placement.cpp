#include "arm/placement.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include "arm/error.hpp"

namespace arm {

namespace {

double rtt_of(const RttTable& rtt, const std::string& zone, const std::string& node) {
  auto it = rtt.find({zone, node});
  if (it == rtt.end()) throw Error(ErrorCode::invalid_argument, "missing rtt entry for zone " + zone + " to node " + node);
  return it->second;
}

// Cost of hosting one relation on one node.
double relation_cost(const RelationProfile& p, const std::string& node, const RttTable& rtt) {
  double cost = 0;
  for (const auto& [zone, f] : p.freq) cost += f * (p.t_proc_ms + rtt_of(rtt, zone, node));
  return cost;
}

std::vector<const RelationProfile*> sorted_profiles(const std::vector<RelationProfile>& profiles) {
  std::vector<const RelationProfile*> out;
  std::set<std::string> seen;
  for (const auto& p : profiles) {
    if (!seen.insert(p.relation).second) throw Error(ErrorCode::invalid_argument, "duplicate profile " + p.relation);
    if (p.t_proc_ms < 0) throw Error(ErrorCode::invalid_argument, "negative t_proc for " + p.relation);
    for (const auto& [z, f] : p.freq)
      if (!(f >= 0)) throw Error(ErrorCode::invalid_argument, "negative frequency for " + p.relation);
    out.push_back(&p);
  }
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->relation < b->relation; });
  return out;
}

std::vector<const NodeSpec*> sorted_nodes(const std::vector<NodeSpec>& nodes) {
  std::vector<const NodeSpec*> out;
  std::set<std::string> seen;
  for (const auto& n : nodes) {
    if (!seen.insert(n.id).second) throw Error(ErrorCode::invalid_argument, "duplicate node " + n.id);
    if (n.capacity_rows == 0) throw Error(ErrorCode::invalid_argument, "node " + n.id + " has no capacity");
    out.push_back(&n);
  }
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->id < b->id; });
  return out;
}

}  // namespace

double predict_cost(const std::vector<RelationProfile>& profiles, const PlacementMap& assignment, const RttTable& rtt) {
  double total = 0;
  for (const auto* p : sorted_profiles(profiles)) {
    auto it = assignment.find(p->relation);
    if (it == assignment.end()) throw Error(ErrorCode::invalid_argument, "relation " + p->relation + " is unassigned");
    total += relation_cost(*p, it->second, rtt);
  }
  return total;
}

bool feasible(const std::vector<RelationProfile>& profiles, const std::vector<NodeSpec>& nodes,
              const PlacementMap& assignment) {
  std::map<std::string, const NodeSpec*> by_id;
  for (const auto& n : nodes) by_id[n.id] = &n;
  std::map<std::string, std::uint64_t> used;
  for (const auto& p : profiles) {
    auto it = assignment.find(p.relation);
    if (it == assignment.end()) return false;
    auto node = by_id.find(it->second);
    if (node == by_id.end()) return false;
    if (p.sensitive && !node->second->is_private()) return false;
    used[it->second] += p.size_rows;
  }
  for (const auto& [id, rows] : used)
    if (rows > by_id[id]->capacity_rows) return false;
  return true;
}

PlacementPlan evaluate(const std::vector<RelationProfile>& profiles, const std::vector<NodeSpec>& nodes,
                       const RttTable& rtt, const PlacementMap& current, const PlacementOptions& options) {
  const auto rels = sorted_profiles(profiles);
  const auto ns = sorted_nodes(nodes);
  if (ns.empty()) throw Error(ErrorCode::infeasible, "no nodes");
  for (const auto* p : rels) {
    auto it = current.find(p->relation);
    if (it == current.end()) throw Error(ErrorCode::invalid_argument, "relation " + p->relation + " has no current node");
    if (std::none_of(ns.begin(), ns.end(), [&](auto* n) { return n->id == it->second; }))
      throw Error(ErrorCode::invalid_argument, "relation " + p->relation + " is on unknown node " + it->second);
  }

  // cost[i][j]: relation i on node j
  const auto k = rels.size();
  const auto m = ns.size();
  std::vector<std::vector<double>> cost(k, std::vector<double>(m));
  std::vector<std::vector<bool>> allowed(k, std::vector<bool>(m));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      cost[i][j] = relation_cost(*rels[i], ns[j]->id, rtt);
      allowed[i][j] = (!rels[i]->sensitive || ns[j]->is_private()) && rels[i]->size_rows <= ns[j]->capacity_rows;
    }
  std::vector<std::size_t> cur(k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (ns[j]->id == current.at(rels[i]->relation)) cur[i] = j;

  auto total = [&](const std::vector<std::size_t>& a) {
    double t = 0;
    for (std::size_t i = 0; i < k; ++i) t += cost[i][a[i]];
    return t;
  };
  auto moves = [&](const std::vector<std::size_t>& a) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < k; ++i) n += a[i] != cur[i];
    return n;
  };
  auto fits = [&](const std::vector<std::size_t>& a) {
    std::vector<std::uint64_t> used(m, 0);
    for (std::size_t i = 0; i < k; ++i) {
      if (!allowed[i][a[i]]) return false;
      used[a[i]] += rels[i]->size_rows;
      if (used[a[i]] > ns[a[i]]->capacity_rows) return false;
    }
    return true;
  };

  PlacementPlan plan;
  std::optional<std::vector<std::size_t>> best;
  double best_cost = 0;
  std::size_t best_moves = 0;
  plan.exact = k <= options.exact_max_relations && m <= options.exact_max_nodes;
  if (plan.exact) {
    // Odometer over node indices with the first relation most significant,
    // so the first minimum found is the lexicographically smallest.
    std::vector<std::size_t> a(k, 0);
    for (bool more = true; more;) {
      if (fits(a)) {
        const double c = total(a);
        const auto mv = moves(a);
        if (!best || c < best_cost || (c == best_cost && mv < best_moves)) {
          best = a;
          best_cost = c;
          best_moves = mv;
        }
      }
      more = false;
      for (std::size_t pos = k; pos-- > 0;) {
        if (++a[pos] < m) {
          more = true;
          break;
        }
        a[pos] = 0;
      }
    }
  } else {
    std::vector<std::size_t> a(k);
    std::vector<std::uint64_t> used(m, 0);
    for (std::size_t i = 0; i < k; ++i) {
      std::optional<std::size_t> pick;
      for (std::size_t j = 0; j < m; ++j) {
        if (!allowed[i][j] || used[j] + rels[i]->size_rows > ns[j]->capacity_rows) continue;
        if (!pick || cost[i][j] < cost[i][*pick] ||
            (cost[i][j] == cost[i][*pick] && j == cur[i] && *pick != cur[i]))
          pick = j;
      }
      if (!pick) throw Error(ErrorCode::infeasible, "no node can host " + rels[i]->relation);
      a[i] = *pick;
      used[*pick] += rels[i]->size_rows;
    }
    best = a;
    best_cost = total(a);
  }
  if (!best) throw Error(ErrorCode::infeasible, "no assignment satisfies sensitivity and capacity");

  for (std::size_t i = 0; i < k; ++i) plan.assignment[rels[i]->relation] = ns[(*best)[i]]->id;
  plan.predicted_cost_ms_per_s = best_cost;
  plan.current_cost_ms_per_s = total(cur);

  // Moves towards the target, largest reduction first. An infeasible
  // current placement is repaired without the hysteresis threshold.
  std::vector<std::size_t> state = cur;
  const double threshold = options.hysteresis * plan.current_cost_ms_per_s;
  while (plan.migrations.size() < options.max_migrations_per_cycle) {
    std::vector<std::uint64_t> load(m, 0);
    for (std::size_t r = 0; r < k; ++r) load[state[r]] += rels[r]->size_rows;
    std::optional<std::size_t> pick;
    double pick_gain = 0;
    bool pick_repairs = false;
    for (std::size_t i = 0; i < k; ++i) {
      if (state[i] == (*best)[i]) continue;
      auto next = state;
      next[i] = (*best)[i];
      std::vector<std::uint64_t> used(m, 0);
      for (std::size_t r = 0; r < k; ++r) used[next[r]] += rels[r]->size_rows;
      if (used[next[i]] > ns[next[i]]->capacity_rows) continue;
      const double gain = cost[i][state[i]] - cost[i][next[i]];
      const bool repairs = !allowed[i][state[i]] || load[state[i]] > ns[state[i]]->capacity_rows;
      if (!repairs && !(gain > threshold)) continue;
      if (!pick || (repairs && !pick_repairs) || (repairs == pick_repairs && gain > pick_gain)) {
        pick = i;
        pick_gain = gain;
        pick_repairs = repairs;
      }
    }
    if (!pick) break;
    plan.migrations.push_back({rels[*pick]->relation, ns[state[*pick]]->id, ns[(*best)[*pick]]->id});
    state[*pick] = (*best)[*pick];
  }
  return plan;
}

}  // namespace arm
