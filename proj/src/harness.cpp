#include "arm/harness.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <random>
#include <set>

#include "arm/error.hpp"

namespace arm {

using nlohmann::ordered_json;

namespace {

NodeId sim_id(const std::string& node) { return NodeId{node, 1}; }

// Deterministic filler value for column `c` of synthetic row `key`.
Value synthetic(ColumnType type, std::int64_t key, std::size_t c) {
  switch (type) {
    case ColumnType::int64: return Value(static_cast<std::int64_t>((key * 7 + static_cast<std::int64_t>(c)) % 1000));
    case ColumnType::float64: return Value(static_cast<double>(key) / 4);
    case ColumnType::text: return Value("row" + std::to_string(key));
    case ColumnType::boolean: return Value(key % 2 == 0);
  }
  return Value::null();
}

Value random_value(ColumnType type, std::mt19937_64& rng) {
  switch (type) {
    case ColumnType::int64: return Value(static_cast<std::int64_t>(rng() % 100000));
    case ColumnType::float64: return Value(static_cast<double>(rng() % 100000) / 8);
    case ColumnType::text: return Value("v" + std::to_string(rng() % 100000));
    case ColumnType::boolean: return Value(rng() % 2 == 0);
  }
  return Value::null();
}

class Simulation {
 public:
  Simulation(const Scenario& s, std::uint64_t seed)
      : s_(s),
        seed_(seed),
        net_(seed, s.default_link),
        all_(std::nullopt),
        live_(std::max(s.controller.window_s, 1.0)),
        server_(std::max(s.controller.window_s, 1.0)) {}

  RunResult execute();

 private:
  struct ClientState {
    const ScenarioClient* spec = nullptr;
    std::size_t index = 0;
    std::mt19937_64 rng;
    double end_ms = 0;
    std::uint64_t inserted = 0;
    ClientTotals totals;
  };

  Notifier& hub(const std::string& node) { return *hubs_.at(node); }
  void setup();
  void schedule_arrival(ClientState& c);
  void issue(ClientState& c);
  RelationalCommand make_command(ClientState& c, const MixEntry& e);
  void control_cycle();
  void start_next_migration();
  void audit();
  RttTable measure_rtt(const std::set<std::string>& zones);

  const Scenario& s_;
  std::uint64_t seed_;
  SimNet net_;
  std::map<std::string, std::shared_ptr<Notifier>> hubs_;
  std::map<std::string, const ScenarioRelation*> relations_;
  std::map<std::string, std::vector<Value>> keys_;
  PlacementMap owners_;
  std::vector<std::unique_ptr<ClientState>> clients_;
  MetricsRecorder all_;
  MetricsRecorder live_;
  MetricsRecorder server_;
  std::vector<Migration> queue_;
  bool migrating_ = false;
  RunReport report_;
};

void Simulation::setup() {
  net_.set_trace(s_.log_deliveries);
  for (const auto& n : s_.nodes) net_.add_node(sim_id(n.id));
  for (const auto& l : s_.links) {
    if (l.directed) net_.set_directed_link(sim_id(l.a), sim_id(l.b), l.model);
    else net_.set_link(sim_id(l.a), sim_id(l.b), l.model);
  }

  std::vector<NodeId> peers;
  for (const auto& n : s_.nodes) peers.push_back(sim_id(n.id));
  for (const auto& r : s_.relations) relations_[r.schema.name] = &r;

  for (const auto& n : s_.nodes) {
    NodeConfig cfg;
    cfg.id = sim_id(n.id);
    cfg.peers = peers;
    cfg.retry = s_.retry;
    cfg.processing_ms = n.processing_ms;
    for (const auto& r : s_.relations)
      if (r.owner == n.id) cfg.schema.push_back(r.schema);
    auto h = Notifier::init(net_, cfg);
    const std::string node = n.id;
    h->set_event_sink([this](std::string_view kind, const std::string& details) {
      net_.log().append(net_.now_ms(), kind, details);
    });
    h->set_execution_observer([this, node](CommandKind kind, const std::string& relation, double duration) {
      server_.record(OperationRecord{kind, relation, node, net_.now_ms(), duration});
    });
    hubs_[n.id] = h;
  }

  for (const auto& r : s_.relations) {
    auto& store = hub(r.owner).store();
    auto tx = store.begin();
    const auto& cols = r.schema.columns;
    const auto pk = r.schema.key_index();
    auto insert_row = [&](const Row& row) {
      std::vector<Assignment> values;
      for (std::size_t c = 0; c < cols.size(); ++c) values.push_back({cols[c].name, row[c]});
      store.execute(build(QuerySpec::from(r.schema.name), CommandKind::insert, std::move(values)), tx);
      keys_[r.schema.name].push_back(row[pk]);
    };
    for (const auto& row : r.rows) insert_row(row);
    for (std::uint64_t k = 1; k <= r.generate_rows; ++k) {
      const auto key = static_cast<std::int64_t>(k);
      Row row;
      for (std::size_t c = 0; c < cols.size(); ++c) row.push_back(c == pk ? Value(key) : synthetic(cols[c].type, key, c));
      insert_row(row);
    }
    store.commit(tx);
    hub(r.owner).register_relation(r.schema.name, Role::owner);
    owners_[r.schema.name] = r.owner;
  }
  net_.deliver_until_quiescent();
  for (const auto& r : s_.relations)
    for (const auto& rep : r.replicas) hub(rep).register_relation(r.schema.name, Role::replica);
  net_.deliver_until_quiescent();
  net_.log().append(net_.now_ms(), "setup-done",
                    std::to_string(s_.nodes.size()) + " nodes " + std::to_string(s_.relations.size()) + " relations");
}

RelationalCommand Simulation::make_command(ClientState& c, const MixEntry& e) {
  const auto& rel = *relations_.at(e.relation);
  const auto& schema = rel.schema;
  const auto pk = schema.key_index();
  const auto& pool = keys_[e.relation];
  auto pick_key = [&]() -> Value { return pool.empty() ? Value(1) : pool[c.rng() % pool.size()]; };
  auto by_key = [&](const Value& key) { return QuerySpec::from(schema.name).where(schema.primary_key, CompareOp::eq, key); };

  switch (e.op) {
    case CommandKind::select:
      return build(by_key(pick_key()), CommandKind::select);
    case CommandKind::insert: {
      const auto key = static_cast<std::int64_t>(1'000'000'000 + c.index * 100'000'000 + ++c.inserted);
      std::vector<Assignment> values;
      for (std::size_t i = 0; i < schema.columns.size(); ++i)
        values.push_back({schema.columns[i].name, i == pk ? Value(key) : random_value(schema.columns[i].type, c.rng)});
      return build(QuerySpec::from(schema.name), CommandKind::insert, std::move(values));
    }
    case CommandKind::update: {
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < schema.columns.size(); ++i)
        if (i != pk) candidates.push_back(i);
      const auto key = pick_key();
      if (candidates.empty()) return build(by_key(key), CommandKind::select);
      const auto col = candidates[c.rng() % candidates.size()];
      return build(by_key(key), CommandKind::update,
                   {{schema.columns[col].name, random_value(schema.columns[col].type, c.rng)}});
    }
    case CommandKind::remove:
      return build(by_key(pick_key()), CommandKind::remove);
  }
  return build(by_key(pick_key()), CommandKind::select);
}

void Simulation::schedule_arrival(ClientState& c) {
  std::exponential_distribution<double> gap(c.spec->rate / 1000.0);
  const double at = net_.now_ms() + gap(c.rng);
  if (at > c.end_ms) return;
  net_.schedule(at - net_.now_ms(), [this, &c] {
    issue(c);
    schedule_arrival(c);
  });
}

void Simulation::issue(ClientState& c) {
  std::uniform_real_distribution<double> unit(0, 1);
  double pick = unit(c.rng);
  const MixEntry* entry = &c.spec->mix.back();
  for (const auto& e : c.spec->mix) {
    if (pick < e.weight) {
      entry = &e;
      break;
    }
    pick -= e.weight;
  }
  auto cmd = make_command(c, *entry);
  const double start = net_.now_ms();
  ++c.totals.issued;
  const auto relation = entry->relation;
  const auto kind = cmd.kind;
  hub(c.spec->via).submit(cmd, [this, &c, start, relation, kind](const Reply& reply) {
    if (reply.outcome.ok) {
      ++c.totals.acknowledged;
      OperationRecord rec{kind, relation, c.spec->origin_zone, start, net_.now_ms() - start};
      all_.record(rec);
      live_.record(rec);
    } else {
      ++c.totals.failed;
      ++c.totals.failures[std::string(to_string(reply.outcome.code))];
      net_.log().append(net_.now_ms(), "request-failed",
                        c.spec->name + " " + relation + " " + std::string(to_string(reply.outcome.code)));
    }
  });
}

RttTable Simulation::measure_rtt(const std::set<std::string>& zones) {
  RttTable rtt;
  for (const auto& zone : zones) {
    std::set<std::string> gateways;
    for (const auto& c : s_.clients)
      if (c.origin_zone == zone) gateways.insert(c.via);
    for (const auto& n : s_.nodes) {
      double sum = 0;
      for (const auto& g : gateways)
        if (g != n.id) sum += net_.link(sim_id(g), sim_id(n.id)).latency_ms + net_.link(sim_id(n.id), sim_id(g)).latency_ms;
      rtt[{zone, n.id}] = gateways.empty() ? 0 : sum / static_cast<double>(gateways.size());
    }
  }
  return rtt;
}

void Simulation::control_cycle() {
  ControllerCycle cycle;
  cycle.ts_ms = net_.now_ms();
  const std::string label = "cycle=" + std::to_string(report_.cycles.size() + 1);
  if (migrating_) {
    cycle.note = "migration in progress";
    net_.log().append(net_.now_ms(), "controller-skip", label + " migration in progress");
    report_.cycles.push_back(cycle);
    return;
  }
  const double now = net_.now_ms();
  std::vector<RelationProfile> profiles;
  std::set<std::string> zones;
  for (const auto& r : s_.relations) {
    RelationProfile p;
    p.relation = r.schema.name;
    p.sensitive = r.sensitive;
    auto& owner = hub(owners_.at(p.relation));
    p.size_rows = owner.store().has_relation(p.relation) ? owner.store().row_count(p.relation) : 0;
    const auto stats = live_.stats(p.relation, s_.controller.window_s, now);
    p.freq = stats.frequency;
    for (const auto& [z, f] : p.freq) zones.insert(z);
    p.t_proc_ms = server_.stats(p.relation, s_.controller.window_s, now).mean_ms.value_or(s_.node(owners_.at(p.relation)).processing_ms);
    profiles.push_back(std::move(p));
  }
  std::vector<NodeSpec> nodes;
  for (const auto& n : s_.nodes) nodes.push_back({n.id, n.zone, n.capacity_rows});
  PlacementOptions opts;
  opts.hysteresis = s_.controller.hysteresis;
  opts.max_migrations_per_cycle = s_.controller.max_migrations_per_cycle;
  try {
    const auto plan = evaluate(profiles, nodes, measure_rtt(zones), owners_, opts);
    cycle.current_cost = plan.current_cost_ms_per_s;
    cycle.target_cost = plan.predicted_cost_ms_per_s;
    cycle.planned = plan.migrations.size();
    char buf[160];
    std::snprintf(buf, sizeof buf, " current_cost=%.3f target_cost=%.3f planned=%zu", plan.current_cost_ms_per_s,
                  plan.predicted_cost_ms_per_s, plan.migrations.size());
    net_.log().append(now, "controller-cycle", label + buf);
    for (const auto& mv : plan.migrations)
      net_.log().append(now, "controller-plan", mv.relation + " " + mv.from + "->" + mv.to);
    queue_ = plan.migrations;
  } catch (const Error& e) {
    cycle.note = e.what();
    net_.log().append(now, "controller-infeasible", label + " " + e.what());
  }
  report_.cycles.push_back(cycle);
  start_next_migration();
}

void Simulation::start_next_migration() {
  if (migrating_ || queue_.empty()) return;
  const auto mv = queue_.front();
  queue_.erase(queue_.begin());
  migrating_ = true;
  const auto index = report_.migrations.size();
  report_.migrations.push_back({net_.now_ms(), 0, mv.relation, mv.from, mv.to, false, ""});
  net_.log().append(net_.now_ms(), "migration-start", mv.relation + " " + mv.from + "->" + mv.to);
  hub(mv.from).migrate(mv.relation, sim_id(mv.to), [this, index, mv](const Outcome& o) {
    auto& ev = report_.migrations[index];
    ev.end_ms = net_.now_ms();
    ev.ok = o.ok;
    ev.reason = o.ok ? "" : o.message;
    if (o.ok) owners_[mv.relation] = mv.to;
    net_.log().append(net_.now_ms(), o.ok ? "migration-done" : "migration-failed",
                      mv.relation + " " + mv.from + "->" + mv.to + (o.ok ? "" : " " + o.message));
    migrating_ = false;
    start_next_migration();
  });
}

void Simulation::audit() {
  for (const auto& r : s_.relations) {
    int accepting = 0;
    for (const auto& [id, h] : hubs_) accepting += h->accepts_mutations(r.schema.name);
    if (accepting > 1) ++report_.single_owner_violations;
  }
}

RunResult Simulation::execute() {
  report_.scenario = s_.name;
  report_.seed = seed_;
  report_.controller_enabled = s_.controller.enabled;
  setup();
  net_.set_observer([this] { audit(); });

  const double t0 = net_.now_ms();
  for (std::size_t i = 0; i < s_.clients.size(); ++i) {
    auto c = std::make_unique<ClientState>();
    c->spec = &s_.clients[i];
    c->index = i;
    std::seed_seq seq{seed_, static_cast<std::uint64_t>(i), std::uint64_t{0x61726d}};
    c->rng.seed(seq);
    c->end_ms = t0 + (c->spec->start_s + c->spec->duration_s) * 1000;
    c->totals.name = c->spec->name;
    c->totals.origin_zone = c->spec->origin_zone;
    auto& ref = *c;
    clients_.push_back(std::move(c));
    net_.schedule(ref.spec->start_s * 1000, [this, &ref] { schedule_arrival(ref); });
  }
  const double end_ms = t0 + s_.end_s() * 1000;
  if (s_.controller.enabled) {
    const double period = s_.controller.period_s * 1000;
    for (double t = t0 + period; t <= end_ms + 1e-9; t += period) net_.schedule(t - t0, [this] { control_cycle(); });
  }
  net_.deliver_until_quiescent();

  report_.duration_ms = net_.now_ms();
  report_.final_assignment = owners_;
  for (const auto& c : clients_) {
    report_.clients.push_back(c->totals);
    report_.issued += c->totals.issued;
    report_.acknowledged += c->totals.acknowledged;
    report_.failed += c->totals.failed;
  }
  for (const auto& r : s_.relations) {
    const auto& name = r.schema.name;
    auto& owner = hub(owners_.at(name)).store();
    const auto reference = owner.relation_data(name);
    for (const auto& [id, h] : hubs_)
      if (h->role(name) == Role::replica && (!h->store().has_relation(name) || !(h->store().relation_data(name).rows == reference.rows)))
        report_.replicas_converged = false;
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& c : s_.clients)
    for (const auto& e : c.mix) pairs.emplace_back(e.relation, c.origin_zone);
  RunResult result;
  result.records = all_.records();
  fill_latency(report_, result.records, pairs);
  net_.log().append(net_.now_ms(), "run-done",
                    "issued=" + std::to_string(report_.issued) + " acknowledged=" + std::to_string(report_.acknowledged) +
                        " failed=" + std::to_string(report_.failed));
  result.report = report_;
  result.events = net_.log().text();
  return result;
}

}  // namespace

void fill_latency(RunReport& report, const std::vector<OperationRecord>& records,
                  const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::map<std::pair<std::string, std::string>, std::vector<OperationRecord>> by_pair;
  std::map<std::string, std::vector<OperationRecord>> by_origin;
  for (const auto& p : pairs) {
    by_pair[p];
    by_origin[p.second];
  }
  for (const auto& r : records) {
    by_pair[{r.relation, r.origin_zone}].push_back(r);
    by_origin[r.origin_zone].push_back(r);
  }
  report.latency.clear();
  report.origins.clear();
  for (const auto& [key, recs] : by_pair) report.latency.push_back({key.first, key.second, summarize(recs)});
  for (const auto& [zone, recs] : by_origin) report.origins.push_back({"*", zone, summarize(recs)});
}

RunResult run(const Scenario& scenario, std::optional<std::uint64_t> seed) {
  validate(scenario);
  Simulation sim(scenario, seed.value_or(scenario.seed));
  return sim.execute();
}

namespace {

ordered_json optional_number(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json latency_json(const LatencyRow& row, bool with_relation) {
  ordered_json j;
  if (with_relation) j["relation"] = row.relation;
  j["origin_zone"] = row.origin_zone;
  j["count"] = row.summary.count;
  j["mean_ms"] = optional_number(row.summary.mean_ms);
  j["p95_ms"] = optional_number(row.summary.p95_ms);
  return j;
}

}  // namespace

std::string report_json(const RunReport& r) {
  ordered_json j;
  j["scenario"] = r.scenario;
  j["seed"] = r.seed;
  j["duration_ms"] = r.duration_ms;
  j["totals"] = {{"issued", r.issued}, {"acknowledged", r.acknowledged}, {"failed", r.failed}};
  j["clients"] = ordered_json::array();
  for (const auto& c : r.clients) {
    ordered_json failures = ordered_json::object();
    for (const auto& [code, n] : c.failures) failures[code] = n;
    j["clients"].push_back({{"name", c.name},
                            {"origin_zone", c.origin_zone},
                            {"issued", c.issued},
                            {"acknowledged", c.acknowledged},
                            {"failed", c.failed},
                            {"failures", failures}});
  }
  j["latency"] = ordered_json::array();
  for (const auto& row : r.latency) j["latency"].push_back(latency_json(row, true));
  j["origins"] = ordered_json::array();
  for (const auto& row : r.origins) j["origins"].push_back(latency_json(row, false));
  j["migrations"] = ordered_json::array();
  for (const auto& m : r.migrations)
    j["migrations"].push_back({{"start_ms", m.start_ms},
                               {"end_ms", m.end_ms},
                               {"relation", m.relation},
                               {"from", m.from},
                               {"to", m.to},
                               {"ok", m.ok},
                               {"reason", m.reason}});
  ordered_json cycles = ordered_json::array();
  for (const auto& c : r.cycles)
    cycles.push_back({{"ts_ms", c.ts_ms},
                      {"current_cost", optional_number(c.current_cost)},
                      {"target_cost", optional_number(c.target_cost)},
                      {"planned", c.planned},
                      {"note", c.note}});
  j["controller"] = {{"enabled", r.controller_enabled}, {"cycles", cycles}};
  j["final_assignment"] = ordered_json::object();
  for (const auto& [rel, node] : r.final_assignment) j["final_assignment"][rel] = node;
  j["audit"] = {{"single_owner_violations", r.single_owner_violations}, {"replicas_converged", r.replicas_converged}};
  return j.dump(2) + "\n";
}

std::string report_text(const RunReport& r) {
  std::string out;
  char buf[256];
  auto num = [](const std::optional<double>& v) {
    char b[32];
    if (!v) return std::string("-");
    std::snprintf(b, sizeof b, "%.3f", *v);
    return std::string(b);
  };
  if (!r.scenario.empty()) {
    std::snprintf(buf, sizeof buf, "scenario %s  seed %llu  simulated %.3f ms\n", r.scenario.c_str(),
                  static_cast<unsigned long long>(r.seed), r.duration_ms);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-20s %-12s %8s %12s %12s\n", "relation", "origin", "count", "mean_ms", "p95_ms");
  out += buf;
  for (const auto& row : r.latency) {
    std::snprintf(buf, sizeof buf, "%-20s %-12s %8llu %12s %12s\n", row.relation.c_str(), row.origin_zone.c_str(),
                  static_cast<unsigned long long>(row.summary.count), num(row.summary.mean_ms).c_str(),
                  num(row.summary.p95_ms).c_str());
    out += buf;
  }
  std::uint64_t total = 0;
  for (const auto& row : r.origins) {
    std::snprintf(buf, sizeof buf, "%-20s %-12s %8llu %12s %12s\n", "*", row.origin_zone.c_str(),
                  static_cast<unsigned long long>(row.summary.count), num(row.summary.mean_ms).c_str(),
                  num(row.summary.p95_ms).c_str());
    out += buf;
    total += row.summary.count;
  }
  std::snprintf(buf, sizeof buf, "%-20s %-12s %8llu\n", "total", "", static_cast<unsigned long long>(total));
  out += buf;
  if (!r.clients.empty()) {
    std::snprintf(buf, sizeof buf, "requests issued %llu  acknowledged %llu  failed %llu\n",
                  static_cast<unsigned long long>(r.issued), static_cast<unsigned long long>(r.acknowledged),
                  static_cast<unsigned long long>(r.failed));
    out += buf;
  }
  for (const auto& m : r.migrations) {
    std::snprintf(buf, sizeof buf, "migration %s %s -> %s at %.3f ms: %s\n", m.relation.c_str(), m.from.c_str(),
                  m.to.c_str(), m.start_ms, m.ok ? "done" : ("failed: " + m.reason).c_str());
    out += buf;
  }
  if (!r.final_assignment.empty()) {
    out += "final assignment:";
    for (const auto& [rel, node] : r.final_assignment) out += " " + rel + "=" + node;
    out += "\n";
  }
  return out;
}

std::string format_report(const RunReport& report, std::string_view format) {
  if (format == "text") return report_text(report);
  if (format == "json") return report_json(report);
  throw Error(ErrorCode::invalid_argument, "unknown report format '" + std::string(format) + "'");
}

void write_outputs(const RunResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create " + dir.string() + ": " + ec.message());
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out || !(out << text) || !out.flush()) throw Error(ErrorCode::io_error, "cannot write " + (dir / name).string());
  };
  write("report.json", report_json(result.report));
  write("metrics.csv", MetricsRecorder::to_csv(result.records));
  write("events.log", result.events);
}

}  // namespace arm
