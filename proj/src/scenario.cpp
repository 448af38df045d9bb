#include "arm/scenario.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "arm/error.hpp"

namespace arm {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::validation_error, where + ": " + what);
}

// Field access with the path of the field in error messages.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) invalid(path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& raw(const std::string& key) const {
    if (!j_.contains(key)) invalid(at(key), "missing field");
    return j_.at(key);
  }

  std::string text(const std::string& key) const {
    const auto& v = raw(key);
    if (!v.is_string()) invalid(at(key), "expected a string");
    return v.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) const { return has(key) ? text(key) : fallback; }

  double number(const std::string& key) const {
    const auto& v = raw(key);
    if (!v.is_number()) invalid(at(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) invalid(at(key), "expected a finite number");
    return d;
  }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::uint64_t count(const std::string& key) const {
    const auto& v = raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      invalid(at(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) const { return has(key) ? count(key) : fallback; }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_boolean()) invalid(at(key), "expected true or false");
    return v.get<bool>();
  }

  const json& array(const std::string& key) const {
    const auto& v = raw(key);
    if (!v.is_array()) invalid(at(key), "expected an array");
    return v;
  }

  void reject_unknown(std::initializer_list<const char*> known) const {
    for (const auto& [k, v] : j_.items()) {
      bool ok = false;
      for (const char* name : known) ok = ok || k == name;
      if (!ok) invalid(at(k), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
};

LinkModel read_link(const Reader& r) {
  LinkModel m;
  m.latency_ms = r.number("latency_ms", 0);
  m.loss_probability = r.number("loss_probability", 0);
  if (r.has("bandwidth_bytes_per_ms")) m.bandwidth_bytes_per_ms = r.number("bandwidth_bytes_per_ms");
  m.duplicate_probability = r.number("duplicate_probability", 0);
  m.jitter_ms = r.number("jitter_ms", 0);
  try {
    m.validate();
  } catch (const Error& e) {
    invalid(r.path(), e.what());
  }
  return m;
}

Value json_value(const json& v, ColumnType type, const std::string& where) {
  if (v.is_null()) return Value::null();
  switch (type) {
    case ColumnType::int64:
      if (v.is_number_integer()) return Value(v.get<std::int64_t>());
      break;
    case ColumnType::float64:
      if (v.is_number()) return Value(v.get<double>());
      break;
    case ColumnType::text:
      if (v.is_string()) return Value(v.get<std::string>());
      break;
    case ColumnType::boolean:
      if (v.is_boolean()) return Value(v.get<bool>());
      break;
  }
  invalid(where, std::string("expected a ") + std::string(to_string(type)) + " value");
}

std::string item(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

}  // namespace

double Scenario::end_s() const {
  if (duration_s) return *duration_s;
  double end = 0;
  for (const auto& c : clients) end = std::max(end, c.start_s + c.duration_s);
  return end;
}

const ScenarioNode& Scenario::node(const std::string& id) const {
  for (const auto& n : nodes)
    if (n.id == id) return n;
  throw Error(ErrorCode::invalid_argument, "unknown node '" + id + "'");
}

Scenario parse_scenario(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::syntax_error, std::string("scenario is not valid JSON: ") + e.what(), e.byte);
  }
  Reader top(root, "");
  top.reject_unknown({"name", "seed", "duration_s", "default_link", "nodes", "links", "relations", "clients",
                      "controller", "retry", "log_deliveries", "description"});
  Scenario s;
  s.name = top.text("name", "scenario");
  s.seed = top.count("seed", 1);
  if (top.has("duration_s")) s.duration_s = top.number("duration_s");
  if (top.has("default_link")) {
    const auto& dl = top.raw("default_link");
    if (dl.is_string() && dl.get<std::string>() == "none") {
      s.default_link.reset();
    } else {
      Reader r(dl, "default_link");
      r.reject_unknown({"latency_ms", "loss_probability", "bandwidth_bytes_per_ms", "duplicate_probability", "jitter_ms"});
      s.default_link = read_link(r);
    }
  }
  s.log_deliveries = top.flag("log_deliveries", true);

  const auto& nodes = top.array("nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Reader r(nodes[i], item("nodes", i));
    r.reject_unknown({"id", "zone", "capacity_rows", "processing_ms"});
    ScenarioNode n;
    n.id = r.text("id");
    n.zone = r.text("zone");
    n.capacity_rows = r.count("capacity_rows", n.capacity_rows);
    n.processing_ms = r.number("processing_ms", n.processing_ms);
    s.nodes.push_back(n);
  }

  if (top.has("links")) {
    const auto& links = top.array("links");
    for (std::size_t i = 0; i < links.size(); ++i) {
      Reader r(links[i], item("links", i));
      r.reject_unknown({"a", "b", "directed", "latency_ms", "loss_probability", "bandwidth_bytes_per_ms",
                        "duplicate_probability", "jitter_ms"});
      s.links.push_back({r.text("a"), r.text("b"), read_link(r), r.flag("directed", false)});
    }
  }

  const auto& relations = top.array("relations");
  for (std::size_t i = 0; i < relations.size(); ++i) {
    Reader r(relations[i], item("relations", i));
    r.reject_unknown({"name", "primary_key", "columns", "owner", "sensitive", "replicas", "rows", "generate_rows"});
    ScenarioRelation rel;
    rel.schema.name = r.text("name");
    rel.schema.primary_key = r.text("primary_key");
    const auto& cols = r.array("columns");
    for (std::size_t c = 0; c < cols.size(); ++c) {
      Reader cr(cols[c], item(r.at("columns"), c));
      cr.reject_unknown({"name", "type"});
      Column col;
      col.name = cr.text("name");
      try {
        col.type = column_type_from_string(cr.text("type"));
      } catch (const Error& e) {
        invalid(cr.at("type"), e.what());
      }
      rel.schema.columns.push_back(col);
    }
    try {
      arm::validate(rel.schema);
    } catch (const Error& e) {
      invalid(r.path(), e.what());
    }
    rel.owner = r.text("owner");
    rel.sensitive = r.flag("sensitive", false);
    if (r.has("replicas")) {
      const auto& reps = r.array("replicas");
      for (std::size_t k = 0; k < reps.size(); ++k) {
        if (!reps[k].is_string()) invalid(item(r.at("replicas"), k), "expected a node id");
        rel.replicas.push_back(reps[k].get<std::string>());
      }
    }
    if (r.has("rows")) {
      const auto& rows = r.array("rows");
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto where = item(r.at("rows"), k);
        if (!rows[k].is_array() || rows[k].size() != rel.schema.columns.size())
          invalid(where, "expected an array of " + std::to_string(rel.schema.columns.size()) + " values");
        Row row;
        for (std::size_t c = 0; c < rel.schema.columns.size(); ++c)
          row.push_back(json_value(rows[k][c], rel.schema.columns[c].type, item(where, c)));
        rel.rows.push_back(std::move(row));
      }
    }
    rel.generate_rows = r.count("generate_rows", 0);
    s.relations.push_back(std::move(rel));
  }

  const auto& clients = top.array("clients");
  for (std::size_t i = 0; i < clients.size(); ++i) {
    Reader r(clients[i], item("clients", i));
    r.reject_unknown({"name", "origin_zone", "via", "rate", "start_s", "duration_s", "mix"});
    ScenarioClient c;
    c.name = r.text("name", "client" + std::to_string(i));
    c.origin_zone = r.text("origin_zone");
    c.via = r.text("via");
    c.rate = r.number("rate");
    c.start_s = r.number("start_s", 0);
    c.duration_s = r.number("duration_s");
    const auto& mix = r.array("mix");
    for (std::size_t k = 0; k < mix.size(); ++k) {
      Reader mr(mix[k], item(r.at("mix"), k));
      mr.reject_unknown({"relation", "op", "weight"});
      MixEntry e;
      e.relation = mr.text("relation");
      const auto op = mr.text("op");
      bool known = false;
      for (auto kind : {CommandKind::select, CommandKind::insert, CommandKind::update, CommandKind::remove})
        if (to_string(kind) == op) {
          e.op = kind;
          known = true;
        }
      if (!known) invalid(mr.at("op"), "expected select, insert, update or delete");
      e.weight = mr.number("weight");
      c.mix.push_back(e);
    }
    s.clients.push_back(std::move(c));
  }

  if (top.has("controller")) {
    Reader r(top.raw("controller"), "controller");
    r.reject_unknown({"enabled", "period_s", "hysteresis", "window_s", "max_migrations_per_cycle"});
    s.controller.enabled = r.flag("enabled", false);
    s.controller.period_s = r.number("period_s", s.controller.period_s);
    s.controller.hysteresis = r.number("hysteresis", s.controller.hysteresis);
    s.controller.window_s = r.number("window_s", s.controller.window_s);
    s.controller.max_migrations_per_cycle = r.count("max_migrations_per_cycle", s.controller.max_migrations_per_cycle);
  }
  if (top.has("retry")) {
    Reader r(top.raw("retry"), "retry");
    r.reject_unknown({"max_attempts", "initial_timeout_ms", "backoff"});
    s.retry.max_attempts = static_cast<int>(r.count("max_attempts", 5));
    s.retry.initial_timeout_ms = r.number("initial_timeout_ms", 50);
    s.retry.backoff = r.number("backoff", 2);
  }
  validate(s);
  return s;
}

void validate(const Scenario& s) {
  if (s.nodes.empty()) invalid("nodes", "at least one node is required");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    const auto& n = s.nodes[i];
    const auto where = item("nodes", i);
    if (n.id.empty() || n.id.find_first_of(" \t\n,\"") != std::string::npos) invalid(where + ".id", "bad node id '" + n.id + "'");
    if (!ids.insert(n.id).second) invalid(where + ".id", "duplicate node id '" + n.id + "'");
    if (n.zone != "private" && n.zone != "public") invalid(where + ".zone", "expected private or public");
    if (n.capacity_rows == 0) invalid(where + ".capacity_rows", "must be positive");
    if (!(n.processing_ms >= 0)) invalid(where + ".processing_ms", "must be non-negative");
  }
  auto known = [&](const std::string& id, const std::string& where) {
    if (!ids.count(id)) invalid(where, "unknown node '" + id + "'");
  };
  for (std::size_t i = 0; i < s.links.size(); ++i) {
    known(s.links[i].a, item("links", i) + ".a");
    known(s.links[i].b, item("links", i) + ".b");
    if (s.links[i].a == s.links[i].b) invalid(item("links", i), "link endpoints must differ");
  }
  if (!s.default_link) {
    std::set<std::pair<std::string, std::string>> have;
    for (const auto& l : s.links) {
      have.insert({l.a, l.b});
      if (!l.directed) have.insert({l.b, l.a});
    }
    for (const auto& a : s.nodes)
      for (const auto& b : s.nodes)
        if (a.id != b.id && !have.count({a.id, b.id}))
          invalid("links", "no link from " + a.id + " to " + b.id + " and default_link is none");
  }

  std::set<std::string> names;
  for (std::size_t i = 0; i < s.relations.size(); ++i) {
    const auto& r = s.relations[i];
    const auto where = item("relations", i);
    if (!names.insert(r.schema.name).second) invalid(where + ".name", "duplicate relation '" + r.schema.name + "'");
    known(r.owner, where + ".owner");
    if (r.sensitive && s.node(r.owner).zone != "private")
      invalid(where + ".owner", "sensitive relation '" + r.schema.name + "' must start on a private node");
    std::set<std::string> reps;
    for (std::size_t k = 0; k < r.replicas.size(); ++k) {
      known(r.replicas[k], item(where + ".replicas", k));
      if (r.replicas[k] == r.owner) invalid(item(where + ".replicas", k), "owner cannot be a replica");
      if (!reps.insert(r.replicas[k]).second) invalid(item(where + ".replicas", k), "duplicate replica");
    }
    if (r.generate_rows > 0 && r.schema.columns[r.schema.key_index()].type != ColumnType::int64)
      invalid(where + ".generate_rows", "synthetic rows need an int64 primary key");
  }

  if (s.clients.empty()) invalid("clients", "at least one client is required");
  std::set<std::string> client_names;
  for (std::size_t i = 0; i < s.clients.size(); ++i) {
    const auto& c = s.clients[i];
    const auto where = item("clients", i) + " (" + c.name + ")";
    if (!client_names.insert(c.name).second) invalid(where + ".name", "duplicate client name");
    if (c.origin_zone.empty() || c.origin_zone.find_first_of(",\"\r\n") != std::string::npos)
      invalid(where + ".origin_zone", "bad origin zone");
    known(c.via, where + ".via");
    if (!(c.rate > 0)) invalid(where + ".rate", "must be positive");
    if (!(c.duration_s > 0)) invalid(where + ".duration_s", "must be positive");
    if (!(c.start_s >= 0)) invalid(where + ".start_s", "must be non-negative");
    if (c.mix.empty()) invalid(where + ".mix", "must not be empty");
    double sum = 0;
    for (std::size_t k = 0; k < c.mix.size(); ++k) {
      const auto& e = c.mix[k];
      if (!names.count(e.relation)) invalid(item(where + ".mix", k) + ".relation", "unknown relation '" + e.relation + "'");
      if (!(e.weight >= 0)) invalid(item(where + ".mix", k) + ".weight", "must be non-negative");
      const auto& rel = *std::find_if(s.relations.begin(), s.relations.end(),
                                      [&](const ScenarioRelation& r) { return r.schema.name == e.relation; });
      if (e.op == CommandKind::insert && rel.schema.columns[rel.schema.key_index()].type != ColumnType::int64)
        invalid(item(where + ".mix", k), "generated inserts need an int64 primary key");
      sum += e.weight;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      invalid(where + ".mix", "weights sum to " + std::to_string(sum) + ", expected 1");
  }

  const auto& ctl = s.controller;
  if (!(ctl.period_s > 0)) invalid("controller.period_s", "must be positive");
  if (!(ctl.window_s > 0)) invalid("controller.window_s", "must be positive");
  if (!(ctl.hysteresis >= 0)) invalid("controller.hysteresis", "must be non-negative");
  if (s.duration_s && !(*s.duration_s > 0)) invalid("duration_s", "must be positive");
  if (s.retry.max_attempts < 1) invalid("retry.max_attempts", "must be at least 1");
  if (!(s.retry.initial_timeout_ms > 0)) invalid("retry.initial_timeout_ms", "must be positive");
  if (!(s.retry.backoff >= 1)) invalid("retry.backoff", "must be at least 1");
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot read scenario " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace arm
