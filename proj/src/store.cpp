#include "arm/store.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "arm/error.hpp"

namespace arm {

using nlohmann::json;

std::optional<std::size_t> Relation::column_index(std::string_view column) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == column) return i;
  return std::nullopt;
}

std::size_t Relation::key_index() const {
  auto idx = column_index(primary_key);
  if (!idx) throw Error(ErrorCode::invalid_schema, "primary key '" + primary_key + "' is not a column");
  return *idx;
}

void validate(const Relation& relation) {
  if (!is_valid_identifier(relation.name))
    throw Error(ErrorCode::invalid_schema, "invalid relation name '" + relation.name + "'");
  if (relation.columns.empty())
    throw Error(ErrorCode::invalid_schema, "relation '" + relation.name + "' has no columns");
  std::set<std::string> names;
  for (const auto& c : relation.columns) {
    if (!is_valid_identifier(c.name))
      throw Error(ErrorCode::invalid_schema, "invalid column name '" + c.name + "'");
    if (!names.insert(c.name).second)
      throw Error(ErrorCode::invalid_schema, "duplicate column '" + c.name + "' in " + relation.name);
  }
  auto key = relation.column_index(relation.primary_key);
  if (!key) throw Error(ErrorCode::invalid_schema, "primary key '" + relation.primary_key + "' is not a column of " + relation.name);
  auto type = relation.columns[*key].type;
  if (type != ColumnType::int64 && type != ColumnType::text)
    throw Error(ErrorCode::invalid_schema, "primary key of " + relation.name + " must be int64 or text");
}

namespace {

std::size_t require_column(const Relation& rel, const std::string& column) {
  auto idx = rel.column_index(column);
  if (!idx) throw Error(ErrorCode::unknown_column, "unknown column '" + column + "' in " + rel.name);
  return *idx;
}

// Coerces a literal to the column's type. Int literals widen to float64.
Value coerce(const Relation& rel, std::size_t idx, const Value& v) {
  const auto& col = rel.columns[idx];
  if (v.is_null() || v.type() == col.type) return v;
  if (col.type == ColumnType::float64 && v.is_int()) return Value(static_cast<double>(v.as_int()));
  throw Error(ErrorCode::type_mismatch, "value " + render_literal(v) + " does not fit " +
                                            std::string(to_string(col.type)) + " column '" + col.name + "'");
}

void check_filter_types(const Relation& rel, const std::vector<Predicate>& filters) {
  for (const auto& p : filters) {
    auto idx = require_column(rel, p.column);
    const auto type = rel.columns[idx].type;
    const auto& lit = p.literal;
    if (lit.is_null() || lit.type() == type) continue;
    const bool numeric = (type == ColumnType::int64 || type == ColumnType::float64) &&
                         (lit.is_int() || lit.is_float());
    if (!numeric)
      throw Error(ErrorCode::type_mismatch, "cannot compare column '" + p.column + "' with " + render_literal(lit));
  }
}

bool predicate_holds(const Value& cell, CompareOp op, const Value& lit) {
  if (lit.is_null() || cell.is_null()) {
    const bool both = lit.is_null() && cell.is_null();
    if (op == CompareOp::eq) return both;
    if (op == CompareOp::ne) return !both;
    return false;
  }
  const int c = compare(cell, lit);
  switch (op) {
    case CompareOp::eq: return c == 0;
    case CompareOp::ne: return c != 0;
    case CompareOp::lt: return c < 0;
    case CompareOp::le: return c <= 0;
    case CompareOp::gt: return c > 0;
    case CompareOp::ge: return c >= 0;
  }
  return false;
}

json value_to_json(const Value& v) {
  if (v.is_null()) return nullptr;
  if (v.is_int()) return v.as_int();
  if (v.is_float()) return v.as_float();
  if (v.is_bool()) return v.as_bool();
  return v.as_text();
}

Value value_from_json(const json& j, ColumnType type) {
  if (j.is_null()) return Value::null();
  switch (type) {
    case ColumnType::int64:
      if (!j.is_number_integer()) break;
      return Value(j.get<std::int64_t>());
    case ColumnType::float64:
      if (!j.is_number()) break;
      return Value(j.get<double>());
    case ColumnType::text:
      if (!j.is_string()) break;
      return Value(j.get<std::string>());
    case ColumnType::boolean:
      if (!j.is_boolean()) break;
      return Value(j.get<bool>());
  }
  throw Error(ErrorCode::type_mismatch, "snapshot value " + j.dump() + " does not fit " + std::string(to_string(type)));
}

json relation_to_json(const RelationData& data) {
  json cols = json::array();
  for (const auto& c : data.schema.columns) cols.push_back({{"name", c.name}, {"type", to_string(c.type)}});
  json rows = json::array();
  for (const auto& [key, row] : data.rows) {
    json values = json::array();
    for (const auto& v : row.values) values.push_back(value_to_json(v));
    rows.push_back({{"version", row.version}, {"values", std::move(values)}});
  }
  return {{"name", data.schema.name},
          {"primary_key", data.schema.primary_key},
          {"columns", std::move(cols)},
          {"seq", data.seq},
          {"rows", std::move(rows)}};
}

RelationData relation_from_json(const json& j) {
  RelationData data;
  data.schema.name = j.at("name").get<std::string>();
  data.schema.primary_key = j.at("primary_key").get<std::string>();
  for (const auto& c : j.at("columns"))
    data.schema.columns.push_back({c.at("name").get<std::string>(),
                                   column_type_from_string(c.at("type").get<std::string>())});
  validate(data.schema);
  data.seq = j.at("seq").get<std::uint64_t>();
  const auto key = data.schema.key_index();
  for (const auto& r : j.at("rows")) {
    StoredRow row;
    row.version = r.at("version").get<std::uint64_t>();
    const auto& values = r.at("values");
    if (values.size() != data.schema.columns.size())
      throw Error(ErrorCode::invalid_schema, "row arity mismatch in " + data.schema.name);
    for (std::size_t i = 0; i < values.size(); ++i)
      row.values.push_back(value_from_json(values[i], data.schema.columns[i].type));
    Value pk = row.values[key];
    if (pk.is_null() || !data.rows.emplace(pk, std::move(row)).second)
      throw Error(ErrorCode::duplicate_key, "bad primary key in snapshot of " + data.schema.name);
  }
  return data;
}

}  // namespace

bool matches(const Relation& rel, const Row& row, const std::vector<Predicate>& filters) {
  for (const auto& p : filters) {
    auto idx = require_column(rel, p.column);
    if (!predicate_holds(row[idx], p.op, p.literal)) return false;
  }
  return true;
}

ResultSet select_rows(const RelationData& table, const QuerySpec& spec) {
  const auto& rel = table.schema;
  check_filter_types(rel, spec.filters);

  std::vector<std::size_t> proj;
  ResultSet result;
  if (spec.projection) {
    for (const auto& c : *spec.projection) {
      proj.push_back(require_column(rel, c));
      result.columns.push_back(c);
    }
  } else {
    for (std::size_t i = 0; i < rel.columns.size(); ++i) {
      proj.push_back(i);
      result.columns.push_back(rel.columns[i].name);
    }
  }
  std::vector<std::pair<std::size_t, bool>> keys;
  for (const auto& k : spec.sort_keys)
    keys.emplace_back(require_column(rel, k.column), k.direction == SortDirection::desc);

  // Rows come out of the map in primary-key order; stable sorting keeps that
  // as the tie-breaker.
  std::vector<const Row*> hits;
  for (const auto& [key, row] : table.rows)
    if (matches(rel, row.values, spec.filters)) hits.push_back(&row.values);
  std::stable_sort(hits.begin(), hits.end(), [&](const Row* a, const Row* b) {
    for (auto [idx, desc] : keys) {
      const int c = compare((*a)[idx], (*b)[idx]);
      if (c != 0) return desc ? c > 0 : c < 0;
    }
    return false;
  });
  if (spec.limit && hits.size() > *spec.limit) hits.resize(*spec.limit);

  for (const Row* r : hits) {
    Row out;
    out.reserve(proj.size());
    for (auto i : proj) out.push_back((*r)[i]);
    result.rows.push_back(std::move(out));
  }
  result.affected_count = result.rows.size();
  return result;
}

Store::Store(const std::vector<Relation>& schema) {
  for (const auto& rel : schema) {
    validate(rel);
    if (tables_.count(rel.name))
      throw Error(ErrorCode::duplicate_relation, "duplicate relation '" + rel.name + "'");
    tables_[rel.name].schema = rel;
  }
}

void Store::check_tx(std::optional<TransactionHandle> tx) const {
  if (tx && (!active_ || *active_ != tx->id))
    throw Error(ErrorCode::transaction_not_active, "transaction " + std::to_string(tx->id) + " is not active");
}

const RelationData& Store::visible_table(const std::string& name, bool in_tx) const {
  if (!in_tx && active_) {
    if (auto it = undo_.find(name); it != undo_.end()) return it->second;
  }
  auto it = tables_.find(name);
  if (it == tables_.end()) throw Error(ErrorCode::unknown_relation, "unknown relation '" + name + "'");
  return it->second;
}

RelationData& Store::mutable_table(const std::string& name, bool in_tx) {
  auto it = tables_.find(name);
  if (it == tables_.end()) throw Error(ErrorCode::unknown_relation, "unknown relation '" + name + "'");
  if (in_tx && !undo_.count(name)) undo_.emplace(name, it->second);
  return it->second;
}

ResultSet Store::execute(const RelationalCommand& cmd, std::optional<TransactionHandle> tx) {
  std::lock_guard lock(mutex_);
  check_tx(tx);
  const bool in_tx = tx.has_value();
  if (cmd.kind == CommandKind::select) return select_rows(visible_table(cmd.relation(), in_tx), cmd.spec);

  if (!in_tx && active_)
    throw Error(ErrorCode::transaction_active, "auto-commit mutation while transaction " +
                                                   std::to_string(*active_) + " is active");
  // Validate against the schema before touching the table so a failing
  // command leaves no trace (and no undo copy).
  const Relation& rel = visible_table(cmd.relation(), true).schema;
  const std::size_t key = rel.key_index();
  ResultSet result;

  switch (cmd.kind) {
    case CommandKind::insert: {
      Row row(rel.columns.size());
      for (const auto& a : cmd.values) {
        auto idx = require_column(rel, a.column);
        row[idx] = coerce(rel, idx, a.value);
      }
      if (row[key].is_null())
        throw Error(ErrorCode::type_mismatch, "primary key '" + rel.primary_key + "' must not be null");
      if (visible_table(cmd.relation(), true).rows.count(row[key]))
        throw Error(ErrorCode::duplicate_key, "duplicate primary key " + render_literal(row[key]) + " in " + rel.name);
      auto& table = mutable_table(cmd.relation(), in_tx);
      ++table.seq;
      Value pk = row[key];
      table.rows.emplace(std::move(pk), StoredRow{std::move(row), table.seq});
      result.affected_count = 1;
      break;
    }
    case CommandKind::update: {
      check_filter_types(rel, cmd.spec.filters);
      std::vector<std::pair<std::size_t, Value>> sets;
      for (const auto& a : cmd.values) {
        auto idx = require_column(rel, a.column);
        if (idx == key)
          throw Error(ErrorCode::invalid_command, "primary key '" + rel.primary_key + "' is immutable");
        sets.emplace_back(idx, coerce(rel, idx, a.value));
      }
      auto& table = mutable_table(cmd.relation(), in_tx);
      ++table.seq;
      for (auto& [pk, row] : table.rows) {
        if (!matches(rel, row.values, cmd.spec.filters)) continue;
        for (const auto& [idx, v] : sets) row.values[idx] = v;
        row.version = table.seq;
        ++result.affected_count;
      }
      break;
    }
    case CommandKind::remove: {
      check_filter_types(rel, cmd.spec.filters);
      auto& table = mutable_table(cmd.relation(), in_tx);
      ++table.seq;
      for (auto it = table.rows.begin(); it != table.rows.end();) {
        if (matches(rel, it->second.values, cmd.spec.filters)) {
          it = table.rows.erase(it);
          ++result.affected_count;
        } else {
          ++it;
        }
      }
      break;
    }
    case CommandKind::select: break;
  }
  return result;
}

TransactionHandle Store::begin() {
  std::lock_guard lock(mutex_);
  if (active_)
    throw Error(ErrorCode::transaction_active, "transaction " + std::to_string(*active_) + " is already active");
  const auto id = next_tx_++;
  transactions_[id] = TransactionState::active;
  active_ = id;
  undo_.clear();
  return TransactionHandle{id};
}

void Store::commit(TransactionHandle tx) {
  std::lock_guard lock(mutex_);
  check_tx(tx);
  transactions_[tx.id] = TransactionState::committed;
  active_.reset();
  undo_.clear();
}

void Store::abort(TransactionHandle tx) {
  std::lock_guard lock(mutex_);
  check_tx(tx);
  for (auto& [name, data] : undo_) tables_[name] = std::move(data);
  undo_.clear();
  transactions_[tx.id] = TransactionState::aborted;
  active_.reset();
}

TransactionState Store::state(TransactionHandle tx) const {
  std::lock_guard lock(mutex_);
  auto it = transactions_.find(tx.id);
  if (it == transactions_.end())
    throw Error(ErrorCode::transaction_not_active, "unknown transaction " + std::to_string(tx.id));
  return it->second;
}

std::optional<TransactionHandle> Store::active_transaction() const {
  std::lock_guard lock(mutex_);
  if (!active_) return std::nullopt;
  return TransactionHandle{*active_};
}

void Store::create_relation(const Relation& relation) {
  std::lock_guard lock(mutex_);
  validate(relation);
  if (active_) throw Error(ErrorCode::transaction_active, "schema change inside a transaction");
  if (tables_.count(relation.name))
    throw Error(ErrorCode::duplicate_relation, "duplicate relation '" + relation.name + "'");
  tables_[relation.name].schema = relation;
}

void Store::drop_relation(const std::string& name) {
  std::lock_guard lock(mutex_);
  if (active_) throw Error(ErrorCode::transaction_active, "schema change inside a transaction");
  if (!tables_.erase(name)) throw Error(ErrorCode::unknown_relation, "unknown relation '" + name + "'");
}

bool Store::has_relation(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return tables_.count(name) > 0;
}

std::vector<std::string> Store::relation_names() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, data] : tables_) out.push_back(name);
  return out;
}

Relation Store::schema(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return visible_table(name, false).schema;
}

RelationData Store::relation_data(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return visible_table(name, false);
}

void Store::install(RelationData data) {
  std::lock_guard lock(mutex_);
  validate(data.schema);
  if (active_) throw Error(ErrorCode::transaction_active, "install inside a transaction");
  auto name = data.schema.name;
  tables_[name] = std::move(data);
}

std::uint64_t Store::sequence(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return visible_table(name, false).seq;
}

std::size_t Store::row_count(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return visible_table(name, false).rows.size();
}

std::uint64_t Store::max_version(const std::string& name, const std::vector<Predicate>& filters) const {
  std::lock_guard lock(mutex_);
  const auto& table = visible_table(name, false);
  check_filter_types(table.schema, filters);
  std::uint64_t out = 0;
  for (const auto& [key, row] : table.rows)
    if (matches(table.schema, row.values, filters)) out = std::max(out, row.version);
  return out;
}

std::string Store::dump() const {
  std::lock_guard lock(mutex_);
  json rels = json::array();
  for (const auto& [name, data] : tables_) rels.push_back(relation_to_json(data));
  json doc = {{"format", "arm-store"}, {"version", 1}, {"relations", std::move(rels)}};
  return doc.dump(1);
}

void Store::save(const std::filesystem::path& path) const {
  const auto text = dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << text << '\n';
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

std::vector<RelationData> Store::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::syntax_error, std::string("snapshot parse error: ") + e.what(), e.byte);
  }
  if (doc.value("format", "") != "arm-store" || doc.value("version", 0) != 1)
    throw Error(ErrorCode::unsupported_version, "not an arm-store version 1 snapshot");
  std::vector<RelationData> out;
  for (const auto& r : doc.at("relations")) out.push_back(relation_from_json(r));
  return out;
}

void Store::restore(const std::vector<RelationData>& relations) {
  std::lock_guard lock(mutex_);
  if (active_) throw Error(ErrorCode::transaction_active, "restore inside a transaction");
  Tables fresh;
  for (const auto& data : relations) {
    if (!fresh.emplace(data.schema.name, data).second)
      throw Error(ErrorCode::duplicate_relation, "duplicate relation '" + data.schema.name + "'");
  }
  tables_ = std::move(fresh);
}

}  // namespace arm
