#include "arm/entity.hpp"

#include <algorithm>

#include "arm/error.hpp"

namespace arm {

const Value& Entity::get(const std::string& column) const {
  auto it = fields_.find(column);
  if (it == fields_.end()) {
    if (std::find(columns_.begin(), columns_.end(), column) == columns_.end())
      throw Error(ErrorCode::unknown_column, "unknown column '" + column + "' in " + relation_);
    static const Value null;
    return null;
  }
  return it->second;
}

void Entity::set(const std::string& column, Value value) {
  if (std::find(columns_.begin(), columns_.end(), column) == columns_.end())
    throw Error(ErrorCode::unknown_column, "unknown column '" + column + "' in " + relation_);
  if (column == key_column_) {
    if (loaded_) throw Error(ErrorCode::invalid_argument, "key of a loaded entity is immutable");
    key_ = value;
  }
  fields_[column] = std::move(value);
}

std::set<std::string> Entity::dirty() const {
  std::set<std::string> out;
  for (const auto& [column, value] : fields_) {
    if (!loaded_) {
      out.insert(column);
      continue;
    }
    auto it = loaded_->find(column);
    if (it == loaded_->end() || !(it->second == value)) out.insert(column);
  }
  return out;
}

EntityManager::EntityManager(Notifier& notifier, std::vector<Relation> model) : notifier_(notifier) {
  for (auto& r : model) {
    validate(r);
    auto name = r.name;
    if (!model_.emplace(name, std::move(r)).second)
      throw Error(ErrorCode::duplicate_relation, "relation '" + name + "' declared twice");
  }
}

const Relation& EntityManager::relation(const std::string& name) const {
  auto it = model_.find(name);
  if (it == model_.end()) throw Error(ErrorCode::unknown_relation, "unknown relation '" + name + "'");
  return it->second;
}

Entity EntityManager::create(const std::string& name, const std::map<std::string, Value>& fields) const {
  const auto& rel = relation(name);
  Entity e;
  e.relation_ = name;
  e.key_column_ = rel.primary_key;
  for (const auto& c : rel.columns) e.columns_.push_back(c.name);
  for (const auto& [column, value] : fields) e.set(column, value);
  return e;
}

Entity EntityManager::load(const std::string& name, const Value& key) {
  const auto& rel = relation(name);
  auto cmd = build(QuerySpec::from(name).where(rel.primary_key, CompareOp::eq, key), CommandKind::select);
  auto reply = notifier_.send_command(cmd);
  const auto& rs = *reply.result;
  if (rs.rows.empty()) throw Error(ErrorCode::not_found, name + " has no row with key " + render_literal(key));
  Entity e = create(name, {});
  for (std::size_t i = 0; i < rs.columns.size(); ++i) e.fields_[rs.columns[i]] = rs.rows[0][i];
  e.key_ = key;
  e.loaded_ = e.fields_;
  e.origin_version_ = reply.outcome.relation_seq;
  return e;
}

std::optional<RelationalCommand> EntityManager::pending_command(const Entity& e) const {
  const auto& rel = relation(e.relation_);
  const auto dirty = e.dirty();
  if (dirty.empty()) return std::nullopt;
  std::vector<Assignment> values;
  for (const auto& c : rel.columns)
    if (dirty.count(c.name) && !(e.loaded_ && c.name == rel.primary_key)) values.push_back({c.name, e.fields_.at(c.name)});
  if (e.is_new()) return build(QuerySpec::from(rel.name), CommandKind::insert, std::move(values));
  return build(QuerySpec::from(rel.name).where(rel.primary_key, CompareOp::eq, e.key_), CommandKind::update,
               std::move(values));
}

SaveResult EntityManager::save(Entity& e) {
  auto cmd = pending_command(e);
  if (!cmd) return {};
  std::optional<std::uint64_t> expected;
  if (!e.is_new()) expected = e.origin_version_;
  auto reply = notifier_.send_command(*cmd, expected);
  e.loaded_ = e.fields_;
  e.origin_version_ = reply.outcome.relation_seq;
  return {true, reply.outcome.affected, reply.outcome.relation_seq};
}

SaveResult EntityManager::remove(const Entity& e) {
  if (e.is_new()) throw Error(ErrorCode::invalid_argument, "cannot delete an entity that was never loaded");
  const auto& rel = relation(e.relation_);
  auto cmd = build(QuerySpec::from(rel.name).where(rel.primary_key, CompareOp::eq, e.key_), CommandKind::remove);
  auto reply = notifier_.send_command(cmd);
  return {true, reply.outcome.affected, reply.outcome.relation_seq};
}

void EntityManager::check(const EntityLink& link) const {
  const auto& source = relation(link.source);
  const auto& target = relation(link.target);
  auto fk = source.column_index(link.column);
  if (!fk) throw Error(ErrorCode::unknown_column, "unknown column '" + link.column + "' in " + link.source);
  if (source.columns[*fk].type != target.columns[target.key_index()].type)
    throw Error(ErrorCode::invalid_schema, "link " + link.source + "." + link.column + " does not match the key type of " +
                                               link.target);
}

Entity EntityManager::follow(const EntityLink& link, const Entity& e) {
  check(link);
  if (e.relation_ != link.source)
    throw Error(ErrorCode::invalid_argument, "entity of " + e.relation_ + " cannot follow a link from " + link.source);
  const auto& fk = e.get(link.column);
  if (fk.is_null()) throw Error(ErrorCode::null_link, link.source + "." + link.column + " is null");
  return load(link.target, fk);
}

ResultSet EntityManager::open_view(const EntityView& view) {
  if (!view.link) {
    relation(view.spec.relation);
    return *notifier_.send_command(build(view.spec, CommandKind::select)).result;
  }
  const auto& link = *view.link;
  check(link);
  if (view.spec.relation != link.source)
    throw Error(ErrorCode::invalid_argument, "join view must query the link source " + link.source);
  const auto& source = relation(link.source);
  const auto& target = relation(link.target);

  QuerySpec left = QuerySpec::from(source.name);
  left.filters = view.spec.filters;
  left.order_by(source.primary_key);
  QuerySpec right = QuerySpec::from(target.name);
  right.filters = view.target_filters;
  right.order_by(target.primary_key);
  auto lrs = *notifier_.send_command(build(left, CommandKind::select)).result;
  auto rrs = *notifier_.send_command(build(right, CommandKind::select)).result;

  std::map<Value, const Row*, ValueLess> by_key;
  const auto tk = target.key_index();
  for (const auto& row : rrs.rows) by_key.emplace(row[tk], &row);

  ResultSet joined;
  for (const auto& c : source.columns) joined.columns.push_back(source.name + "." + c.name);
  for (const auto& c : target.columns) joined.columns.push_back(target.name + "." + c.name);
  const auto fk = *source.column_index(link.column);
  for (const auto& row : lrs.rows) {
    if (row[fk].is_null()) continue;
    auto it = by_key.find(row[fk]);
    if (it == by_key.end() || compare(it->first, row[fk]) != 0) continue;
    Row out = row;
    out.insert(out.end(), it->second->begin(), it->second->end());
    joined.rows.push_back(std::move(out));
  }

  if (view.spec.projection) {
    std::vector<std::size_t> idx;
    for (const auto& name : *view.spec.projection) {
      auto pos = std::find(joined.columns.begin(), joined.columns.end(), name);
      if (pos == joined.columns.end()) throw Error(ErrorCode::unknown_column, "unknown view column '" + name + "'");
      idx.push_back(static_cast<std::size_t>(pos - joined.columns.begin()));
    }
    ResultSet projected;
    projected.columns = *view.spec.projection;
    for (const auto& row : joined.rows) {
      Row out;
      for (auto i : idx) out.push_back(row[i]);
      projected.rows.push_back(std::move(out));
    }
    joined = std::move(projected);
  }
  if (view.spec.limit && joined.rows.size() > *view.spec.limit) joined.rows.resize(*view.spec.limit);
  joined.affected_count = joined.rows.size();
  return joined;
}

}  // namespace arm
