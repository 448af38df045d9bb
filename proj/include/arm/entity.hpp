#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "arm/notifier.hpp"

namespace arm {

// A row materialized as an object. Changes are detected at save time by
// comparing fields with the values captured at load.
class Entity {
 public:
  const std::string& relation() const { return relation_; }
  const Value& key() const { return key_; }
  const std::map<std::string, Value>& fields() const { return fields_; }
  std::uint64_t origin_version() const { return origin_version_; }
  bool is_new() const { return !loaded_; }

  const Value& get(const std::string& column) const;
  // Throws unknown_column for columns outside the relation and
  // invalid_argument for the key of a loaded entity.
  void set(const std::string& column, Value value);
  // Changed columns; every set field for a new entity.
  std::set<std::string> dirty() const;

 private:
  friend class EntityManager;

  std::string relation_;
  std::string key_column_;
  Value key_;
  std::map<std::string, Value> fields_;
  std::optional<std::map<std::string, Value>> loaded_;
  std::uint64_t origin_version_ = 0;
  std::vector<std::string> columns_;
};

// Foreign key `source.column` referencing the primary key of `target`.
struct EntityLink {
  std::string source;
  std::string column;
  std::string target;
};

// Read-only query over one relation, or over the inner join of a link.
// Join columns are qualified as `relation.column`; `spec` filters the source
// relation and `target_filters` the target.
struct EntityView {
  std::string name;
  QuerySpec spec;
  std::optional<EntityLink> link;
  std::vector<Predicate> target_filters;
};

struct SaveResult {
  bool sent = false;  // false when nothing was dirty
  std::uint64_t affected = 0;
  std::uint64_t relation_seq = 0;
};

class EntityManager {
 public:
  EntityManager(Notifier& notifier, std::vector<Relation> model);

  const Relation& relation(const std::string& name) const;

  Entity create(const std::string& relation, const std::map<std::string, Value>& fields) const;
  Entity load(const std::string& relation, const Value& key);
  SaveResult save(Entity& entity);
  SaveResult remove(const Entity& entity);
  Entity follow(const EntityLink& link, const Entity& entity);
  ResultSet open_view(const EntityView& view);

  // Command that save() would send, or nullopt when nothing changed.
  std::optional<RelationalCommand> pending_command(const Entity& entity) const;

  // Throws invalid_schema when the link's column types disagree.
  void check(const EntityLink& link) const;

 private:
  Notifier& notifier_;
  std::map<std::string, Relation> model_;
};

}  // namespace arm
