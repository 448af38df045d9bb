#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "arm/query.hpp"
#include "arm/value.hpp"

namespace arm {

struct Column {
  std::string name;
  ColumnType type = ColumnType::int64;

  friend bool operator==(const Column&, const Column&) = default;
};

struct Relation {
  std::string name;
  std::vector<Column> columns;
  std::string primary_key;

  std::optional<std::size_t> column_index(std::string_view column) const;
  std::size_t key_index() const;

  friend bool operator==(const Relation&, const Relation&) = default;
};

// Throws invalid_schema when the relation breaks its invariants.
void validate(const Relation& relation);

using Row = std::vector<Value>;

struct ResultSet {
  std::vector<std::string> columns;
  std::vector<Row> rows;
  std::uint64_t affected_count = 0;

  friend bool operator==(const ResultSet&, const ResultSet&) = default;
};

enum class TransactionState : std::uint8_t { active, committed, aborted };

struct TransactionHandle {
  std::uint64_t id = 0;

  friend bool operator==(const TransactionHandle&, const TransactionHandle&) = default;
};

// Row plus the relation sequence number of its last write.
struct StoredRow {
  Row values;
  std::uint64_t version = 0;

  friend bool operator==(const StoredRow&, const StoredRow&) = default;
};

// Complete contents of one relation, keyed by primary key.
struct RelationData {
  Relation schema;
  std::uint64_t seq = 0;
  std::map<Value, StoredRow, ValueLess> rows;

  friend bool operator==(const RelationData&, const RelationData&) = default;
};

// In-memory single-writer relational store. All public operations are
// serialized on an internal mutex. At most one transaction is active at a
// time; auto-commit mutations are rejected while it is open and auto-commit
// selects observe the pre-transaction state.
class Store {
 public:
  explicit Store(const std::vector<Relation>& schema = {});

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  ResultSet execute(const RelationalCommand& cmd,
                    std::optional<TransactionHandle> tx = std::nullopt);

  TransactionHandle begin();
  void commit(TransactionHandle tx);
  void abort(TransactionHandle tx);
  TransactionState state(TransactionHandle tx) const;
  std::optional<TransactionHandle> active_transaction() const;

  // Schema management used by replication and migration.
  void create_relation(const Relation& relation);
  void drop_relation(const std::string& name);
  bool has_relation(const std::string& name) const;
  std::vector<std::string> relation_names() const;
  Relation schema(const std::string& name) const;

  // Committed state of one relation, and wholesale replacement of it.
  RelationData relation_data(const std::string& name) const;
  void install(RelationData data);

  // Sequence number of the last successful mutation on `name`.
  std::uint64_t sequence(const std::string& name) const;
  std::size_t row_count(const std::string& name) const;
  // Highest row version among rows the command's filters match.
  std::uint64_t max_version(const std::string& name, const std::vector<Predicate>& filters) const;

  // Canonical serialization of the whole committed state.
  std::string dump() const;
  void save(const std::filesystem::path& path) const;
  static std::vector<RelationData> load_file(const std::filesystem::path& path);
  void restore(const std::vector<RelationData>& relations);

 private:
  using Tables = std::map<std::string, RelationData>;

  RelationData& mutable_table(const std::string& name, bool in_tx);
  const RelationData& visible_table(const std::string& name, bool in_tx) const;
  void check_tx(std::optional<TransactionHandle> tx) const;

  mutable std::mutex mutex_;
  Tables tables_;
  std::uint64_t next_tx_ = 1;
  std::map<std::uint64_t, TransactionState> transactions_;
  std::optional<std::uint64_t> active_;
  // Pre-transaction copies of the relations the active transaction touched.
  Tables undo_;
};

// Stateless helpers shared by the store and the entity layer.
bool matches(const Relation& rel, const Row& row, const std::vector<Predicate>& filters);
ResultSet select_rows(const RelationData& table, const QuerySpec& spec);

}  // namespace arm
