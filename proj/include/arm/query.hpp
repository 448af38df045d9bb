#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "arm/value.hpp"

namespace arm {

enum class CommandKind : std::uint8_t { select, insert, update, remove };
enum class CompareOp : std::uint8_t { eq, ne, lt, le, gt, ge };
enum class SortDirection : std::uint8_t { asc, desc };

std::string_view to_string(CommandKind kind);
std::string_view to_string(CompareOp op);

struct Predicate {
  std::string column;
  CompareOp op = CompareOp::eq;
  Value literal;

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

struct SortKey {
  std::string column;
  SortDirection direction = SortDirection::asc;

  friend bool operator==(const SortKey&, const SortKey&) = default;
};

struct Assignment {
  std::string column;
  Value value;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

// Structured query description. An empty `projection` means all columns.
struct QuerySpec {
  std::string relation;
  std::optional<std::vector<std::string>> projection;
  std::vector<Predicate> filters;
  std::vector<SortKey> sort_keys;
  std::optional<std::uint64_t> limit;

  static QuerySpec from(std::string relation) {
    QuerySpec spec;
    spec.relation = std::move(relation);
    return spec;
  }
  QuerySpec& columns(std::vector<std::string> cols) {
    projection = std::move(cols);
    return *this;
  }
  QuerySpec& where(std::string column, CompareOp op, Value literal) {
    filters.push_back({std::move(column), op, std::move(literal)});
    return *this;
  }
  QuerySpec& order_by(std::string column, SortDirection dir = SortDirection::asc) {
    sort_keys.push_back({std::move(column), dir});
    return *this;
  }
  QuerySpec& take(std::uint64_t n) {
    limit = n;
    return *this;
  }

  friend bool operator==(const QuerySpec&, const QuerySpec&) = default;
};

struct RelationalCommand {
  CommandKind kind = CommandKind::select;
  QuerySpec spec;
  std::vector<Assignment> values;

  const std::string& relation() const { return spec.relation; }
  bool is_mutation() const { return kind != CommandKind::select; }

  friend bool operator==(const RelationalCommand&, const RelationalCommand&) = default;
};

// Validates the kind/spec/values combination and returns a normalized
// command. Ordering, limit and projection only survive on selects.
RelationalCommand build(QuerySpec spec, CommandKind kind, std::vector<Assignment> values = {});

// Canonical text form:
//   SELECT <cols|*> FROM <rel> [WHERE p AND ...] [ORDER BY c ASC|DESC, ...] [LIMIT n]
//   INSERT INTO <rel> (c1, c2) VALUES (v1, v2)
//   UPDATE <rel> SET c1 = v1, c2 = v2 [WHERE ...]
//   DELETE FROM <rel> [WHERE ...]
std::string render(const RelationalCommand& cmd);

// Inverse of render. Syntax errors carry the byte offset of the bad token.
RelationalCommand parse(std::string_view text);

bool is_valid_identifier(std::string_view name);

}  // namespace arm
