#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

namespace arm {

enum class ColumnType : std::uint8_t { int64, float64, text, boolean };

std::string_view to_string(ColumnType type);
ColumnType column_type_from_string(std::string_view name);

// Nullable typed scalar stored in rows, literals and object ids.
class Value {
 public:
  using Storage = std::variant<std::monostate, std::int64_t, double, std::string, bool>;

  Value() = default;
  Value(std::int64_t v) : data_(v) {}
  Value(int v) : data_(static_cast<std::int64_t>(v)) {}
  Value(double v) : data_(v) {}
  Value(std::string v) : data_(std::move(v)) {}
  Value(const char* v) : data_(std::string(v)) {}
  Value(bool v) : data_(v) {}

  static Value null() { return {}; }

  bool is_null() const { return std::holds_alternative<std::monostate>(data_); }
  bool is_int() const { return std::holds_alternative<std::int64_t>(data_); }
  bool is_float() const { return std::holds_alternative<double>(data_); }
  bool is_text() const { return std::holds_alternative<std::string>(data_); }
  bool is_bool() const { return std::holds_alternative<bool>(data_); }

  std::int64_t as_int() const { return std::get<std::int64_t>(data_); }
  double as_float() const { return std::get<double>(data_); }
  const std::string& as_text() const { return std::get<std::string>(data_); }
  bool as_bool() const { return std::get<bool>(data_); }

  // Type of a non-null value.
  ColumnType type() const;
  bool matches(ColumnType column) const;

  const Storage& storage() const { return data_; }

  friend bool operator==(const Value&, const Value&) = default;

 private:
  Storage data_;
};

// Total order used for sorting and keys: null first, numbers compare
// across int64/float64, then text, then bool.
int compare(const Value& a, const Value& b);

struct ValueLess {
  bool operator()(const Value& a, const Value& b) const { return compare(a, b) < 0; }
};

// Canonical literal text: decimal ints, floats with a mandatory '.',
// single-quoted text with '' escaping, NULL, TRUE, FALSE.
std::string render_literal(const Value& v);

// Parses exactly one canonical literal occupying all of `text`.
Value parse_literal(std::string_view text);

// Shortest decimal that round-trips `v`, always containing a '.'.
std::string format_float(double v);

}  // namespace arm
