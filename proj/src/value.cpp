#include "arm/value.hpp"

#include <charconv>
#include <cmath>

#include "arm/error.hpp"

namespace arm {

std::string_view to_string(ColumnType type) {
  switch (type) {
    case ColumnType::int64: return "int64";
    case ColumnType::float64: return "float64";
    case ColumnType::text: return "text";
    case ColumnType::boolean: return "bool";
  }
  return "?";
}

ColumnType column_type_from_string(std::string_view name) {
  if (name == "int64") return ColumnType::int64;
  if (name == "float64") return ColumnType::float64;
  if (name == "text") return ColumnType::text;
  if (name == "bool") return ColumnType::boolean;
  throw Error(ErrorCode::invalid_schema, "unknown column type '" + std::string(name) + "'");
}

ColumnType Value::type() const {
  switch (data_.index()) {
    case 1: return ColumnType::int64;
    case 2: return ColumnType::float64;
    case 3: return ColumnType::text;
    case 4: return ColumnType::boolean;
    default: throw Error(ErrorCode::type_mismatch, "null value has no type");
  }
}

bool Value::matches(ColumnType column) const {
  return is_null() || type() == column;
}

namespace {

int rank(const Value& v) {
  if (v.is_null()) return 0;
  if (v.is_int() || v.is_float()) return 1;
  if (v.is_text()) return 2;
  return 3;
}

template <typename T>
int three_way(const T& a, const T& b) {
  return a < b ? -1 : (b < a ? 1 : 0);
}

}  // namespace

int compare(const Value& a, const Value& b) {
  const int ra = rank(a);
  const int rb = rank(b);
  if (ra != rb) return ra < rb ? -1 : 1;
  switch (ra) {
    case 0: return 0;
    case 1:
      if (a.is_int() && b.is_int()) return three_way(a.as_int(), b.as_int());
      return three_way(a.is_int() ? static_cast<double>(a.as_int()) : a.as_float(),
                       b.is_int() ? static_cast<double>(b.as_int()) : b.as_float());
    case 2: return a.as_text().compare(b.as_text()) < 0 ? -1 : (a.as_text() == b.as_text() ? 0 : 1);
    default: return three_way(a.as_bool(), b.as_bool());
  }
}

std::string format_float(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  const auto exp = s.find('e');
  const auto mantissa_end = exp == std::string::npos ? s.size() : exp;
  if (s.find('.') == std::string::npos) s.insert(mantissa_end, ".0");
  return s;
}

std::string render_literal(const Value& v) {
  if (v.is_null()) return "NULL";
  if (v.is_int()) return std::to_string(v.as_int());
  if (v.is_float()) return format_float(v.as_float());
  if (v.is_bool()) return v.as_bool() ? "TRUE" : "FALSE";
  std::string out = "'";
  for (char c : v.as_text()) {
    if (c == '\'') out += '\'';
    out += c;
  }
  out += '\'';
  return out;
}

Value parse_literal(std::string_view text) {
  auto fail = [&](std::size_t at) -> Value {
    throw Error(ErrorCode::syntax_error, "malformed literal '" + std::string(text) + "'", at);
  };
  if (text.empty()) return fail(0);
  if (text == "NULL") return Value::null();
  if (text == "TRUE") return Value(true);
  if (text == "FALSE") return Value(false);
  if (text.front() == '\'') {
    std::string out;
    std::size_t i = 1;
    while (i < text.size()) {
      if (text[i] == '\'') {
        if (i + 1 < text.size() && text[i + 1] == '\'') {
          out += '\'';
          i += 2;
          continue;
        }
        if (i + 1 != text.size()) return fail(i + 1);
        return Value(std::move(out));
      }
      out += text[i++];
    }
    return fail(text.size());
  }
  const bool is_float = text.find('.') != std::string_view::npos;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (is_float) {
    double d = 0;
    auto res = std::from_chars(first, last, d);
    if (res.ec != std::errc() || res.ptr != last || !std::isfinite(d)) return fail(0);
    return Value(d);
  }
  if (text.find_first_of("eE") != std::string_view::npos) return fail(0);
  std::int64_t n = 0;
  auto res = std::from_chars(first, last, n);
  if (res.ec != std::errc() || res.ptr != last) return fail(0);
  return Value(n);
}

}  // namespace arm
