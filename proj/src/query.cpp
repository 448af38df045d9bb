#include "arm/query.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <set>

#include "arm/error.hpp"

namespace arm {

std::string_view to_string(CommandKind kind) {
  switch (kind) {
    case CommandKind::select: return "select";
    case CommandKind::insert: return "insert";
    case CommandKind::update: return "update";
    case CommandKind::remove: return "delete";
  }
  return "?";
}

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::eq: return "=";
    case CompareOp::ne: return "!=";
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
  }
  return "?";
}

namespace {

constexpr std::array<std::string_view, 18> kKeywords = {
    "SELECT", "FROM", "WHERE",  "AND",    "ORDER", "BY",  "ASC",  "DESC", "LIMIT",
    "INSERT", "INTO", "VALUES", "UPDATE", "SET",   "DELETE", "NULL", "TRUE", "FALSE"};

bool is_keyword(std::string_view word) {
  for (auto k : kKeywords)
    if (k == word) return true;
  return false;
}

bool ident_start(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
bool digit(char c) { return c >= '0' && c <= '9'; }

void require_identifier(const std::string& name, std::string_view what) {
  if (!is_valid_identifier(name))
    throw Error(ErrorCode::invalid_command, "invalid " + std::string(what) + " identifier '" + name + "'");
}

void require_literal(const Value& v) {
  if (v.is_float() && !std::isfinite(v.as_float()))
    throw Error(ErrorCode::invalid_command, "non-finite float literal");
}

}  // namespace

bool is_valid_identifier(std::string_view name) {
  if (name.empty() || !ident_start(name.front())) return false;
  for (char c : name)
    if (!ident_char(c)) return false;
  return !is_keyword(name);
}

RelationalCommand build(QuerySpec spec, CommandKind kind, std::vector<Assignment> values) {
  require_identifier(spec.relation, "relation");
  for (const auto& p : spec.filters) {
    require_identifier(p.column, "column");
    require_literal(p.literal);
  }
  std::set<std::string> seen;
  for (const auto& a : values) {
    require_identifier(a.column, "column");
    require_literal(a.value);
    if (!seen.insert(a.column).second)
      throw Error(ErrorCode::invalid_command, "column '" + a.column + "' assigned twice");
  }

  switch (kind) {
    case CommandKind::select:
      if (!values.empty()) throw Error(ErrorCode::invalid_command, "select takes no values");
      if (spec.projection) {
        if (spec.projection->empty())
          throw Error(ErrorCode::invalid_command, "empty projection");
        for (const auto& c : *spec.projection) require_identifier(c, "column");
      }
      for (const auto& k : spec.sort_keys) require_identifier(k.column, "column");
      break;
    case CommandKind::insert:
      if (values.empty()) throw Error(ErrorCode::invalid_command, "insert requires values");
      if (!spec.filters.empty()) throw Error(ErrorCode::invalid_command, "insert cannot have filters");
      break;
    case CommandKind::update:
      if (values.empty()) throw Error(ErrorCode::invalid_command, "update requires values");
      break;
    case CommandKind::remove:
      if (!values.empty()) throw Error(ErrorCode::invalid_command, "delete takes no values");
      break;
  }
  if (kind != CommandKind::select) {
    spec.projection.reset();
    spec.sort_keys.clear();
    spec.limit.reset();
  }
  return RelationalCommand{kind, std::move(spec), std::move(values)};
}

namespace {

void render_where(std::string& out, const std::vector<Predicate>& filters) {
  if (filters.empty()) return;
  out += " WHERE ";
  for (std::size_t i = 0; i < filters.size(); ++i) {
    if (i) out += " AND ";
    out += filters[i].column;
    out += ' ';
    out += to_string(filters[i].op);
    out += ' ';
    out += render_literal(filters[i].literal);
  }
}

}  // namespace

std::string render(const RelationalCommand& cmd) {
  const auto& spec = cmd.spec;
  std::string out;
  switch (cmd.kind) {
    case CommandKind::select: {
      out = "SELECT ";
      if (!spec.projection) {
        out += '*';
      } else {
        for (std::size_t i = 0; i < spec.projection->size(); ++i) {
          if (i) out += ", ";
          out += (*spec.projection)[i];
        }
      }
      out += " FROM " + spec.relation;
      render_where(out, spec.filters);
      if (!spec.sort_keys.empty()) {
        out += " ORDER BY ";
        for (std::size_t i = 0; i < spec.sort_keys.size(); ++i) {
          if (i) out += ", ";
          out += spec.sort_keys[i].column;
          out += spec.sort_keys[i].direction == SortDirection::asc ? " ASC" : " DESC";
        }
      }
      if (spec.limit) out += " LIMIT " + std::to_string(*spec.limit);
      break;
    }
    case CommandKind::insert: {
      out = "INSERT INTO " + spec.relation + " (";
      for (std::size_t i = 0; i < cmd.values.size(); ++i) {
        if (i) out += ", ";
        out += cmd.values[i].column;
      }
      out += ") VALUES (";
      for (std::size_t i = 0; i < cmd.values.size(); ++i) {
        if (i) out += ", ";
        out += render_literal(cmd.values[i].value);
      }
      out += ')';
      break;
    }
    case CommandKind::update: {
      out = "UPDATE " + spec.relation + " SET ";
      for (std::size_t i = 0; i < cmd.values.size(); ++i) {
        if (i) out += ", ";
        out += cmd.values[i].column + " = " + render_literal(cmd.values[i].value);
      }
      render_where(out, spec.filters);
      break;
    }
    case CommandKind::remove:
      out = "DELETE FROM " + spec.relation;
      render_where(out, spec.filters);
      break;
  }
  return out;
}

namespace {

enum class Tok { word, number, string, symbol, end };

struct Token {
  Tok kind;
  std::string_view text;
  std::size_t offset;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) { tokenize(); }

  RelationalCommand parse_command() {
    const Token& head = peek();
    RelationalCommand cmd;
    if (is_word(head, "SELECT")) {
      cmd = parse_select();
    } else if (is_word(head, "INSERT")) {
      cmd = parse_insert();
    } else if (is_word(head, "UPDATE")) {
      cmd = parse_update();
    } else if (is_word(head, "DELETE")) {
      cmd = parse_delete();
    } else {
      fail(head, "expected SELECT, INSERT, UPDATE or DELETE");
    }
    if (peek().kind != Tok::end) fail(peek(), "unexpected trailing input");
    return cmd;
  }

 private:
  [[noreturn]] void fail(const Token& at, const std::string& what) const {
    throw Error(ErrorCode::syntax_error,
                what + " at offset " + std::to_string(at.offset), at.offset);
  }

  static bool is_word(const Token& t, std::string_view w) { return t.kind == Tok::word && t.text == w; }
  static bool is_symbol(const Token& t, std::string_view s) { return t.kind == Tok::symbol && t.text == s; }

  const Token& peek() const { return tokens_[pos_]; }
  const Token& next() {
    const Token& t = tokens_[pos_];
    if (t.kind != Tok::end) ++pos_;
    return t;
  }

  void expect_word(std::string_view w) {
    const Token& t = next();
    if (!is_word(t, w)) fail(t, "expected " + std::string(w));
  }
  void expect_symbol(std::string_view s) {
    const Token& t = next();
    if (!is_symbol(t, s)) fail(t, "expected '" + std::string(s) + "'");
  }
  bool accept_word(std::string_view w) {
    if (is_word(peek(), w)) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool accept_symbol(std::string_view s) {
    if (is_symbol(peek(), s)) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string identifier() {
    const Token& t = next();
    if (t.kind != Tok::word || is_keyword(t.text)) fail(t, "expected identifier");
    return std::string(t.text);
  }

  Value literal() {
    const Token& t = next();
    if (t.kind == Tok::number || t.kind == Tok::string ||
        (t.kind == Tok::word && (t.text == "NULL" || t.text == "TRUE" || t.text == "FALSE"))) {
      try {
        return parse_literal(t.text);
      } catch (const Error&) {
        fail(t, "malformed literal");
      }
    }
    fail(t, "expected literal");
  }

  std::vector<Predicate> where_clause() {
    std::vector<Predicate> out;
    if (!accept_word("WHERE")) return out;
    do {
      Predicate p;
      p.column = identifier();
      const Token& op = next();
      if (op.kind != Tok::symbol) fail(op, "expected comparison operator");
      if (op.text == "=") p.op = CompareOp::eq;
      else if (op.text == "!=") p.op = CompareOp::ne;
      else if (op.text == "<") p.op = CompareOp::lt;
      else if (op.text == "<=") p.op = CompareOp::le;
      else if (op.text == ">") p.op = CompareOp::gt;
      else if (op.text == ">=") p.op = CompareOp::ge;
      else fail(op, "expected comparison operator");
      p.literal = literal();
      out.push_back(std::move(p));
    } while (accept_word("AND"));
    return out;
  }

  RelationalCommand finish(QuerySpec spec, CommandKind kind, std::vector<Assignment> values,
                           const Token& head) {
    try {
      return build(std::move(spec), kind, std::move(values));
    } catch (const Error& e) {
      fail(head, e.what());
    }
  }

  RelationalCommand parse_select() {
    const Token head = next();
    QuerySpec spec;
    if (!accept_symbol("*")) {
      std::vector<std::string> cols;
      do {
        cols.push_back(identifier());
      } while (accept_symbol(","));
      spec.projection = std::move(cols);
    }
    expect_word("FROM");
    spec.relation = identifier();
    spec.filters = where_clause();
    if (accept_word("ORDER")) {
      expect_word("BY");
      do {
        SortKey key;
        key.column = identifier();
        const Token& dir = next();
        if (is_word(dir, "ASC")) key.direction = SortDirection::asc;
        else if (is_word(dir, "DESC")) key.direction = SortDirection::desc;
        else fail(dir, "expected ASC or DESC");
        spec.sort_keys.push_back(std::move(key));
      } while (accept_symbol(","));
    }
    if (accept_word("LIMIT")) {
      const Token& n = next();
      std::uint64_t limit = 0;
      auto res = std::from_chars(n.text.data(), n.text.data() + n.text.size(), limit);
      if (n.kind != Tok::number || res.ec != std::errc() || res.ptr != n.text.data() + n.text.size())
        fail(n, "expected non-negative integer");
      spec.limit = limit;
    }
    return finish(std::move(spec), CommandKind::select, {}, head);
  }

  RelationalCommand parse_insert() {
    const Token head = next();
    expect_word("INTO");
    QuerySpec spec;
    spec.relation = identifier();
    expect_symbol("(");
    std::vector<std::string> cols;
    do {
      cols.push_back(identifier());
    } while (accept_symbol(","));
    expect_symbol(")");
    expect_word("VALUES");
    const Token open = peek();
    expect_symbol("(");
    std::vector<Value> vals;
    do {
      vals.push_back(literal());
    } while (accept_symbol(","));
    expect_symbol(")");
    if (vals.size() != cols.size()) fail(open, "column and value counts differ");
    std::vector<Assignment> values;
    for (std::size_t i = 0; i < cols.size(); ++i) values.push_back({cols[i], vals[i]});
    return finish(std::move(spec), CommandKind::insert, std::move(values), head);
  }

  RelationalCommand parse_update() {
    const Token head = next();
    QuerySpec spec;
    spec.relation = identifier();
    expect_word("SET");
    std::vector<Assignment> values;
    do {
      Assignment a;
      a.column = identifier();
      expect_symbol("=");
      a.value = literal();
      values.push_back(std::move(a));
    } while (accept_symbol(","));
    spec.filters = where_clause();
    return finish(std::move(spec), CommandKind::update, std::move(values), head);
  }

  RelationalCommand parse_delete() {
    const Token head = next();
    expect_word("FROM");
    QuerySpec spec;
    spec.relation = identifier();
    spec.filters = where_clause();
    return finish(std::move(spec), CommandKind::remove, {}, head);
  }

  void tokenize() {
    std::size_t i = 0;
    const std::size_t n = text_.size();
    auto error = [&](std::size_t at, const std::string& what) {
      throw Error(ErrorCode::syntax_error, what + " at offset " + std::to_string(at), at);
    };
    while (i < n) {
      const char c = text_[i];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++i;
        continue;
      }
      const std::size_t start = i;
      if (ident_start(c)) {
        while (i < n && ident_char(text_[i])) ++i;
        tokens_.push_back({Tok::word, text_.substr(start, i - start), start});
      } else if (digit(c) || (c == '-' && i + 1 < n && digit(text_[i + 1]))) {
        ++i;
        while (i < n && digit(text_[i])) ++i;
        if (i < n && text_[i] == '.') {
          ++i;
          while (i < n && digit(text_[i])) ++i;
          if (i < n && (text_[i] == 'e' || text_[i] == 'E')) {
            ++i;
            if (i < n && (text_[i] == '+' || text_[i] == '-')) ++i;
            if (i >= n || !digit(text_[i])) error(i, "malformed exponent");
            while (i < n && digit(text_[i])) ++i;
          }
        }
        tokens_.push_back({Tok::number, text_.substr(start, i - start), start});
      } else if (c == '\'') {
        ++i;
        bool closed = false;
        while (i < n) {
          if (text_[i] == '\'') {
            if (i + 1 < n && text_[i + 1] == '\'') {
              i += 2;
              continue;
            }
            ++i;
            closed = true;
            break;
          }
          ++i;
        }
        if (!closed) error(start, "unterminated string literal");
        tokens_.push_back({Tok::string, text_.substr(start, i - start), start});
      } else if (c == '<' || c == '>' || c == '!') {
        if (i + 1 < n && text_[i + 1] == '=') {
          i += 2;
        } else if (c == '!') {
          error(start, "unexpected character '!'");
        } else {
          ++i;
        }
        tokens_.push_back({Tok::symbol, text_.substr(start, i - start), start});
      } else if (c == '=' || c == ',' || c == '(' || c == ')' || c == '*') {
        ++i;
        tokens_.push_back({Tok::symbol, text_.substr(start, 1), start});
      } else {
        error(start, std::string("unexpected character '") + c + "'");
      }
    }
    tokens_.push_back({Tok::end, {}, n});
  }

  std::string_view text_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

RelationalCommand parse(std::string_view text) { return Parser(text).parse_command(); }

}  // namespace arm
