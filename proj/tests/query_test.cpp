#include <doctest.h>

#include <cmath>

#include "arm/error.hpp"
#include "arm/query.hpp"
#include "generators.hpp"

using namespace arm;

TEST_CASE("build validates kind/spec/values combinations") {
  auto sel = build(QuerySpec::from("users"), CommandKind::select);
  CHECK(sel.kind == CommandKind::select);
  CHECK(sel.relation() == "users");
  CHECK_FALSE(sel.spec.projection.has_value());

  auto spec = QuerySpec::from("users").where("id", CompareOp::eq, 1);
  try {
    build(spec, CommandKind::insert, {{"id", 1}});
    FAIL("expected invalid combination");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_command);
  }

  auto del = build(QuerySpec::from("users").where("age", CompareOp::gt, 30).order_by("name"),
                   CommandKind::remove);
  CHECK(del.spec.filters.size() == 1);
  CHECK(del.spec.sort_keys.empty());
  CHECK(render(del) == "DELETE FROM users WHERE age > 30");

  CHECK_THROWS_AS(build(QuerySpec::from("users"), CommandKind::insert), Error);
  CHECK_THROWS_AS(build(QuerySpec::from("users"), CommandKind::select, {{"a", 1}}), Error);
  CHECK_THROWS_AS(build(QuerySpec::from("SELECT"), CommandKind::select), Error);
  CHECK_THROWS_AS(build(QuerySpec::from("users"), CommandKind::update, {{"a", 1}, {"a", 2}}), Error);
}

TEST_CASE("canonical rendering") {
  auto cmd = build(QuerySpec::from("users")
                       .columns({"id", "name"})
                       .where("age", CompareOp::gt, 30)
                       .order_by("name", SortDirection::asc),
                   CommandKind::select);
  CHECK(render(cmd) == "SELECT id, name FROM users WHERE age > 30 ORDER BY name ASC");
  CHECK(render(build(QuerySpec::from("users"), CommandKind::select)) == "SELECT * FROM users");
  CHECK(render(build(QuerySpec::from("users").where("name", CompareOp::eq, "O'Hara"), CommandKind::select)) ==
        "SELECT * FROM users WHERE name = 'O''Hara'");

  CHECK(render(build(QuerySpec::from("users"), CommandKind::insert, {{"id", 2}, {"name", "b"}})) ==
        "INSERT INTO users (id, name) VALUES (2, 'b')");
  CHECK(render(build(QuerySpec::from("users").where("id", CompareOp::eq, 2), CommandKind::update,
                     {{"name", "c"}})) == "UPDATE users SET name = 'c' WHERE id = 2");
  CHECK(render(build(QuerySpec::from("t").where("a", CompareOp::le, 1.5).where("b", CompareOp::ne, Value::null())
                         .order_by("a", SortDirection::desc).order_by("b").take(10),
                     CommandKind::select)) ==
        "SELECT * FROM t WHERE a <= 1.5 AND b != NULL ORDER BY a DESC, b ASC LIMIT 10");
  CHECK(render(build(QuerySpec::from("t"), CommandKind::insert, {{"f", 3.0}, {"g", true}, {"h", 1e20}})) ==
        "INSERT INTO t (f, g, h) VALUES (3.0, TRUE, 1.0e+20)");
}

TEST_CASE("parse canonical text") {
  auto cmd = parse("SELECT * FROM users");
  CHECK(cmd == build(QuerySpec::from("users"), CommandKind::select));

  try {
    parse("SELEC *");
    FAIL("expected syntax error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::syntax_error);
    REQUIRE(e.offset().has_value());
    CHECK(*e.offset() == 0);
  }

  auto check_offset = [](const char* text, std::size_t offset) {
    try {
      parse(text);
      FAIL("expected syntax error for " << text);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::syntax_error);
      CHECK(e.offset() == offset);
    }
  };
  check_offset("SELECT * FROM", 13);
  check_offset("SELECT * FROM users WHERE", 25);
  check_offset("SELECT * FROM users WHERE a ~ 1", 28);
  check_offset("SELECT * FROM users LIMIT -1", 26);
  check_offset("INSERT INTO t (a, b) VALUES (1)", 28);
  check_offset("DELETE FROM t WHERE a = 'x", 24);
  check_offset("SELECT * FROM t ORDER BY a", 26);
  check_offset("SELECT * FROM t extra", 16);

  CHECK(parse("UPDATE users SET name = 'c' WHERE id = 2") ==
        build(QuerySpec::from("users").where("id", CompareOp::eq, 2), CommandKind::update, {{"name", "c"}}));
  CHECK(parse("  DELETE   FROM t  ") == build(QuerySpec::from("t"), CommandKind::remove));
}

TEST_CASE("parse(render(c)) == c for generated commands") {
  testing::Rng rng(42);
  for (int i = 0; i < 2000; ++i) {
    auto cmd = testing::random_command(rng);
    const auto text = render(cmd);
    INFO(text);
    REQUIRE(parse(text) == cmd);
    CHECK(render(parse(text)) == text);
  }
}

TEST_CASE("literal formatting round-trips exactly") {
  for (double d : {0.1, -0.0, 1e-7, 123456789.125, 5e-324, 2.0}) {
    const auto text = render_literal(Value(d));
    CHECK(text.find('.') != std::string::npos);
    auto back = parse_literal(text);
    REQUIRE(back.is_float());
    CHECK(std::signbit(back.as_float()) == std::signbit(d));
    CHECK(back.as_float() == d);
  }
  CHECK(render_literal(Value("it's")) == "'it''s'");
  CHECK(parse_literal("'it''s'") == Value("it's"));
  CHECK_THROWS_AS(parse_literal("'open"), Error);
  CHECK_THROWS_AS(parse_literal("1e5"), Error);
}
