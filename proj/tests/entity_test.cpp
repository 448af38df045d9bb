#include <doctest.h>

#include "arm/entity.hpp"
#include "arm/error.hpp"
#include "cluster.hpp"
#include "generators.hpp"

using namespace arm;
using namespace arm::testing;

namespace {

Relation users() {
  return Relation{"users", {{"id", ColumnType::int64}, {"name", ColumnType::text}, {"age", ColumnType::int64}}, "id"};
}
Relation orders() {
  return Relation{"orders", {{"id", ColumnType::int64}, {"user_id", ColumnType::int64}, {"total", ColumnType::float64}}, "id"};
}
const EntityLink kOrderUser{"orders", "user_id", "users"};

ErrorCode error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::validation_error;
}

// A owns users, B owns orders, C is a plain client.
struct Shop : Cluster {
  EntityManager at_c;
  explicit Shop(std::uint64_t seed = 1)
      : Cluster(seed, {{users()}, {orders()}, {}}, LinkModel{10, 0}), at_c((*this)[2], {users(), orders()}) {
    (*this)[0].register_relation("users", Role::owner);
    (*this)[1].register_relation("orders", Role::owner);
    settle();
  }
  std::vector<std::uint64_t> sequences() {
    std::vector<std::uint64_t> out;
    for (auto& h : hubs)
      for (const auto* r : {"users", "orders"}) out.push_back(h->last_applied(r));
    return out;
  }
};

}  // namespace

TEST_CASE("create save load") {
  Shop s;
  auto e = s.at_c.create("users", {{"id", Value(2)}, {"name", Value("b")}});
  CHECK(e.is_new());
  CHECK(e.dirty() == std::set<std::string>{"id", "name"});
  CHECK(render(*s.at_c.pending_command(e)) == "INSERT INTO users (id, name) VALUES (2, 'b')");
  auto r = s.at_c.save(e);
  CHECK(r.sent);
  CHECK(r.affected == 1);
  CHECK(e.dirty().empty());

  auto loaded = s.at_c.load("users", Value(2));
  CHECK(loaded.get("name") == Value("b"));
  CHECK(loaded.get("age").is_null());
  CHECK(loaded.dirty().empty());
  CHECK(loaded.origin_version() == s[0].last_applied("users"));
  CHECK(error_of([&] { s.at_c.load("users", Value(99)); }) == ErrorCode::not_found);
}

TEST_CASE("update carries exactly the changed columns") {
  Shop s;
  auto e = s.at_c.create("users", {{"id", Value(2)}, {"name", Value("b")}, {"age", Value(30)}});
  s.at_c.save(e);
  auto loaded = s.at_c.load("users", Value(2));
  loaded.set("name", Value("c"));
  loaded.set("age", Value(30));
  CHECK(render(*s.at_c.pending_command(loaded)) == "UPDATE users SET name = 'c' WHERE id = 2");
  s.at_c.save(loaded);
  CHECK(s.at_c.load("users", Value(2)).get("name") == Value("c"));
  CHECK_FALSE(s.at_c.pending_command(loaded));
  CHECK_FALSE(s.at_c.save(loaded).sent);
  CHECK(error_of([&] { loaded.set("id", Value(3)); }) == ErrorCode::invalid_argument);
  CHECK(error_of([&] { loaded.set("nope", Value(3)); }) == ErrorCode::unknown_column);
}

TEST_CASE("change tracking is exact for random edits") {
  Shop s;
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    auto e = s.at_c.create("users", {{"id", Value(i)}, {"name", Value("n")}, {"age", Value(i)}});
    s.at_c.save(e);
  }
  for (int round = 0; round < 100; ++round) {
    const auto id = static_cast<std::int64_t>(rng() % 20);
    auto e = s.at_c.load("users", Value(id));
    const auto before = e.fields();
    std::set<std::string> changed;
    if (rng() % 2) {
      Value v = rng() % 3 ? Value("n" + std::to_string(rng() % 3)) : Value::null();
      e.set("name", v);
      if (!(before.at("name") == v)) changed.insert("name");
    }
    if (rng() % 2) {
      Value v(static_cast<std::int64_t>(rng() % 25));
      e.set("age", v);
      if (!(before.at("age") == v)) changed.insert("age");
    }
    CHECK(e.dirty() == changed);
    auto cmd = s.at_c.pending_command(e);
    CHECK(cmd.has_value() == !changed.empty());
    if (cmd) {
      std::set<std::string> assigned;
      for (const auto& a : cmd->values) assigned.insert(a.column);
      CHECK(assigned == changed);
    }
    s.at_c.save(e);
    auto again = s.at_c.load("users", Value(id));
    CHECK(again.fields() == e.fields());
  }
}

TEST_CASE("stale origin version is a conflict") {
  Shop s;
  auto e = s.at_c.create("users", {{"id", Value(1)}, {"name", Value("a")}});
  s.at_c.save(e);
  auto first = s.at_c.load("users", Value(1));
  auto second = s.at_c.load("users", Value(1));
  first.set("name", Value("x"));
  s.at_c.save(first);
  second.set("name", Value("y"));
  CHECK(error_of([&] { s.at_c.save(second); }) == ErrorCode::conflict);
  // Writes to other rows do not make this one stale.
  auto other = s.at_c.create("users", {{"id", Value(5)}});
  s.at_c.save(other);
  first.set("age", Value(4));
  CHECK_NOTHROW(s.at_c.save(first));
}

TEST_CASE("duplicate insert fails") {
  Shop s;
  auto a = s.at_c.create("users", {{"id", Value(1)}});
  s.at_c.save(a);
  auto b = s.at_c.create("users", {{"id", Value(1)}});
  CHECK(error_of([&] { s.at_c.save(b); }) == ErrorCode::duplicate_key);
}

TEST_CASE("delete is idempotent") {
  Shop s;
  auto e = s.at_c.create("users", {{"id", Value(1)}, {"name", Value("a")}});
  s.at_c.save(e);
  auto loaded = s.at_c.load("users", Value(1));
  CHECK(s.at_c.remove(loaded).affected == 1);
  CHECK(s.at_c.remove(loaded).affected == 0);
  CHECK(error_of([&] { s.at_c.load("users", Value(1)); }) == ErrorCode::not_found);
  CHECK(error_of([&] { s.at_c.remove(s.at_c.create("users", {{"id", Value(3)}})); }) == ErrorCode::invalid_argument);
}

TEST_CASE("remote load equals the owner store") {
  Shop s;
  for (int i = 0; i < 5; ++i) {
    auto e = s.at_c.create("users", {{"id", Value(i)}, {"name", Value("u" + std::to_string(i))}, {"age", Value(i * 10)}});
    s.at_c.save(e);
  }
  auto direct = s[0].store().execute(parse("SELECT * FROM users WHERE id = 3"));
  auto e = s.at_c.load("users", Value(3));
  for (std::size_t i = 0; i < direct.columns.size(); ++i) CHECK(e.get(direct.columns[i]) == direct.rows[0][i]);
}

TEST_CASE("follow resolves links") {
  Shop s;
  auto u = s.at_c.create("users", {{"id", Value(1)}, {"name", Value("a")}});
  s.at_c.save(u);
  for (auto [id, fk] : std::vector<std::pair<int, Value>>{{10, Value(1)}, {11, Value::null()}, {12, Value(7)}}) {
    auto o = s.at_c.create("orders", {{"id", Value(id)}, {"user_id", fk}, {"total", Value(1.5)}});
    s.at_c.save(o);
  }
  CHECK(s.at_c.follow(kOrderUser, s.at_c.load("orders", Value(10))).key() == Value(1));
  CHECK(error_of([&] { s.at_c.follow(kOrderUser, s.at_c.load("orders", Value(11))); }) == ErrorCode::null_link);
  CHECK(error_of([&] { s.at_c.follow(kOrderUser, s.at_c.load("orders", Value(12))); }) == ErrorCode::not_found);
  CHECK(error_of([&] { s.at_c.check(EntityLink{"orders", "total", "users"}); }) == ErrorCode::invalid_schema);
}

TEST_CASE("single relation view matches select") {
  Shop s;
  for (int i = 0; i < 8; ++i) {
    auto e = s.at_c.create("users", {{"id", Value(i)}, {"age", Value(25 + i * 2)}});
    s.at_c.save(e);
  }
  auto spec = QuerySpec::from("users").where("age", CompareOp::gt, Value(30));
  const auto seqs = s.sequences();
  CHECK(s.at_c.open_view(EntityView{"older", spec, std::nullopt, {}}) == s[0].store().execute(build(spec, CommandKind::select)));
  CHECK(s.sequences() == seqs);
  CHECK(s.at_c.open_view(EntityView{"none", QuerySpec::from("orders"), std::nullopt, {}}).rows.empty());
}

TEST_CASE("join views equal a nested-loop join") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Shop s(seed);
    Rng rng(seed);
    const auto nu = rng() % 51, no = rng() % 51;
    for (std::size_t i = 0; i < nu; ++i) {
      try {
        s[0].send_command(build(QuerySpec::from("users"), CommandKind::insert,
                                {{"id", Value(static_cast<std::int64_t>(rng() % 60))}, {"age", Value(static_cast<std::int64_t>(rng() % 50))}}));
      } catch (const Error&) {
      }
    }
    for (std::size_t i = 0; i < no; ++i) {
      Value fk = rng() % 8 ? Value(static_cast<std::int64_t>(rng() % 60)) : Value::null();
      try {
        s[1].send_command(build(QuerySpec::from("orders"), CommandKind::insert,
                                {{"id", Value(static_cast<std::int64_t>(rng() % 200))}, {"user_id", fk}, {"total", Value(1.0 * i)}}));
      } catch (const Error&) {
      }
    }
    const Value min_total(static_cast<double>(rng() % 20));
    const Value max_age(static_cast<std::int64_t>(rng() % 50));
    EntityView view{"orders_users", QuerySpec::from("orders").where("total", CompareOp::ge, min_total), kOrderUser,
                    {{"age", CompareOp::lt, max_age}}};
    const auto seqs = s.sequences();
    auto got = s.at_c.open_view(view);
    CHECK(s.sequences() == seqs);

    ResultSet expected;
    auto all_orders = s[1].store().execute(parse("SELECT * FROM orders ORDER BY id ASC"));
    auto all_users = s[0].store().execute(parse("SELECT * FROM users ORDER BY id ASC"));
    for (const auto& o : all_orders.rows) {
      if (compare(o[2], min_total) < 0) continue;
      for (const auto& u : all_users.rows) {
        if (o[1].is_null() || !(o[1] == u[0]) || u[2].is_null() || compare(u[2], max_age) >= 0) continue;
        Row row = o;
        row.insert(row.end(), u.begin(), u.end());
        expected.rows.push_back(row);
      }
    }
    CHECK(got.columns == std::vector<std::string>{"orders.id", "orders.user_id", "orders.total", "users.id", "users.name", "users.age"});
    CHECK(got.rows == expected.rows);
  }
}

TEST_CASE("join view projection and limit") {
  Shop s;
  s[0].send_command(parse("INSERT INTO users (id, name) VALUES (1, 'a')"));
  s[1].send_command(parse("INSERT INTO orders (id, user_id, total) VALUES (5, 1, 2.0)"));
  s[1].send_command(parse("INSERT INTO orders (id, user_id, total) VALUES (6, 1, 3.0)"));
  auto spec = QuerySpec::from("orders").columns({"orders.id", "users.name"}).take(1);
  auto rs = s.at_c.open_view(EntityView{"v", spec, kOrderUser, {}});
  CHECK(rs.columns == std::vector<std::string>{"orders.id", "users.name"});
  REQUIRE(rs.rows.size() == 1);
  CHECK(rs.rows[0] == Row{Value(5), Value("a")});
}
