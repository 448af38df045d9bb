#include <doctest.h>

#include "arm/codec.hpp"
#include "arm/error.hpp"
#include "arm/simnet.hpp"

using namespace arm;

namespace {

const NodeId A{"a", 1};
const NodeId B{"b", 2};

Bytes ping() { return encode(MessageEnvelope{}); }

}  // namespace

TEST_CASE("latency delays delivery") {
  SimNet net(1);
  net.set_link(A, B, LinkModel{100, 0});
  std::vector<double> at;
  net.attach(A, [](const NodeId&, auto) {});
  net.attach(B, [&](const NodeId& from, auto frame) {
    CHECK(from == A);
    CHECK(frame.size() == 10);
    at.push_back(net.now_ms());
  });
  net.send(A, B, ping());
  net.deliver_until_quiescent();
  REQUIRE(at.size() == 1);
  CHECK(at[0] == doctest::Approx(100));
}

TEST_CASE("bandwidth and extra delay add to latency") {
  SimNet net(1);
  LinkModel m{5, 0, 10.0};
  net.set_link(A, B, m);
  double at = -1;
  net.attach(A, [](const NodeId&, auto) {});
  net.attach(B, [&](const NodeId&, auto) { at = net.now_ms(); });
  net.send(A, B, Bytes(1000, 0), 2);
  net.deliver_until_quiescent();
  CHECK(at == doctest::Approx(2 + 5 + 100));
}

TEST_CASE("total loss never delivers") {
  SimNet net(3);
  net.set_link(A, B, LinkModel{1, 1.0});
  int got = 0;
  net.attach(A, [](const NodeId&, auto) {});
  net.attach(B, [&](const NodeId&, auto) { ++got; });
  for (int i = 0; i < 50; ++i) net.send(A, B, ping());
  net.deliver_until_quiescent();
  CHECK(got == 0);
  CHECK(net.counters().dropped == 50);
}

TEST_CASE("send to unknown node fails") {
  SimNet net(1);
  net.attach(A, [](const NodeId&, auto) {});
  CHECK_THROWS_AS(net.send(A, B, ping()), Error);
}

TEST_CASE("missing link without default is unreachable") {
  SimNet net(1, std::nullopt);
  net.add_node(A);
  net.add_node(B);
  CHECK_THROWS_AS(net.send(A, B, ping()), Error);
}

TEST_CASE("link model validation") {
  CHECK_THROWS_AS((LinkModel{-1, 0}.validate()), Error);
  CHECK_THROWS_AS((LinkModel{0, 1.5}.validate()), Error);
  CHECK_THROWS_AS((LinkModel{0, 0, 0.0}.validate()), Error);
  CHECK_NOTHROW((LinkModel{0, 1.0}.validate()));
}

TEST_CASE("equal-time events run in insertion order") {
  SimNet net(1);
  std::vector<int> order;
  for (int i = 0; i < 5; ++i) net.schedule(10, [&, i] { order.push_back(i); });
  net.schedule(5, [&] { order.push_back(-1); });
  net.deliver_until_quiescent();
  CHECK(order == std::vector<int>{-1, 0, 1, 2, 3, 4});
}

TEST_CASE("run_until_time and run_until") {
  SimNet net(1);
  int fired = 0;
  net.schedule(10, [&] { ++fired; });
  net.schedule(30, [&] { ++fired; });
  net.run_until_time(20);
  CHECK(fired == 1);
  CHECK(net.now_ms() == 20);
  CHECK_FALSE(net.run_until([&] { return fired == 2; }, 5));
  CHECK(net.run_until([&] { return fired == 2; }));
  CHECK(net.idle());
}

TEST_CASE("schedules are a function of the seed") {
  auto run = [](std::uint64_t seed) {
    SimNet net(seed, LinkModel{10, 0.3, std::nullopt, 0.2, 7});
    net.attach(A, [&](const NodeId&, auto) {});
    net.attach(B, [&](const NodeId&, auto) {});
    for (int i = 0; i < 200; ++i) {
      net.schedule(i, [&net] { net.send(A, B, ping()); net.send(B, A, ping()); });
    }
    net.deliver_until_quiescent();
    return net.log().text();
  };
  CHECK(run(9) == run(9));
  CHECK(run(9) != run(10));
}
