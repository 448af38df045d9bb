#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <mutex>
#include <thread>

#include "arm/codec.hpp"
#include "arm/error.hpp"
#include "arm/notifier.hpp"
#include "arm/socket_net.hpp"

using namespace arm;

namespace {

const Endpoint kLoopback{"127.0.0.1", 0};

// Listening node pumped by its own thread until stopped.
struct Server {
  SocketNetwork net;
  Endpoint bound;
  std::atomic<bool> stop{false};
  std::thread thread;

  explicit Server(NodeId id) : net(std::move(id)) { bound = net.listen(kLoopback); }
  void start() {
    thread = std::thread([this] { net.run_until([this] { return stop.load(); }, 30000); });
  }
  void join() {
    stop = true;
    if (thread.joinable()) thread.join();
  }
  ~Server() { join(); }
};

bool log_has(const EventLog& log, std::string_view kind) {
  for (const auto& line : log.lines())
    if (line.find(std::string(" ") + std::string(kind) + " ") != std::string::npos) return true;
  return false;
}

int raw_connect(std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  return fd;
}

// True when the peer closes `fd` within `timeout_ms`.
bool closed_by_peer(int fd, int timeout_ms) {
  pollfd p{fd, POLLIN, 0};
  std::uint8_t buf[256];
  while (::poll(&p, 1, timeout_ms) == 1) {
    const auto n = ::recv(fd, buf, sizeof buf, 0);
    if (n <= 0) return true;
  }
  return false;
}

Relation users() {
  return Relation{"users", {{"id", ColumnType::int64}, {"name", ColumnType::text}}, "id"};
}

}  // namespace

TEST_CASE("endpoints parse host and port") {
  const auto ep = parse_endpoint("10.1.2.3:9000");
  CHECK(ep.host == "10.1.2.3");
  CHECK(ep.port == 9000);
  CHECK(parse_endpoint("example.org").port == kDefaultPort);
  CHECK(parse_endpoint("[::1]:7").host == "::1");
  CHECK_THROWS_AS(parse_endpoint("host:70000"), Error);
  CHECK_THROWS_AS(parse_endpoint("host:x"), Error);
  CHECK_THROWS_AS(parse_endpoint(":80"), Error);
}

TEST_CASE("connect exchanges HELLO and PING gets a PONG") {
  Server b(NodeId{"node-b", 2});
  b.start();
  SocketNetwork a(NodeId{"node-a", 1});
  const auto peer = a.connect(b.bound, 2000);
  CHECK(peer == NodeId{"node-b", 2});
  CHECK(a.connected(peer));
  const auto rtt = a.ping(peer, 2000);
  REQUIRE(rtt);
  CHECK(*rtt >= 0);
  CHECK(*rtt < 2000);
  b.join();
  CHECK(log_has(b.net.log(), "hello"));
}

TEST_CASE("first frame other than HELLO closes the connection") {
  Server b(NodeId{"node-b", 2});
  b.start();
  const int fd = raw_connect(b.bound.port);
  const auto ping = encode(MessageEnvelope{{}, {}, 0, MessageKind::ping, {}});
  REQUIRE(::send(fd, ping.data(), ping.size(), 0) == static_cast<ssize_t>(ping.size()));
  CHECK(closed_by_peer(fd, 2000));
  ::close(fd);
  b.join();
  CHECK(log_has(b.net.log(), "protocol-violation"));
}

TEST_CASE("garbage after the handshake closes the connection") {
  Server b(NodeId{"node-b", 2});
  b.start();
  const int fd = raw_connect(b.bound.port);
  MessageEnvelope hello;
  hello.sender = ObjectAddress::of(NodeId{"raw", 9});
  hello.kind = MessageKind::hello;
  auto bytes = encode(hello);
  const std::uint8_t junk[] = {'X', 'R', 'M', '1', 1, 6, 0, 0, 0, 0};
  bytes.insert(bytes.end(), std::begin(junk), std::end(junk));
  REQUIRE(::send(fd, bytes.data(), bytes.size(), 0) == static_cast<ssize_t>(bytes.size()));
  CHECK(closed_by_peer(fd, 2000));
  ::close(fd);
  b.join();
  CHECK(log_has(b.net.log(), "protocol-violation"));
}

TEST_CASE("frames from interleaved connections stay in order per connection") {
  Server b(NodeId{"node-b", 2});
  std::mutex mu;
  std::map<NodeId, std::vector<std::uint64_t>> seen;
  b.net.attach(b.net.self(), [&](const NodeId& from, std::span<const std::uint8_t> frame) {
    const auto env = decode(frame);
    if (env.kind != MessageKind::command) return;
    std::lock_guard lock(mu);
    seen[from].push_back(env.seq);
  });
  b.start();
  SocketNetwork a(NodeId{"node-a", 1});
  SocketNetwork c(NodeId{"node-c", 3});
  const auto pa = a.connect(b.bound, 2000);
  const auto pc = c.connect(b.bound, 2000);
  constexpr std::uint64_t kFrames = 500;
  for (std::uint64_t i = 1; i <= kFrames; ++i) {
    for (auto* net : {&a, &c}) {
      MessageEnvelope env;
      env.sender = ObjectAddress::of(net->self(), "users");
      env.recipient = ObjectAddress::of(NodeId{"node-b", 2}, "users");
      env.seq = i;
      env.kind = MessageKind::command;
      env.payload = Bytes(i % 97, static_cast<std::uint8_t>(i));
      net->send(net->self(), net == &a ? pa : pc, encode(env));
    }
  }
  auto all_seen = [&] {
    std::lock_guard lock(mu);
    return seen[NodeId{"node-a", 1}].size() == kFrames && seen[NodeId{"node-c", 3}].size() == kFrames;
  };
  for (int i = 0; i < 200 && !all_seen(); ++i) {
    a.run_until([] { return false; }, 5);
    c.run_until([] { return false; }, 5);
  }
  b.join();
  for (const auto& id : {NodeId{"node-a", 1}, NodeId{"node-c", 3}}) {
    const auto& seqs = seen[id];
    REQUIRE(seqs.size() == kFrames);
    for (std::uint64_t i = 0; i < kFrames; ++i) CHECK(seqs[i] == i + 1);
  }
}

TEST_CASE("bind and connect failures are reported") {
  SocketNetwork a(NodeId{"node-a", 1});
  const auto bound = a.listen(kLoopback);
  SocketNetwork b(NodeId{"node-b", 2});
  try {
    b.listen(bound);
    FAIL("second bind succeeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io_error);
  }
  SocketNetwork c(NodeId{"node-c", 3});
  const auto closed = SocketNetwork(NodeId{"tmp", 0}).listen(kLoopback);  // released on destruction
  try {
    c.connect(closed, 500);
    FAIL("connect to a closed port succeeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unreachable);
  }
  CHECK_THROWS_AS(c.ping(NodeId{"nobody", 1}, 10), Error);
}

TEST_CASE("idle connections survive on keepalive PING/PONG") {
  Server b(NodeId{"node-b", 2});
  b.net.set_keepalive_ms(20);
  b.start();
  SocketNetwork a(NodeId{"node-a", 1});
  a.set_keepalive_ms(20);
  const auto peer = a.connect(b.bound, 2000);
  a.run_until([] { return false; }, 200);
  CHECK(a.connected(peer));
  b.join();
}

TEST_CASE("notifiers route commands and replicate over sockets") {
  const NodeId owner_id{"127.0.0.1", 2};
  const NodeId client_id{"127.0.0.1", 1};
  Server b(owner_id);
  RetryPolicy retry{8, 100, 2};
  auto owner = Notifier::init(b.net, NodeConfig{owner_id, {users()}, {}, retry, false, 0});
  owner->register_relation("users", Role::owner);
  b.start();

  SocketNetwork a(client_id);
  auto client = Notifier::init(a, NodeConfig{client_id, {}, {}, retry, false, 0});
  CHECK(a.connect(b.bound, 2000) == owner_id);
  REQUIRE(a.run_until([&] { return client->owner_of("users").has_value(); }, 3000));
  CHECK(*client->owner_of("users") == owner_id);

  const auto reply = client->send_command(
      build(QuerySpec::from("users"), CommandKind::insert, {{"id", Value(1)}, {"name", Value("ada")}}));
  CHECK(reply.outcome.ok);
  const auto rows = client->send_command(build(QuerySpec::from("users"), CommandKind::select));
  REQUIRE(rows.result);
  CHECK(rows.result->rows.size() == 1);

  client->register_relation("users", Role::replica);
  REQUIRE(a.run_until([&] { return client->store().has_relation("users") && client->store().row_count("users") == 1; },
                      3000));
  client->send_command(build(QuerySpec::from("users"), CommandKind::insert, {{"id", Value(2)}, {"name", Value("bo")}}));
  CHECK(a.run_until([&] { return client->store().row_count("users") == 2; }, 3000));
  b.join();
  CHECK(owner->store().row_count("users") == 2);
}
