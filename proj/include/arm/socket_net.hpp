#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>

#include "arm/codec.hpp"
#include "arm/event_log.hpp"
#include "arm/network.hpp"

namespace arm {

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
};

// Parses "host:port"; the port defaults to kDefaultPort when omitted.
Endpoint parse_endpoint(std::string_view text);

// Stream-socket backend. One instance serves one local node and runs a
// single-threaded poll loop inside run_until; it must only be used from
// the thread that pumps it.
//
// Every connection starts with a HELLO frame carrying the sender's node
// address and an empty payload; the accepting side answers with its own.
// Any other first frame, or a malformed frame later on, closes the
// connection. Idle connections exchange PING/PONG.
class SocketNetwork : public Network {
 public:
  explicit SocketNetwork(NodeId self);
  ~SocketNetwork() override;
  SocketNetwork(const SocketNetwork&) = delete;
  SocketNetwork& operator=(const SocketNetwork&) = delete;

  const NodeId& self() const { return self_; }

  // Binds and listens; port 0 picks a free port. Returns the bound endpoint.
  Endpoint listen(const Endpoint& bind);
  // Opens a connection and completes the HELLO exchange. Returns the node
  // identity announced by the peer.
  NodeId connect(const Endpoint& peer, double timeout_ms = 5000);
  // Sends PING to a connected peer and waits for the PONG. Returns the
  // round-trip time, or nullopt on timeout.
  std::optional<double> ping(const NodeId& peer, double timeout_ms = 5000);

  bool connected(const NodeId& peer) const;
  void set_keepalive_ms(double ms) { keepalive_ms_ = ms; }
  EventLog& log() { return log_; }

  void attach(const NodeId& node, Handler handler) override;
  void detach(const NodeId& node) override;
  void send(const NodeId& from, const NodeId& to, Bytes frame, double extra_delay_ms = 0) override;
  double now_ms() const override;
  void schedule(double delay_ms, std::function<void()> fn) override;
  bool run_until(const std::function<bool()>& done,
                 double timeout_ms = std::numeric_limits<double>::infinity()) override;

 private:
  struct Connection {
    int fd = -1;
    std::string label;
    std::optional<NodeId> peer;  // set once the peer's HELLO arrived
    bool hello_sent = false;
    FrameReader reader;
    Bytes outbox;
    double last_activity_ms = 0;
    bool ping_outstanding = false;
  };
  struct Timer {
    double at_ms;
    std::uint64_t order;
    std::function<void()> fn;
    bool operator>(const Timer& o) const { return at_ms != o.at_ms ? at_ms > o.at_ms : order > o.order; }
  };

  void poll_once(double wait_ms);
  void accept_pending();
  void read_from(Connection& c);
  void flush(Connection& c);
  void on_frame(Connection& c, const MessageEnvelope& env);
  void close(Connection& c, std::string_view reason);
  void queue(Connection& c, const Bytes& frame);
  void send_hello(Connection& c);
  void run_due_timers();
  void keepalive();
  Connection* route(const NodeId& peer);

  NodeId self_;
  std::chrono::steady_clock::time_point epoch_;
  int listen_fd_ = -1;
  std::map<int, std::shared_ptr<Connection>> conns_;
  std::map<NodeId, int> by_peer_;
  std::optional<Handler> handler_;
  std::priority_queue<Timer, std::vector<Timer>, std::greater<>> timers_;
  std::uint64_t timer_order_ = 0;
  std::map<NodeId, double> last_pong_ms_;
  double keepalive_ms_ = 30000;
  EventLog log_;
};

}  // namespace arm
