#include "arm/socket_net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <vector>

#include "arm/error.hpp"

namespace arm {

namespace {

[[noreturn]] void io_fail(const std::string& what) {
  throw Error(ErrorCode::io_error, what + ": " + std::strerror(errno));
}

void set_nonblocking(int fd) {
  const int flags = ::fcntl(fd, F_GETFL, 0);
  if (flags < 0 || ::fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0) io_fail("fcntl");
}

struct AddrInfo {
  addrinfo* list = nullptr;
  ~AddrInfo() {
    if (list) ::freeaddrinfo(list);
  }
};

void resolve(const Endpoint& ep, bool passive, AddrInfo& out) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  const auto port = std::to_string(ep.port);
  const char* host = ep.host.empty() ? nullptr : ep.host.c_str();
  if (const int rc = ::getaddrinfo(host, port.c_str(), &hints, &out.list); rc != 0)
    throw Error(ErrorCode::io_error, "cannot resolve " + ep.str() + ": " + ::gai_strerror(rc));
}

}  // namespace

Endpoint parse_endpoint(std::string_view text) {
  Endpoint ep;
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) {
    ep.host = std::string(text);
    ep.port = kDefaultPort;
  } else {
    ep.host = std::string(text.substr(0, colon));
    const auto digits = text.substr(colon + 1);
    unsigned port = 0;
    const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc{} || end != digits.data() + digits.size() || digits.empty() || port > 65535)
      throw Error(ErrorCode::invalid_argument, "bad port in '" + std::string(text) + "'", colon + 1);
    ep.port = static_cast<std::uint16_t>(port);
  }
  if (ep.host.size() >= 2 && ep.host.front() == '[' && ep.host.back() == ']') ep.host = ep.host.substr(1, ep.host.size() - 2);
  if (ep.host.empty()) throw Error(ErrorCode::invalid_argument, "missing host in '" + std::string(text) + "'", 0);
  return ep;
}

SocketNetwork::SocketNetwork(NodeId self) : self_(std::move(self)), epoch_(std::chrono::steady_clock::now()) {}

SocketNetwork::~SocketNetwork() {
  for (auto& [fd, c] : conns_)
    if (c->fd >= 0) ::close(c->fd);
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

double SocketNetwork::now_ms() const {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - epoch_).count();
}

Endpoint SocketNetwork::listen(const Endpoint& bind) {
  if (listen_fd_ >= 0) throw Error(ErrorCode::invalid_argument, "already listening");
  AddrInfo ai;
  resolve(bind, true, ai);
  std::string last_error = "no usable address";
  for (auto* a = ai.list; a; a = a->ai_next) {
    const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    const int yes = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    if (::bind(fd, a->ai_addr, a->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
      set_nonblocking(fd);
      listen_fd_ = fd;
      sockaddr_storage addr{};
      socklen_t len = sizeof addr;
      ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
      Endpoint bound = bind;
      bound.port = ntohs(addr.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port
                                                   : reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
      log_.append(now_ms(), "listen", bound.str());
      return bound;
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  throw Error(ErrorCode::io_error, "cannot bind " + bind.str() + ": " + last_error);
}

NodeId SocketNetwork::connect(const Endpoint& peer, double timeout_ms) {
  AddrInfo ai;
  resolve(peer, false, ai);
  const double deadline = now_ms() + timeout_ms;
  std::string last_error = "no usable address";
  for (auto* a = ai.list; a; a = a->ai_next) {
    const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    set_nonblocking(fd);
    const int yes = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
    int rc = ::connect(fd, a->ai_addr, a->ai_addrlen);
    if (rc < 0 && errno == EINPROGRESS) {
      pollfd p{fd, POLLOUT, 0};
      const double wait = std::max(0.0, deadline - now_ms());
      rc = ::poll(&p, 1, static_cast<int>(std::ceil(wait)));
      if (rc == 1) {
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        errno = err;
        rc = err == 0 ? 0 : -1;
      } else {
        errno = rc == 0 ? ETIMEDOUT : errno;
        rc = -1;
      }
    }
    if (rc < 0) {
      last_error = std::strerror(errno);
      ::close(fd);
      continue;
    }
    auto conn = std::make_shared<Connection>();
    conn->fd = fd;
    conn->label = peer.str();
    conn->last_activity_ms = now_ms();
    conns_[fd] = conn;
    auto& c = *conn;
    send_hello(c);
    log_.append(now_ms(), "connect", peer.str());
    const bool ok = run_until([&] { return c.peer.has_value() || c.fd < 0; }, std::max(0.0, deadline - now_ms()));
    if (ok && c.peer) return *c.peer;
    if (c.fd >= 0) close(c, "handshake timeout");
    throw Error(ErrorCode::unreachable, "no HELLO from " + peer.str());
  }
  throw Error(ErrorCode::unreachable, "cannot connect to " + peer.str() + ": " + last_error);
}

std::optional<double> SocketNetwork::ping(const NodeId& peer, double timeout_ms) {
  auto* c = route(peer);
  if (!c) throw Error(ErrorCode::unreachable, "not connected to " + peer.str());
  const double t0 = now_ms();
  last_pong_ms_.erase(peer);
  queue(*c, encode(MessageEnvelope{{}, {}, 0, MessageKind::ping, {}}));
  const bool ok = run_until([&] { return last_pong_ms_.count(peer) > 0; }, timeout_ms);
  if (!ok) return std::nullopt;
  return last_pong_ms_.at(peer) - t0;
}

bool SocketNetwork::connected(const NodeId& peer) const {
  const auto it = by_peer_.find(peer);
  return it != by_peer_.end() && conns_.count(it->second) && conns_.at(it->second)->fd >= 0;
}

void SocketNetwork::attach(const NodeId& node, Handler handler) {
  if (node != self_) throw Error(ErrorCode::invalid_argument, "socket network serves " + self_.str() + " only");
  handler_ = std::move(handler);
}

void SocketNetwork::detach(const NodeId& node) {
  if (node == self_) handler_.reset();
}

void SocketNetwork::send(const NodeId& from, const NodeId& to, Bytes frame, double extra_delay_ms) {
  if (extra_delay_ms > 0) {
    schedule(extra_delay_ms, [this, from, to, frame = std::move(frame)]() mutable { send(from, to, std::move(frame)); });
    return;
  }
  if (to == self_) {
    schedule(0, [this, frame = std::move(frame)] {
      if (handler_) (*handler_)(self_, frame);
    });
    return;
  }
  if (auto* c = route(to)) {
    queue(*c, frame);
  } else {
    log_.append(now_ms(), "no-route", to.str());
  }
}

void SocketNetwork::schedule(double delay_ms, std::function<void()> fn) {
  timers_.push(Timer{now_ms() + std::max(0.0, delay_ms), timer_order_++, std::move(fn)});
}

SocketNetwork::Connection* SocketNetwork::route(const NodeId& peer) {
  const auto it = by_peer_.find(peer);
  if (it == by_peer_.end()) return nullptr;
  const auto c = conns_.find(it->second);
  return c != conns_.end() && c->second->fd >= 0 ? c->second.get() : nullptr;
}

void SocketNetwork::queue(Connection& c, const Bytes& frame) {
  if (c.fd < 0) return;
  c.outbox.insert(c.outbox.end(), frame.begin(), frame.end());
  flush(c);
}

void SocketNetwork::send_hello(Connection& c) {
  c.hello_sent = true;
  MessageEnvelope hello;
  hello.sender = ObjectAddress::of(self_);
  hello.kind = MessageKind::hello;
  queue(c, encode(hello));
}

void SocketNetwork::flush(Connection& c) {
  std::size_t sent = 0;
  while (c.fd >= 0 && sent < c.outbox.size()) {
    const auto n = ::send(c.fd, c.outbox.data() + sent, c.outbox.size() - sent, MSG_NOSIGNAL);
    if (n > 0) {
      sent += static_cast<std::size_t>(n);
    } else if (n < 0 && errno == EINTR) {
      continue;
    } else if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
      break;
    } else {
      close(c, std::string("write failed: ") + std::strerror(errno));
      return;
    }
  }
  c.outbox.erase(c.outbox.begin(), c.outbox.begin() + static_cast<std::ptrdiff_t>(sent));
}

void SocketNetwork::close(Connection& c, std::string_view reason) {
  if (c.fd < 0) return;
  log_.append(now_ms(), "close", c.label + " " + std::string(reason));
  ::close(c.fd);
  if (c.peer) {
    const auto it = by_peer_.find(*c.peer);
    if (it != by_peer_.end() && it->second == c.fd) by_peer_.erase(it);
  }
  c.fd = -1;
}

void SocketNetwork::accept_pending() {
  while (true) {
    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    const int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    if (fd < 0) return;
    set_nonblocking(fd);
    const int yes = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
    char host[NI_MAXHOST] = "?";
    char port[NI_MAXSERV] = "?";
    ::getnameinfo(reinterpret_cast<sockaddr*>(&addr), len, host, sizeof host, port, sizeof port,
                  NI_NUMERICHOST | NI_NUMERICSERV);
    auto conn = std::make_shared<Connection>();
    conn->fd = fd;
    conn->label = std::string(host) + ":" + port;
    conn->last_activity_ms = now_ms();
    log_.append(now_ms(), "accept", conn->label);
    conns_[fd] = std::move(conn);
  }
}

void SocketNetwork::read_from(Connection& c) {
  std::uint8_t buf[16384];
  while (c.fd >= 0) {
    const auto n = ::recv(c.fd, buf, sizeof buf, 0);
    if (n == 0) {
      close(c, "peer closed");
      return;
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno != EAGAIN && errno != EWOULDBLOCK) close(c, std::string("read failed: ") + std::strerror(errno));
      return;
    }
    c.last_activity_ms = now_ms();
    c.ping_outstanding = false;
    c.reader.feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
    try {
      while (c.fd >= 0) {
        auto env = c.reader.next();
        if (!env) break;
        on_frame(c, *env);
      }
    } catch (const Error& e) {
      log_.append(now_ms(), "protocol-violation", c.label + " " + e.what());
      close(c, "protocol-violation");
      return;
    }
  }
}

void SocketNetwork::on_frame(Connection& c, const MessageEnvelope& env) {
  if (!c.peer) {
    if (env.kind != MessageKind::hello || !env.payload.empty()) {
      log_.append(now_ms(), "protocol-violation",
                  c.label + " first frame is " + std::string(to_string(env.kind)) + ", expected HELLO");
      close(c, "protocol-violation");
      return;
    }
    c.peer = env.sender.node();
    c.label = c.peer->str();
    by_peer_[*c.peer] = c.fd;
    if (!c.hello_sent) send_hello(c);
    log_.append(now_ms(), "hello", c.label);
    if (handler_) (*handler_)(*c.peer, encode(env));
    return;
  }
  switch (env.kind) {
    case MessageKind::ping: queue(c, encode(MessageEnvelope{{}, {}, 0, MessageKind::pong, env.payload})); return;
    case MessageKind::pong: last_pong_ms_[*c.peer] = now_ms(); return;
    case MessageKind::hello:
      if (env.payload.empty()) return;
      break;
    default: break;
  }
  if (handler_) (*handler_)(*c.peer, encode(env));
}

void SocketNetwork::run_due_timers() {
  const double now = now_ms();
  std::vector<std::function<void()>> due;
  while (!timers_.empty() && timers_.top().at_ms <= now) {
    due.push_back(timers_.top().fn);
    timers_.pop();
  }
  for (auto& fn : due) fn();
}

void SocketNetwork::keepalive() {
  const double now = now_ms();
  for (auto& [fd, c] : conns_) {
    if (c->fd < 0 || !c->peer) continue;
    const double idle = now - c->last_activity_ms;
    if (c->ping_outstanding && idle > 2 * keepalive_ms_) {
      close(*c, "keepalive timeout");
    } else if (!c->ping_outstanding && idle > keepalive_ms_) {
      c->ping_outstanding = true;
      queue(*c, encode(MessageEnvelope{{}, {}, 0, MessageKind::ping, {}}));
    }
  }
}

void SocketNetwork::poll_once(double wait_ms) {
  std::vector<pollfd> fds;
  if (listen_fd_ >= 0) fds.push_back({listen_fd_, POLLIN, 0});
  for (auto& [fd, c] : conns_)
    if (c->fd >= 0) fds.push_back({fd, static_cast<short>(POLLIN | (c->outbox.empty() ? 0 : POLLOUT)), 0});
  const int rc = ::poll(fds.data(), fds.size(), static_cast<int>(std::ceil(std::max(0.0, wait_ms))));
  if (rc < 0) {
    if (errno == EINTR) return;
    io_fail("poll");
  }
  for (const auto& p : fds) {
    if (!p.revents) continue;
    if (p.fd == listen_fd_) {
      accept_pending();
      continue;
    }
    auto it = conns_.find(p.fd);
    if (it == conns_.end() || it->second->fd < 0) continue;
    auto& c = *it->second;
    if (p.revents & POLLOUT) flush(c);
    if (p.revents & (POLLIN | POLLHUP | POLLERR)) read_from(c);
  }
  for (auto it = conns_.begin(); it != conns_.end();) it = it->second->fd < 0 ? conns_.erase(it) : std::next(it);
}

bool SocketNetwork::run_until(const std::function<bool()>& done, double timeout_ms) {
  const double deadline = now_ms() + timeout_ms;
  while (true) {
    if (done()) return true;
    run_due_timers();
    if (done()) return true;
    const double now = now_ms();
    if (now >= deadline) return false;
    bool live = listen_fd_ >= 0 || !timers_.empty();
    for (const auto& [fd, c] : conns_) live = live || c->fd >= 0;
    if (!live) return false;
    double wait = std::min(deadline - now, 100.0);
    if (!timers_.empty()) wait = std::min(wait, std::max(0.0, timers_.top().at_ms - now));
    poll_once(wait);
    keepalive();
  }
}

}  // namespace arm
