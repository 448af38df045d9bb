#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <vector>

#include "arm/event_log.hpp"
#include "arm/network.hpp"

namespace arm {

// One direction of a simulated link. Delivery delay is latency plus
// payload_size / bandwidth plus uniform jitter in [0, jitter_ms). Jitter
// and duplication exist to drive adversarial delivery schedules.
struct LinkModel {
  double latency_ms = 0;
  double loss_probability = 0;
  std::optional<double> bandwidth_bytes_per_ms;  // nullopt = unlimited
  double duplicate_probability = 0;
  double jitter_ms = 0;

  void validate() const;
};

// Deterministic discrete-event network. Events run in (time, insertion)
// order and every random draw comes from one seeded generator, so equal
// seeds and inputs give identical schedules and event logs.
class SimNet final : public Network {
 public:
  explicit SimNet(std::uint64_t seed, std::optional<LinkModel> default_link = LinkModel{});

  void add_node(const NodeId& node);
  bool has_node(const NodeId& node) const;
  void set_link(const NodeId& a, const NodeId& b, const LinkModel& model);
  void set_directed_link(const NodeId& from, const NodeId& to, const LinkModel& model);
  const LinkModel& link(const NodeId& from, const NodeId& to) const;

  void attach(const NodeId& node, Handler handler) override;
  void detach(const NodeId& node) override;
  void send(const NodeId& from, const NodeId& to, Bytes frame, double extra_delay_ms = 0) override;
  double now_ms() const override { return now_; }
  void schedule(double delay_ms, std::function<void()> fn) override;
  bool run_until(const std::function<bool()>& done,
                 double timeout_ms = std::numeric_limits<double>::infinity()) override;

  // Runs events until the queue is empty.
  void deliver_until_quiescent();
  // Runs events with timestamps <= t, then advances the clock to t.
  void run_until_time(double t_ms);
  bool step();
  bool idle() const { return queue_.empty(); }

  EventLog& log() { return log_; }
  // Per-frame deliver/drop/dup lines; on by default.
  void set_trace(bool on) { trace_ = on; }
  // Called after every processed event (used for invariant audits).
  void set_observer(std::function<void()> observer) { observer_ = std::move(observer); }

  struct Counters {
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t duplicated = 0;
  };
  const Counters& counters() const { return counters_; }

 private:
  struct Event {
    double time;
    std::uint64_t order;
    std::function<void()> action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.order > b.order;
    }
  };

  void push(double time, std::function<void()> action);
  void deliver(const NodeId& from, const NodeId& to, const std::string& label, const Bytes& frame);

  double now_ = 0;
  std::uint64_t order_ = 0;
  std::mt19937_64 rng_;
  std::optional<LinkModel> default_link_;
  std::map<NodeId, Handler> handlers_;
  std::map<NodeId, bool> nodes_;
  std::map<std::pair<NodeId, NodeId>, LinkModel> links_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  EventLog log_;
  std::function<void()> observer_;
  Counters counters_;
  bool trace_ = true;
};

}  // namespace arm
