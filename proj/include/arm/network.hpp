#pragma once

#include <functional>
#include <limits>
#include <span>

#include "arm/bytes.hpp"
#include "arm/envelope.hpp"

namespace arm {

// What the notifier needs from a transport backend: addressed frame
// delivery between nodes, a clock, timers, and a way to pump events until
// a condition holds.
class Network {
 public:
  using Handler = std::function<void(const NodeId& from, std::span<const std::uint8_t> frame)>;

  virtual ~Network() = default;

  virtual void attach(const NodeId& node, Handler handler) = 0;
  virtual void detach(const NodeId& node) = 0;
  // `extra_delay_ms` models local processing before the frame leaves.
  virtual void send(const NodeId& from, const NodeId& to, Bytes frame, double extra_delay_ms = 0) = 0;
  virtual double now_ms() const = 0;
  virtual void schedule(double delay_ms, std::function<void()> fn) = 0;
  // Processes events until `done()` holds. Returns false if the network
  // went idle or `timeout_ms` elapsed first.
  virtual bool run_until(const std::function<bool()>& done,
                         double timeout_ms = std::numeric_limits<double>::infinity()) = 0;
};

}  // namespace arm
