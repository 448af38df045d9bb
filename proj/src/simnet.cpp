#include "arm/simnet.hpp"

#include "arm/codec.hpp"
#include "arm/error.hpp"

namespace arm {

void LinkModel::validate() const {
  if (!(latency_ms >= 0)) throw Error(ErrorCode::invalid_argument, "latency_ms must be non-negative");
  if (!(loss_probability >= 0 && loss_probability <= 1))
    throw Error(ErrorCode::invalid_argument, "loss_probability must be in [0,1]");
  if (!(duplicate_probability >= 0 && duplicate_probability <= 1))
    throw Error(ErrorCode::invalid_argument, "duplicate_probability must be in [0,1]");
  if (!(jitter_ms >= 0)) throw Error(ErrorCode::invalid_argument, "jitter_ms must be non-negative");
  if (bandwidth_bytes_per_ms && !(*bandwidth_bytes_per_ms > 0))
    throw Error(ErrorCode::invalid_argument, "bandwidth_bytes_per_ms must be positive");
}

SimNet::SimNet(std::uint64_t seed, std::optional<LinkModel> default_link)
    : rng_(seed), default_link_(std::move(default_link)) {
  if (default_link_) default_link_->validate();
}

void SimNet::add_node(const NodeId& node) { nodes_[node] = true; }

bool SimNet::has_node(const NodeId& node) const { return nodes_.count(node) > 0; }

void SimNet::set_link(const NodeId& a, const NodeId& b, const LinkModel& model) {
  set_directed_link(a, b, model);
  set_directed_link(b, a, model);
}

void SimNet::set_directed_link(const NodeId& from, const NodeId& to, const LinkModel& model) {
  model.validate();
  links_[{from, to}] = model;
}

const LinkModel& SimNet::link(const NodeId& from, const NodeId& to) const {
  if (auto it = links_.find({from, to}); it != links_.end()) return it->second;
  if (!default_link_)
    throw Error(ErrorCode::unreachable, "no link " + from.str() + " -> " + to.str());
  return *default_link_;
}

void SimNet::attach(const NodeId& node, Handler handler) {
  add_node(node);
  handlers_[node] = std::move(handler);
}

void SimNet::detach(const NodeId& node) { handlers_.erase(node); }

void SimNet::push(double time, std::function<void()> action) {
  queue_.push(Event{time, order_++, std::move(action)});
}

void SimNet::schedule(double delay_ms, std::function<void()> fn) {
  push(now_ + std::max(0.0, delay_ms), std::move(fn));
}

void SimNet::send(const NodeId& from, const NodeId& to, Bytes frame, double extra_delay_ms) {
  if (!has_node(to)) throw Error(ErrorCode::invalid_argument, "send to unknown node " + to.str());
  ++counters_.sent;
  std::string label = "?";
  try {
    if (auto h = peek_header(frame)) label = std::string(to_string(h->kind));
  } catch (const Error&) {
  }
  const double start = now_ + std::max(0.0, extra_delay_ms);
  if (from == to) {
    auto shared = std::make_shared<Bytes>(std::move(frame));
    push(start, [this, from, to, label, shared] { deliver(from, to, label, *shared); });
    return;
  }
  const LinkModel& model = link(from, to);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::string route = from.str() + "->" + to.str() + " " + label;
  if (unit(rng_) < model.loss_probability) {
    ++counters_.dropped;
    if (trace_) log_.append(now_, "drop", route + " " + std::to_string(frame.size()) + "B");
    return;
  }
  const double transmission =
      model.bandwidth_bytes_per_ms ? static_cast<double>(frame.size()) / *model.bandwidth_bytes_per_ms : 0.0;
  auto delay = [&] { return model.latency_ms + transmission + model.jitter_ms * unit(rng_); };
  auto shared = std::make_shared<Bytes>(std::move(frame));
  push(start + delay(), [this, from, to, label, shared] { deliver(from, to, label, *shared); });
  if (unit(rng_) < model.duplicate_probability) {
    ++counters_.duplicated;
    if (trace_) log_.append(now_, "dup", route);
    push(start + delay(), [this, from, to, label, shared] { deliver(from, to, label, *shared); });
  }
}

void SimNet::deliver(const NodeId& from, const NodeId& to, const std::string& label, const Bytes& frame) {
  auto it = handlers_.find(to);
  const std::string route = from.str() + "->" + to.str() + " " + label + " " + std::to_string(frame.size()) + "B";
  if (it == handlers_.end()) {
    ++counters_.dropped;
    if (trace_) log_.append(now_, "drop-down", route);
    return;
  }
  ++counters_.delivered;
  if (trace_) log_.append(now_, "deliver", route);
  // Copy the handler: it may detach itself while running.
  auto handler = it->second;
  handler(from, frame);
}

bool SimNet::step() {
  if (queue_.empty()) return false;
  Event ev = queue_.top();
  queue_.pop();
  now_ = std::max(now_, ev.time);
  ev.action();
  if (observer_) observer_();
  return true;
}

bool SimNet::run_until(const std::function<bool()>& done, double timeout_ms) {
  const double deadline = now_ + timeout_ms;
  while (!done()) {
    if (queue_.empty() || queue_.top().time > deadline) return false;
    step();
  }
  return true;
}

void SimNet::deliver_until_quiescent() {
  while (step()) {
  }
}

void SimNet::run_until_time(double t_ms) {
  while (!queue_.empty() && queue_.top().time <= t_ms) step();
  now_ = std::max(now_, t_ms);
}

}  // namespace arm
