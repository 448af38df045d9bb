#include "arm/notifier.hpp"

#include <cmath>

#include "arm/codec.hpp"
#include "arm/error.hpp"

namespace arm {

double RetryPolicy::timeout(int attempt) const {
  return initial_timeout_ms * std::pow(backoff, attempt - 1);
}

double RetryPolicy::budget_ms() const {
  double total = 0;
  for (int i = 1; i <= max_attempts; ++i) total += timeout(i);
  return total;
}

namespace {

std::mutex g_hubs_mutex;

std::map<std::pair<const Network*, NodeId>, std::weak_ptr<Notifier>>& hubs() {
  static std::map<std::pair<const Network*, NodeId>, std::weak_ptr<Notifier>> instance;
  return instance;
}

Outcome failure(ErrorCode code, std::string message) {
  Outcome o;
  o.ok = false;
  o.code = code;
  o.message = std::move(message);
  return o;
}

// Rounds of announcement retries towards a migration target before the
// switchover is left to straggler forwarding.
constexpr int kTakeoverAnnounceRounds = 4;

}  // namespace

std::shared_ptr<Notifier> Notifier::init(Network& network, NodeConfig config) {
  std::lock_guard lock(g_hubs_mutex);
  auto& slot = hubs()[{&network, config.id}];
  if (auto existing = slot.lock()) return existing;
  std::shared_ptr<Notifier> hub(new Notifier(network, std::move(config)));
  slot = hub;
  std::weak_ptr<Notifier> weak = hub;
  network.attach(hub->id(), [weak](const NodeId& from, std::span<const std::uint8_t> frame) {
    if (auto self = weak.lock()) self->receive(from, frame);
  });
  return hub;
}

Notifier::Notifier(Network& network, NodeConfig config)
    : network_(network), config_(std::move(config)), store_(config_.schema) {
  for (const auto& p : config_.peers)
    if (p != config_.id) peers_.insert(p);
}

Notifier::~Notifier() {
  network_.detach(config_.id);
  std::lock_guard lock(g_hubs_mutex);
  auto it = hubs().find({&network_, config_.id});
  if (it != hubs().end() && it->second.expired()) hubs().erase(it);
}

ObjectAddress Notifier::address(const std::string& relation, Value object_id) const {
  return ObjectAddress::of(config_.id, relation, std::move(object_id));
}

Notifier::RelationState& Notifier::state(const std::string& relation) { return relations_[relation]; }

const Notifier::RelationState* Notifier::find_state(const std::string& relation) const {
  auto it = relations_.find(relation);
  return it == relations_.end() ? nullptr : &it->second;
}

void Notifier::emit(std::string_view kind, const std::string& details) {
  if (sink_) sink_(kind, config_.id.str() + " " + details);
}

void Notifier::add_peer(const NodeId& peer) {
  std::lock_guard lock(mutex_);
  if (peer == config_.id || !peers_.insert(peer).second) return;
  for (const auto& [name, st] : relations_) {
    if (st.role == Role::owner) announce_to(name, peer, HelloBody{Role::owner, st.epoch, config_.id, false});
    else if (st.role == Role::replica)
      announce_to(name, peer, HelloBody{Role::replica, st.epoch, st.owner.value_or(NodeId{}), false});
  }
}

ObjectAddress Notifier::register_relation(const std::string& relation, Role role) {
  std::lock_guard lock(mutex_);
  auto& st = state(relation);
  if (role == Role::owner) {
    if (st.role == Role::owner) return address(relation);
    if (st.role == Role::replica)
      throw Error(ErrorCode::registration_conflict, relation + " is registered here as replica");
    if (st.owner && *st.owner != config_.id)
      throw Error(ErrorCode::registration_conflict, relation + " is already owned by " + st.owner->str());
    if (!store_.has_relation(relation))
      throw Error(ErrorCode::unknown_relation, "owner registration needs local relation '" + relation + "'");
    st.role = Role::owner;
    st.owner = config_.id;
    st.epoch = std::max<std::uint64_t>(st.epoch, 1);
    emit("register", relation + " owner epoch=" + std::to_string(st.epoch));
    announce(relation, Role::owner, st.epoch, config_.id);
  } else if (role == Role::replica) {
    if (st.role == Role::owner)
      throw Error(ErrorCode::registration_conflict, relation + " is registered here as owner");
    if (st.role == Role::replica) return address(relation);
    st.role = Role::replica;
    st.bootstrapped = false;
    emit("register", relation + " replica");
    announce(relation, Role::replica, st.epoch, st.owner.value_or(NodeId{}));
    request_snapshot(relation);
  } else {
    throw Error(ErrorCode::invalid_argument, "cannot register with role none");
  }
  return address(relation);
}

// ---------------------------------------------------------------------------
// Reliable delivery

void Notifier::send_raw(const NodeId& to, const MessageEnvelope& envelope, double delay_ms) {
  try {
    network_.send(config_.id, to, encode(envelope), delay_ms);
  } catch (const Error& e) {
    emit("send-error", to.str() + " " + e.what());
  }
}

std::uint64_t Notifier::low_watermark(const RelationState& st) const {
  return st.unresolved.empty() ? st.next_client_seq + 1 : *st.unresolved.begin();
}

void Notifier::send_reliable(Key key, Outbound out) {
  auto [it, inserted] = outstanding_.insert_or_assign(key, std::move(out));
  (void)inserted;
  transmit(it->first);
}

void Notifier::transmit(const Key& key) {
  auto it = outstanding_.find(key);
  if (it == outstanding_.end()) return;
  auto& out = it->second;
  const int attempt = ++out.attempts;

  std::optional<NodeId> target = out.fixed_to;
  if (!target) {
    if (const auto* st = find_state(key.relation); st && st->owner) target = st->owner;
  }
  const bool skip = out.suppress_first && attempt == 1;
  if (target && !skip) {
    out.envelope.recipient.host = target->host;
    out.envelope.recipient.app = target->app;
    if (out.client_body) {
      out.client_body->low_watermark = low_watermark(state(key.relation));
      out.envelope.payload = encode_body(*out.client_body);
    }
    send_raw(*target, out.envelope);
  }
  std::weak_ptr<Notifier> weak = weak_from_this();
  network_.schedule(config_.retry.timeout(attempt), [weak, key, attempt] {
    if (auto self = weak.lock()) self->on_timeout(key, attempt);
  });
}

void Notifier::on_timeout(const Key& key, int attempt) {
  std::lock_guard lock(mutex_);
  auto it = outstanding_.find(key);
  if (it == outstanding_.end() || it->second.attempts != attempt) return;
  if (attempt >= config_.retry.max_attempts) {
    auto exhausted = std::move(it->second.on_exhausted);
    outstanding_.erase(it);
    if (exhausted) exhausted();
    return;
  }
  transmit(key);
}

bool Notifier::resolve(const Key& key, const MessageEnvelope& response) {
  auto it = outstanding_.find(key);
  if (it == outstanding_.end()) return false;
  auto handler = std::move(it->second.on_response);
  outstanding_.erase(it);
  if (handler) handler(response);
  return true;
}

std::size_t Notifier::outstanding() const {
  std::lock_guard lock(mutex_);
  return outstanding_.size();
}

// ---------------------------------------------------------------------------
// Client side

void Notifier::submit(const RelationalCommand& cmd, Completion done, std::optional<std::uint64_t> expected_version) {
  std::lock_guard lock(mutex_);
  const std::string relation = cmd.relation();
  const std::string text = render(cmd);
  auto& st = state(relation);

  if (cmd.kind == CommandKind::select && config_.read_from_replica && st.role == Role::replica && st.bootstrapped) {
    Reply reply;
    try {
      reply.result = store_.execute(cmd);
      reply.outcome.affected = reply.result->affected_count;
      reply.outcome.relation_seq = store_.sequence(relation);
    } catch (const Error& e) {
      reply.outcome = failure(e.code(), e.what());
    }
    done(reply);
    return;
  }
  if (!st.owner) {
    done(Reply{failure(ErrorCode::unknown_owner, "no known owner for " + relation), std::nullopt});
    return;
  }

  const auto seq = ++st.next_client_seq;
  st.unresolved.insert(seq);
  Outbound out;
  out.envelope.sender = address(relation);
  out.envelope.recipient = ObjectAddress::of(*st.owner, relation);
  out.envelope.seq = seq;
  out.envelope.kind = MessageKind::command;
  out.client_body = CommandBody{false, 0, expected_version, text};
  out.on_response = [this, relation, seq, done](const MessageEnvelope& resp) {
    state(relation).unresolved.erase(seq);
    Reply reply;
    try {
      if (resp.kind == MessageKind::result) {
        auto body = decode_result(resp.payload);
        reply.outcome = body.outcome;
        if (body.outcome.ok) reply.result = std::move(body.result);
      } else {
        reply.outcome = decode_ack(resp.payload).outcome;
      }
    } catch (const Error& e) {
      reply.outcome = failure(ErrorCode::malformed_payload, e.what());
    }
    done(reply);
  };
  out.on_exhausted = [this, relation, seq, done] {
    auto& st = state(relation);
    st.unresolved.erase(seq);
    if (st.owner) live_[*st.owner] = false;
    emit("request-failed", relation + " seq=" + std::to_string(seq) + " unreachable");
    done(Reply{failure(ErrorCode::unreachable, "owner of " + relation + " unreachable after " +
                                                   std::to_string(config_.retry.max_attempts) + " attempts"),
               std::nullopt});
  };
  send_reliable(Key{Channel::client, relation, seq, {}}, std::move(out));
}

Reply Notifier::send_command(const RelationalCommand& cmd, std::optional<std::uint64_t> expected_version) {
  auto slot = std::make_shared<std::optional<Reply>>();
  submit(cmd, [slot](const Reply& r) { *slot = r; }, expected_version);
  if (!*slot) network_.run_until([&] { return slot->has_value(); });
  if (!*slot) throw Error(ErrorCode::unreachable, "no reply for command on " + cmd.relation());
  const Reply& reply = **slot;
  if (!reply.outcome.ok) throw Error(reply.outcome.code, reply.outcome.message);
  return reply;
}

// ---------------------------------------------------------------------------
// Inbound dispatch

void Notifier::receive(const NodeId& from, std::span<const std::uint8_t> frame) {
  MessageEnvelope env;
  try {
    env = decode(frame);
  } catch (const Error& e) {
    std::lock_guard lock(mutex_);
    emit("decode-error", "from " + from.str() + ": " + e.what());
    return;
  }
  apply_remote(from, env);
}

void Notifier::apply_remote(const NodeId& from, const MessageEnvelope& env) {
  std::lock_guard lock(mutex_);
  live_[from] = true;
  try {
    switch (env.kind) {
      case MessageKind::ping: send_raw(from, MessageEnvelope{{}, {}, 0, MessageKind::pong, env.payload}); break;
      case MessageKind::pong: break;
      case MessageKind::hello:
        if (env.payload.empty()) {
          add_peer(from);
        } else {
          on_hello(from, env);
        }
        break;
      case MessageKind::command: on_command(from, env); break;
      case MessageKind::ack: on_ack(from, env); break;
      case MessageKind::result: on_result(env); break;
      case MessageKind::snapshot_req: on_snapshot_req(env); break;
      case MessageKind::snapshot: on_snapshot(from, env); break;
    }
  } catch (const Error& e) {
    emit("drop", std::string(to_string(env.kind)) + " from " + from.str() + ": " + e.what());
  }
}

void Notifier::send_ack(const NodeId& to, const MessageEnvelope& request, MessageKind acked, bool replication,
                        const Outcome& outcome) {
  MessageEnvelope ack;
  ack.sender = address(request.recipient.object_name);
  ack.recipient = request.sender;
  ack.seq = request.seq;
  ack.kind = MessageKind::ack;
  ack.payload = encode_body(AckBody{replication, acked, outcome});
  send_raw(to, ack);
}

void Notifier::on_ack(const NodeId& from, const MessageEnvelope& env) {
  const auto body = decode_ack(env.payload);
  const auto& relation = env.sender.object_name;
  switch (body.acked) {
    case MessageKind::command:
      if (body.replication) {
        auto& seen = state(relation).peer_seq[from];
        seen = std::max(seen, env.seq);
        resolve(Key{Channel::replication, relation, env.seq, from}, env);
      } else {
        if (body.outcome.ok) {
          auto& st = state(relation);
          if (st.owner) {
            auto& seen = st.peer_seq[*st.owner];
            seen = std::max(seen, body.outcome.relation_seq);
          }
        }
        resolve(Key{Channel::client, relation, env.seq, {}}, env);
      }
      break;
    case MessageKind::hello: resolve(Key{Channel::hello, relation, env.seq, from}, env); break;
    case MessageKind::snapshot: resolve(Key{Channel::transfer, relation, env.seq, from}, env); break;
    default: break;
  }
}

void Notifier::on_result(const MessageEnvelope& env) {
  resolve(Key{Channel::client, env.sender.object_name, env.seq, {}}, env);
}

// ---------------------------------------------------------------------------
// Registry announcements

void Notifier::announce(const std::string& relation, Role role, std::uint64_t epoch, const NodeId& owner,
                        bool delay_first) {
  for (const auto& peer : peers_) announce_to(relation, peer, HelloBody{role, epoch, owner, false}, delay_first);
}

void Notifier::announce_to(const std::string& relation, const NodeId& peer, const HelloBody& hello,
                           bool delay_first) {
  Outbound out;
  out.envelope.sender = address(relation);
  out.envelope.recipient = ObjectAddress::of(peer, relation);
  out.envelope.seq = ++control_seq_;
  out.envelope.kind = MessageKind::hello;
  out.envelope.payload = encode_body(hello);
  out.fixed_to = peer;
  out.suppress_first = delay_first;
  out.on_exhausted = [this, peer, relation] {
    live_[peer] = false;
    emit("announce-failed", relation + " to " + peer.str());
  };
  send_reliable(Key{Channel::hello, relation, out.envelope.seq, peer}, std::move(out));
}

void Notifier::on_hello(const NodeId& from, const MessageEnvelope& env) {
  const auto& relation = env.sender.object_name;
  const auto body = decode_hello(env.payload);
  send_ack(from, env, MessageKind::hello, false, Outcome{});
  auto& st = state(relation);

  if (body.reject) {
    if (st.role == Role::owner && st.epoch == body.epoch && body.owner != config_.id) {
      st.role = Role::none;
      st.owner = body.owner;
      registration_errors_.push_back("ownership of " + relation + " rejected in favour of " + body.owner.str());
      emit("register-rejected", relation + " owner=" + body.owner.str());
    }
    return;
  }

  switch (body.role) {
    case Role::owner: {
      auto accept = [&] {
        const bool was_owner = st.role == Role::owner;
        st.owner = body.owner;
        st.epoch = body.epoch;
        st.peer_roles[body.owner] = Role::owner;
        if (body.owner == config_.id) {
          if (st.takeover_epoch && *st.takeover_epoch == body.epoch) finish_takeover(relation);
        } else if (was_owner) {
          st.role = Role::none;
          registration_errors_.push_back("ownership of " + relation + " lost to " + body.owner.str());
          emit("register-rejected", relation + " owner=" + body.owner.str());
        }
      };
      if (!st.owner || body.epoch > st.epoch) {
        accept();
      } else if (body.epoch == st.epoch && *st.owner != body.owner) {
        const NodeId winner = std::min(*st.owner, body.owner);
        if (winner == *st.owner) {
          announce_to(relation, from, HelloBody{Role::owner, st.epoch, *st.owner, true});
        } else {
          accept();
        }
      }
      break;
    }
    case Role::replica: st.peer_roles[from] = Role::replica; break;
    case Role::none: st.peer_roles.erase(from); break;
  }
}

// ---------------------------------------------------------------------------
// Owner side

void Notifier::on_command(const NodeId& from, const MessageEnvelope& env) {
  const auto body = decode_command(env.payload);
  if (body.replication) {
    on_replication(from, env, body);
  } else {
    on_client_command(env, body);
  }
}

namespace {

bool same_request(const MessageEnvelope& a, const MessageEnvelope& b) {
  return a.kind == b.kind && a.seq == b.seq && a.sender.node() == b.sender.node() &&
         a.sender.object_name == b.sender.object_name;
}

void hold(std::vector<MessageEnvelope>& held, const MessageEnvelope& env) {
  for (const auto& h : held)
    if (same_request(h, env)) return;
  held.push_back(env);
}

}  // namespace

void Notifier::on_client_command(const MessageEnvelope& env, const CommandBody& body) {
  const auto& relation = env.recipient.object_name;
  auto& st = state(relation);
  if (st.role == Role::owner) {
    if (st.migrating) {
      hold(st.held, env);
    } else {
      process_stream(st, env);
    }
    return;
  }
  if (st.takeover_epoch) {
    hold(st.held, env);
    return;
  }
  if (st.owner && *st.owner != config_.id) {
    send_raw(*st.owner, env);
    return;
  }
  bool is_select = false;
  try {
    is_select = parse(body.text).kind == CommandKind::select;
  } catch (const Error&) {
  }
  reply_client(env, is_select, failure(ErrorCode::unknown_owner, "no known owner for " + relation), std::nullopt, 0);
}

void Notifier::process_stream(RelationState& st, const MessageEnvelope& env) {
  const auto body = decode_command(env.payload);
  auto& stream = st.streams[env.sender.node()];
  if (body.low_watermark > stream.last_applied + 1) stream.last_applied = body.low_watermark - 1;
  stream.pending.erase(stream.pending.begin(), stream.pending.upper_bound(stream.last_applied));
  stream.replies.erase(stream.replies.begin(), stream.replies.lower_bound(body.low_watermark));

  if (env.seq <= stream.last_applied) {
    RelationalCommand cmd;
    try {
      cmd = parse(body.text);
    } catch (const Error&) {
      return;
    }
    if (cmd.kind == CommandKind::select) {
      execute_client(st, stream, env);
    } else if (auto it = stream.replies.find(env.seq); it != stream.replies.end()) {
      reply_client(env, false, it->second, std::nullopt, 0);
    }
    return;
  }
  stream.pending.insert_or_assign(env.seq, env);
  while (!stream.pending.empty() && stream.pending.begin()->first == stream.last_applied + 1) {
    auto next = std::move(stream.pending.begin()->second);
    stream.pending.erase(stream.pending.begin());
    stream.last_applied = next.seq;
    execute_client(st, stream, next);
  }
}

void Notifier::execute_client(RelationState& st, Stream& stream, const MessageEnvelope& env) {
  const auto body = decode_command(env.payload);
  const auto& relation = env.recipient.object_name;
  RelationalCommand cmd;
  try {
    cmd = parse(body.text);
    if (cmd.relation() != relation)
      throw Error(ErrorCode::malformed_payload, "command relation does not match its address");
  } catch (const Error& e) {
    const auto outcome = failure(e.code(), e.what());
    stream.replies[env.seq] = outcome;
    reply_client(env, false, outcome, std::nullopt, 0);
    return;
  }

  const double delay = config_.processing_ms;
  if (observer_) observer_(cmd.kind, relation, delay);

  if (cmd.kind == CommandKind::select) {
    Outcome outcome;
    std::optional<ResultSet> rs;
    try {
      rs = store_.execute(cmd);
      outcome.affected = rs->affected_count;
      outcome.relation_seq = store_.sequence(relation);
    } catch (const Error& e) {
      outcome = failure(e.code(), e.what());
    }
    reply_client(env, true, outcome, std::move(rs), delay);
    return;
  }

  Outcome outcome;
  try {
    if (body.expected_version && store_.max_version(relation, cmd.spec.filters) > *body.expected_version)
      throw Error(ErrorCode::conflict, "stale origin version " + std::to_string(*body.expected_version) +
                                           " for " + relation);
    auto tx = store_.begin();
    try {
      outcome.affected = store_.execute(cmd, tx).affected_count;
      store_.commit(tx);
    } catch (...) {
      store_.abort(tx);
      throw;
    }
    outcome.relation_seq = store_.sequence(relation);
  } catch (const Error& e) {
    outcome = failure(e.code(), e.what());
  }
  if (outcome.ok) broadcast(st, relation, outcome.relation_seq, body.text);
  stream.replies[env.seq] = outcome;
  reply_client(env, false, outcome, std::nullopt, delay);
}

void Notifier::reply_client(const MessageEnvelope& request, bool is_select, const Outcome& outcome,
                            std::optional<ResultSet> result, double delay_ms) {
  MessageEnvelope reply;
  reply.sender = address(request.recipient.object_name);
  reply.recipient = request.sender;
  reply.seq = request.seq;
  if (is_select) {
    reply.kind = MessageKind::result;
    reply.payload = encode_body(ResultBody{outcome, result.value_or(ResultSet{})});
  } else {
    reply.kind = MessageKind::ack;
    reply.payload = encode_body(AckBody{false, MessageKind::command, outcome});
  }
  send_raw(request.sender.node(), reply, delay_ms);
}

void Notifier::broadcast(RelationState& st, const std::string& relation, std::uint64_t seq, const std::string& text) {
  for (const auto& replica : st.replicas) send_replication(relation, replica, seq, text);
}

void Notifier::send_replication(const std::string& relation, const NodeId& replica, std::uint64_t seq,
                                const std::string& text) {
  Outbound out;
  out.envelope.sender = address(relation);
  out.envelope.recipient = ObjectAddress::of(replica, relation);
  out.envelope.seq = seq;
  out.envelope.kind = MessageKind::command;
  out.envelope.payload = encode_body(CommandBody{true, 0, std::nullopt, text});
  out.fixed_to = replica;
  out.on_exhausted = [this, relation, replica, seq] {
    live_[replica] = false;
    emit("replicate-failed", relation + " seq=" + std::to_string(seq) + " to " + replica.str());
    resync(relation, replica);
  };
  send_reliable(Key{Channel::replication, relation, seq, replica}, std::move(out));
}

void Notifier::resync(const std::string& relation, const NodeId& replica) {
  auto& st = state(relation);
  if (st.role != Role::owner || st.migrating || !st.replicas.count(replica) || st.resyncing.count(replica)) return;
  st.resyncing.insert(replica);
  auto snap = make_snapshot(st, relation, SnapshotPurpose::bootstrap, st.epoch);
  emit("resync", relation + " to " + replica.str() + " seq=" + std::to_string(snap.data.seq));
  Outbound out;
  out.envelope.sender = address(relation);
  out.envelope.recipient = ObjectAddress::of(replica, relation);
  out.envelope.seq = ++control_seq_;
  out.envelope.kind = MessageKind::snapshot;
  out.envelope.payload = encode_body(snap);
  out.fixed_to = replica;
  out.on_response = [this, relation, replica](const MessageEnvelope&) { state(relation).resyncing.erase(replica); };
  out.on_exhausted = [this, relation, replica] {
    state(relation).resyncing.erase(replica);
    live_[replica] = false;
    emit("resync-failed", relation + " to " + replica.str());
  };
  send_reliable(Key{Channel::transfer, relation, out.envelope.seq, replica}, std::move(out));
}

void Notifier::on_snapshot_req(const MessageEnvelope& env) {
  const auto& relation = env.recipient.object_name;
  auto& st = state(relation);
  const NodeId requester = env.sender.node();
  if (st.role == Role::owner && !st.migrating) {
    if (requester == config_.id) return;
    st.replicas.insert(requester);
    resync(relation, requester);
  } else if ((st.role == Role::owner && st.migrating) || st.takeover_epoch) {
    hold(st.held, env);
  } else if (st.owner && *st.owner != config_.id) {
    send_raw(*st.owner, env);
  }
}

SnapshotBody Notifier::make_snapshot(RelationState& st, const std::string& relation, SnapshotPurpose purpose,
                                     std::uint64_t epoch) {
  SnapshotBody snap;
  snap.purpose = purpose;
  snap.epoch = epoch;
  auto tx = store_.begin();
  snap.data = store_.relation_data(relation);
  store_.commit(tx);
  for (const auto& [sender, stream] : st.streams) {
    StreamState s;
    s.sender = sender;
    s.last_applied = stream.last_applied;
    for (const auto& [seq, outcome] : stream.replies) s.replies.push_back({seq, outcome});
    snap.streams.push_back(std::move(s));
  }
  snap.replicas.assign(st.replicas.begin(), st.replicas.end());
  return snap;
}

SnapshotBody Notifier::snapshot(const std::string& relation) {
  std::lock_guard lock(mutex_);
  auto& st = state(relation);
  if (st.role != Role::owner) throw Error(ErrorCode::invalid_argument, "snapshot requires ownership of " + relation);
  return make_snapshot(st, relation, SnapshotPurpose::bootstrap, st.epoch);
}

void Notifier::install_snapshot(const SnapshotBody& snapshot) {
  std::lock_guard lock(mutex_);
  const auto& relation = snapshot.data.schema.name;
  auto& st = state(relation);
  if (st.role == Role::owner) throw Error(ErrorCode::invalid_argument, "cannot install over owned " + relation);
  if (st.role == Role::none) st.role = Role::replica;
  install_replica(st, snapshot);
}

void Notifier::install_replica(RelationState& st, const SnapshotBody& snap) {
  const auto& relation = snap.data.schema.name;
  store_.install(snap.data);
  st.bootstrapped = true;
  emit("install", relation + " seq=" + std::to_string(snap.data.seq) + " rows=" + std::to_string(snap.data.rows.size()));
  drain_replication(st, relation);
}

// ---------------------------------------------------------------------------
// Replica side

void Notifier::on_replication(const NodeId& from, const MessageEnvelope& env, const CommandBody&) {
  const auto& relation = env.recipient.object_name;
  auto& st = state(relation);
  send_ack(from, env, MessageKind::command, true, Outcome{});
  if (st.role != Role::replica) return;
  if (!st.bootstrapped) {
    st.replication_pending.insert_or_assign(env.seq, env);
    if (!bootstrap_requested(relation)) request_snapshot(relation);
    return;
  }
  if (env.seq <= store_.sequence(relation)) return;
  st.replication_pending.insert_or_assign(env.seq, env);
  drain_replication(st, relation);
}

void Notifier::drain_replication(RelationState& st, const std::string& relation) {
  auto applied = store_.sequence(relation);
  auto& pending = st.replication_pending;
  pending.erase(pending.begin(), pending.upper_bound(applied));
  while (!pending.empty() && pending.begin()->first == applied + 1) {
    auto env = std::move(pending.begin()->second);
    pending.erase(pending.begin());
    try {
      auto cmd = parse(decode_command(env.payload).text);
      auto tx = store_.begin();
      try {
        store_.execute(cmd, tx);
        store_.commit(tx);
      } catch (...) {
        store_.abort(tx);
        throw;
      }
    } catch (const Error& e) {
      emit("replica-apply-error", relation + " seq=" + std::to_string(env.seq) + ": " + e.what());
      st.bootstrapped = false;
      if (!bootstrap_requested(relation)) request_snapshot(relation);
      return;
    }
    applied = store_.sequence(relation);
    if (applied != env.seq) {
      emit("replica-seq-mismatch", relation + " expected=" + std::to_string(env.seq) + " got=" + std::to_string(applied));
      st.bootstrapped = false;
      if (!bootstrap_requested(relation)) request_snapshot(relation);
      return;
    }
  }
}

bool Notifier::bootstrap_requested(const std::string& relation) const {
  for (const auto& [key, out] : outstanding_)
    if (key.channel == Channel::snapshot_req && key.relation == relation) return true;
  return false;
}

void Notifier::request_snapshot(const std::string& relation) {
  Outbound out;
  out.envelope.sender = address(relation);
  out.envelope.recipient = ObjectAddress::of(state(relation).owner.value_or(NodeId{}), relation);
  out.envelope.seq = ++control_seq_;
  out.envelope.kind = MessageKind::snapshot_req;
  out.on_exhausted = [this, relation] {
    if (!state(relation).bootstrapped) {
      registration_errors_.push_back("replica bootstrap of " + relation + " failed: owner unreachable");
      emit("bootstrap-failed", relation);
    }
  };
  send_reliable(Key{Channel::snapshot_req, relation, out.envelope.seq, {}}, std::move(out));
}

void Notifier::on_snapshot(const NodeId& from, const MessageEnvelope& env) {
  auto body = decode_snapshot(env.payload);
  const auto relation = body.data.schema.name;
  auto& st = state(relation);
  switch (body.purpose) {
    case SnapshotPurpose::bootstrap: {
      for (auto it = outstanding_.begin(); it != outstanding_.end();) {
        if (it->first.channel == Channel::snapshot_req && it->first.relation == relation)
          it = outstanding_.erase(it);
        else
          ++it;
      }
      if (st.role == Role::replica && !st.takeover_epoch &&
          (!st.bootstrapped || !store_.has_relation(relation) || body.data.seq > store_.sequence(relation)))
        install_replica(st, body);
      send_ack(from, env, MessageKind::snapshot, false, Outcome{});
      break;
    }
    case SnapshotPurpose::migration: {
      if (fail_next_install_) {
        fail_next_install_ = false;
        emit("install-failed", relation + " injected");
        send_ack(from, env, MessageKind::snapshot, false, failure(ErrorCode::io_error, "injected install failure"));
        return;
      }
      if ((st.role == Role::owner && st.epoch >= body.epoch) || (st.takeover_epoch && *st.takeover_epoch == body.epoch)) {
        send_ack(from, env, MessageKind::snapshot, false, Outcome{});
        return;
      }
      try {
        store_.install(body.data);
      } catch (const Error& e) {
        send_ack(from, env, MessageKind::snapshot, false, failure(e.code(), e.what()));
        return;
      }
      st.role_before_takeover = st.role;
      st.takeover_epoch = body.epoch;
      st.takeover_streams = std::move(body.streams);
      st.takeover_replicas = std::move(body.replicas);
      st.held.clear();
      if (st.role == Role::replica) {
        st.bootstrapped = true;
        drain_replication(st, relation);
      }
      emit("takeover-installed", relation + " epoch=" + std::to_string(body.epoch) +
                                     " seq=" + std::to_string(body.data.seq));
      send_ack(from, env, MessageKind::snapshot, false, Outcome{});
      const auto epoch = body.epoch;
      const double expiry = config_.retry.budget_ms() * (kTakeoverAnnounceRounds + 1);
      std::weak_ptr<Notifier> weak = weak_from_this();
      network_.schedule(expiry, [weak, relation, epoch] {
        if (auto self = weak.lock()) {
          std::lock_guard lock(self->mutex_);
          self->discard_takeover(relation, epoch);
        }
      });
      break;
    }
    case SnapshotPurpose::abort:
      discard_takeover(relation, body.epoch);
      break;
  }
}

// ---------------------------------------------------------------------------
// Migration

void Notifier::migrate(const std::string& relation, const NodeId& to, std::function<void(const Outcome&)> done,
                       MigrationFault fault) {
  std::lock_guard lock(mutex_);
  auto& st = state(relation);
  if (st.role != Role::owner)
    throw Error(ErrorCode::invalid_argument, "migration source does not own " + relation);
  if (st.migrating) throw Error(ErrorCode::invalid_argument, relation + " is already migrating");
  if (to == config_.id) throw Error(ErrorCode::invalid_argument, "migration target equals source");
  peers_.insert(to);

  emit("migrate-begin", relation + " " + config_.id.str() + "->" + to.str());
  if (fault == MigrationFault::snapshot) {
    emit("migrate-abort", relation + " injected snapshot failure");
    if (done) done(failure(ErrorCode::io_error, "injected snapshot failure"));
    return;
  }
  st.migrating = true;
  st.migration_target = to;
  st.migration_done = std::move(done);

  auto snap = make_snapshot(st, relation, SnapshotPurpose::migration, st.epoch + 1);
  std::erase(snap.replicas, to);
  emit("migrate-snapshot", relation + " seq=" + std::to_string(snap.data.seq) +
                               " rows=" + std::to_string(snap.data.rows.size()));

  Outbound out;
  out.envelope.sender = address(relation);
  out.envelope.recipient = ObjectAddress::of(to, relation);
  out.envelope.seq = ++control_seq_;
  out.envelope.kind = MessageKind::snapshot;
  out.envelope.payload = encode_body(snap);
  out.fixed_to = to;
  out.on_response = [this, relation, fault](const MessageEnvelope& resp) {
    Outcome outcome;
    try {
      outcome = decode_ack(resp.payload).outcome;
    } catch (const Error& e) {
      outcome = failure(ErrorCode::malformed_payload, e.what());
    }
    if (!outcome.ok) {
      abort_migration(relation, "install failed: " + outcome.message);
    } else if (fault == MigrationFault::install) {
      abort_migration(relation, "injected install failure");
    } else if (fault == MigrationFault::before_switch) {
      abort_migration(relation, "injected failure before switchover");
    } else {
      switch_over(relation, fault == MigrationFault::after_switch);
    }
  };
  out.on_exhausted = [this, relation] { abort_migration(relation, "target unreachable"); };
  send_reliable(Key{Channel::transfer, relation, out.envelope.seq, to}, std::move(out));
}

void Notifier::abort_migration(const std::string& relation, const std::string& reason) {
  auto& st = state(relation);
  if (!st.migrating) return;
  const NodeId target = *st.migration_target;
  st.migrating = false;
  st.migration_target.reset();

  SnapshotBody abort;
  abort.purpose = SnapshotPurpose::abort;
  abort.epoch = st.epoch + 1;
  abort.data.schema = store_.schema(relation);
  MessageEnvelope env;
  env.sender = address(relation);
  env.recipient = ObjectAddress::of(target, relation);
  env.seq = ++control_seq_;
  env.kind = MessageKind::snapshot;
  env.payload = encode_body(abort);
  send_raw(target, env);

  emit("migrate-abort", relation + " " + reason);
  auto held = std::move(st.held);
  st.held.clear();
  for (const auto& h : held) {
    if (h.kind == MessageKind::command) process_stream(st, h);
    else if (h.kind == MessageKind::snapshot_req) on_snapshot_req(h);
  }
  auto done = std::move(st.migration_done);
  st.migration_done = nullptr;
  if (done) done(failure(ErrorCode::unreachable, "migration of " + relation + " aborted: " + reason));
}

void Notifier::switch_over(const std::string& relation, bool delay_announcement) {
  auto& st = state(relation);
  if (!st.migrating) return;
  const NodeId target = *st.migration_target;
  st.migrating = false;
  st.migration_target.reset();
  st.epoch += 1;
  st.owner = target;
  st.role = Role::none;
  st.peer_roles[target] = Role::owner;
  emit("migrate-switch", relation + " owner=" + target.str() + " epoch=" + std::to_string(st.epoch));

  const HelloBody hello{Role::owner, st.epoch, target, false};
  for (const auto& peer : peers_)
    if (peer != target) announce_to(relation, peer, hello, delay_announcement);

  // The target only starts serving once it hears the announcement, so keep
  // re-announcing to it for a few budgets.
  auto rounds = std::make_shared<int>(0);
  auto announce_target = std::make_shared<std::function<void()>>();
  std::weak_ptr<Notifier> weak = weak_from_this();
  *announce_target = [this, weak, relation, target, hello, rounds, announce_target, delay_announcement] {
    Outbound out;
    out.envelope.sender = address(relation);
    out.envelope.recipient = ObjectAddress::of(target, relation);
    out.envelope.seq = ++control_seq_;
    out.envelope.kind = MessageKind::hello;
    out.envelope.payload = encode_body(hello);
    out.fixed_to = target;
    out.suppress_first = delay_announcement && *rounds == 0;
    out.on_response = [announce_target](const MessageEnvelope&) { *announce_target = nullptr; };
    out.on_exhausted = [this, relation, target, rounds, announce_target] {
      if (++*rounds < kTakeoverAnnounceRounds && *announce_target) {
        (*announce_target)();
      } else {
        emit("announce-failed", relation + " to " + target.str());
        *announce_target = nullptr;
      }
    };
    send_reliable(Key{Channel::hello, relation, out.envelope.seq, target}, std::move(out));
  };
  (*announce_target)();

  auto held = std::move(st.held);
  st.held.clear();
  for (auto& [sender, stream] : st.streams)
    for (auto& [seq, env] : stream.pending) held.push_back(std::move(env));
  for (const auto& env : held) send_raw(target, env);
  st.streams.clear();
  st.replicas.clear();
  st.resyncing.clear();

  auto done = std::move(st.migration_done);
  st.migration_done = nullptr;
  if (done) done(Outcome{});

  const double grace = 2 * config_.retry.budget_ms();
  network_.schedule(grace, [weak, relation] {
    auto self = weak.lock();
    if (!self) return;
    std::lock_guard lock(self->mutex_);
    auto& s = self->state(relation);
    if (s.role == Role::none && !s.takeover_epoch && self->store_.has_relation(relation)) {
      self->store_.drop_relation(relation);
      self->emit("migrate-drop", relation);
    }
  });
}

void Notifier::finish_takeover(const std::string& relation) {
  auto& st = state(relation);
  st.role = Role::owner;
  st.owner = config_.id;
  st.epoch = *st.takeover_epoch;
  st.takeover_epoch.reset();
  st.streams.clear();
  for (auto& s : st.takeover_streams) {
    auto& stream = st.streams[s.sender];
    stream.last_applied = s.last_applied;
    for (auto& c : s.replies) stream.replies[c.seq] = c.outcome;
  }
  st.takeover_streams.clear();
  st.replicas.clear();
  for (const auto& r : st.takeover_replicas)
    if (r != config_.id) st.replicas.insert(r);
  st.takeover_replicas.clear();
  st.bootstrapped = false;
  st.replication_pending.clear();
  emit("takeover", relation + " epoch=" + std::to_string(st.epoch));
  for (const auto& peer : peers_)
    if (!st.peer_roles.count(peer) || st.peer_roles[peer] != Role::owner)
      announce_to(relation, peer, HelloBody{Role::owner, st.epoch, config_.id, false});

  auto held = std::move(st.held);
  st.held.clear();
  for (const auto& h : held) {
    if (h.kind == MessageKind::command) process_stream(st, h);
    else if (h.kind == MessageKind::snapshot_req) on_snapshot_req(h);
  }
}

void Notifier::discard_takeover(const std::string& relation, std::uint64_t epoch) {
  auto& st = state(relation);
  if (!st.takeover_epoch || *st.takeover_epoch != epoch) return;
  st.takeover_epoch.reset();
  st.takeover_streams.clear();
  st.takeover_replicas.clear();
  if (st.role_before_takeover == Role::none && st.role == Role::none && store_.has_relation(relation))
    store_.drop_relation(relation);
  emit("takeover-discarded", relation + " epoch=" + std::to_string(epoch));
  auto held = std::move(st.held);
  st.held.clear();
  if (st.owner && *st.owner != config_.id)
    for (const auto& h : held) send_raw(*st.owner, h);
}

// ---------------------------------------------------------------------------
// Introspection

void Notifier::ping(const NodeId& peer) {
  std::lock_guard lock(mutex_);
  send_raw(peer, MessageEnvelope{{}, {}, 0, MessageKind::ping, {}});
}

std::optional<NodeId> Notifier::owner_of(const std::string& relation) const {
  std::lock_guard lock(mutex_);
  const auto* st = find_state(relation);
  return st ? st->owner : std::nullopt;
}

std::uint64_t Notifier::epoch_of(const std::string& relation) const {
  std::lock_guard lock(mutex_);
  const auto* st = find_state(relation);
  return st ? st->epoch : 0;
}

Role Notifier::role(const std::string& relation) const {
  std::lock_guard lock(mutex_);
  const auto* st = find_state(relation);
  return st ? st->role : Role::none;
}

bool Notifier::accepts_mutations(const std::string& relation) const {
  std::lock_guard lock(mutex_);
  const auto* st = find_state(relation);
  return st && st->role == Role::owner && !st->migrating;
}

bool Notifier::migrating(const std::string& relation) const {
  std::lock_guard lock(mutex_);
  const auto* st = find_state(relation);
  return st && st->migrating;
}

bool Notifier::pending_takeover(const std::string& relation) const {
  std::lock_guard lock(mutex_);
  const auto* st = find_state(relation);
  return st && st->takeover_epoch.has_value();
}

std::uint64_t Notifier::last_applied(const std::string& relation) const {
  std::lock_guard lock(mutex_);
  return store_.has_relation(relation) ? store_.sequence(relation) : 0;
}

bool Notifier::live(const NodeId& node) const {
  std::lock_guard lock(mutex_);
  auto it = live_.find(node);
  return it == live_.end() || it->second;
}

std::vector<RemoteRegistryEntry> Notifier::registry() const {
  std::lock_guard lock(mutex_);
  std::vector<RemoteRegistryEntry> out;
  auto seen_seq = [&](const RelationState& st, const NodeId& node, const std::string& relation) -> std::uint64_t {
    if (node == config_.id) return store_.has_relation(relation) ? store_.sequence(relation) : 0;
    auto it = st.peer_seq.find(node);
    return it == st.peer_seq.end() ? 0 : it->second;
  };
  auto is_live = [&](const NodeId& node) {
    auto it = live_.find(node);
    return it == live_.end() || it->second;
  };
  for (const auto& [relation, st] : relations_) {
    if (st.owner)
      out.push_back({ObjectAddress::of(*st.owner, relation), relation, Role::owner,
                     seen_seq(st, *st.owner, relation), is_live(*st.owner)});
    if (st.role == Role::replica)
      out.push_back({address(relation), relation, Role::replica, seen_seq(st, config_.id, relation), true});
    for (const auto& [node, role] : st.peer_roles)
      if (role == Role::replica && node != config_.id)
        out.push_back({ObjectAddress::of(node, relation), relation, Role::replica, seen_seq(st, node, relation),
                       is_live(node)});
  }
  return out;
}

std::vector<std::string> Notifier::registration_errors() const {
  std::lock_guard lock(mutex_);
  return registration_errors_;
}

}  // namespace arm
