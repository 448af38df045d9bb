#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "arm/envelope.hpp"
#include "arm/network.hpp"
#include "arm/protocol.hpp"
#include "arm/query.hpp"
#include "arm/store.hpp"

namespace arm {

// Sender-side retransmission: attempt k waits initial * backoff^(k-1)
// before resending; after max_attempts the request fails.
struct RetryPolicy {
  int max_attempts = 5;
  double initial_timeout_ms = 50;
  double backoff = 2;

  double timeout(int attempt) const;
  // Total time from first send until the last attempt times out.
  double budget_ms() const;
};

struct NodeConfig {
  NodeId id;
  std::vector<Relation> schema;
  std::vector<NodeId> peers;
  RetryPolicy retry;
  bool read_from_replica = false;
  // Local execution time charged before replies leave the owner.
  double processing_ms = 0;
};

struct RemoteRegistryEntry {
  ObjectAddress address;
  std::string relation;
  Role role = Role::none;
  std::uint64_t last_applied_seq = 0;
  bool live = true;
};

// Completion of a routed command: the owner's outcome, plus rows for selects.
struct Reply {
  Outcome outcome;
  std::optional<ResultSet> result;
};

enum class MigrationFault : std::uint8_t { none, snapshot, install, before_switch, after_switch };

// Per-process message hub: registers relations, routes commands to their
// owner, applies replication streams in order with dedup, answers with
// ACK/RESULT and keeps the registry of remote objects. One instance per
// (network, node identity).
class Notifier : public std::enable_shared_from_this<Notifier> {
 public:
  using Completion = std::function<void(const Reply&)>;
  using EventSink = std::function<void(std::string_view kind, const std::string& details)>;
  using ExecutionObserver = std::function<void(CommandKind, const std::string& relation, double duration_ms)>;

  // Returns the existing hub for config.id on this network, or creates one.
  static std::shared_ptr<Notifier> init(Network& network, NodeConfig config);

  ~Notifier();
  Notifier(const Notifier&) = delete;
  Notifier& operator=(const Notifier&) = delete;

  const NodeId& id() const { return config_.id; }
  ObjectAddress address(const std::string& relation, Value object_id = {}) const;
  Store& store() { return store_; }
  const NodeConfig& config() const { return config_; }

  void add_peer(const NodeId& peer);
  ObjectAddress register_relation(const std::string& relation, Role role);

  // Asynchronous routing; `done` runs once with the owner's outcome or a
  // local failure (unknown owner, unreachable).
  void submit(const RelationalCommand& cmd, Completion done,
              std::optional<std::uint64_t> expected_version = std::nullopt);
  // Blocking variant that pumps the network until the reply arrives.
  // Throws Error carrying the failure code.
  Reply send_command(const RelationalCommand& cmd,
                     std::optional<std::uint64_t> expected_version = std::nullopt);

  // Entry point for every frame the network delivers to this node.
  void receive(const NodeId& from, std::span<const std::uint8_t> frame);
  void apply_remote(const NodeId& from, const MessageEnvelope& envelope);

  SnapshotBody snapshot(const std::string& relation);
  void install_snapshot(const SnapshotBody& snapshot);

  // Hands ownership of `relation` to `to` (snapshot, install, buffer,
  // replay, switch, forward, drop). `done` gets ok=false when the
  // migration aborted and this node stayed owner.
  void migrate(const std::string& relation, const NodeId& to, std::function<void(const Outcome&)> done,
               MigrationFault fault = MigrationFault::none);
  // One-shot fault: the next migration snapshot installed here fails.
  void inject_install_failure() { fail_next_install_ = true; }

  void ping(const NodeId& peer);

  std::optional<NodeId> owner_of(const std::string& relation) const;
  std::uint64_t epoch_of(const std::string& relation) const;
  Role role(const std::string& relation) const;
  bool accepts_mutations(const std::string& relation) const;
  bool migrating(const std::string& relation) const;
  bool pending_takeover(const std::string& relation) const;
  std::uint64_t last_applied(const std::string& relation) const;
  std::vector<RemoteRegistryEntry> registry() const;
  std::vector<std::string> registration_errors() const;
  bool live(const NodeId& node) const;
  std::size_t outstanding() const;

  void set_event_sink(EventSink sink) { sink_ = std::move(sink); }
  void set_execution_observer(ExecutionObserver observer) { observer_ = std::move(observer); }

 private:
  struct Stream {
    std::uint64_t last_applied = 0;
    std::map<std::uint64_t, MessageEnvelope> pending;
    std::map<std::uint64_t, Outcome> replies;
  };

  struct RelationState {
    Role role = Role::none;
    std::optional<NodeId> owner;
    std::uint64_t epoch = 0;
    std::map<NodeId, Role> peer_roles;
    std::map<NodeId, std::uint64_t> peer_seq;

    // Owner side.
    std::map<NodeId, Stream> streams;
    std::set<NodeId> replicas;
    bool migrating = false;
    std::optional<NodeId> migration_target;
    std::vector<MessageEnvelope> held;
    std::function<void(const Outcome&)> migration_done;
    std::set<NodeId> resyncing;

    // Replica side.
    bool bootstrapped = false;
    std::map<std::uint64_t, MessageEnvelope> replication_pending;

    // Migration target side.
    std::optional<std::uint64_t> takeover_epoch;
    Role role_before_takeover = Role::none;
    std::vector<StreamState> takeover_streams;
    std::vector<NodeId> takeover_replicas;

    // Client side.
    std::uint64_t next_client_seq = 0;
    std::set<std::uint64_t> unresolved;
  };

  enum class Channel : std::uint8_t { client, replication, hello, snapshot_req, transfer };

  struct Key {
    Channel channel;
    std::string relation;
    std::uint64_t seq;
    NodeId node;
    friend auto operator<=>(const Key&, const Key&) = default;
  };

  struct Outbound {
    MessageEnvelope envelope;
    std::optional<NodeId> fixed_to;
    std::optional<CommandBody> client_body;
    int attempts = 0;
    bool suppress_first = false;
    std::function<void(const MessageEnvelope&)> on_response;
    std::function<void()> on_exhausted;
  };

  Notifier(Network& network, NodeConfig config);

  RelationState& state(const std::string& relation);
  const RelationState* find_state(const std::string& relation) const;
  void emit(std::string_view kind, const std::string& details);

  // Reliable delivery.
  void send_reliable(Key key, Outbound out);
  void transmit(const Key& key);
  void on_timeout(const Key& key, int attempt);
  bool resolve(const Key& key, const MessageEnvelope& response);
  void send_raw(const NodeId& to, const MessageEnvelope& envelope, double delay_ms = 0);
  std::uint64_t low_watermark(const RelationState& st) const;

  // Inbound handlers.
  void on_hello(const NodeId& from, const MessageEnvelope& env);
  void on_command(const NodeId& from, const MessageEnvelope& env);
  void on_client_command(const MessageEnvelope& env, const CommandBody& body);
  void on_replication(const NodeId& from, const MessageEnvelope& env, const CommandBody& body);
  void on_ack(const NodeId& from, const MessageEnvelope& env);
  void on_result(const MessageEnvelope& env);
  void on_snapshot_req(const MessageEnvelope& env);
  void on_snapshot(const NodeId& from, const MessageEnvelope& env);

  void process_stream(RelationState& st, const MessageEnvelope& env);
  void execute_client(RelationState& st, Stream& stream, const MessageEnvelope& env);
  void reply_client(const MessageEnvelope& request, bool is_select, const Outcome& outcome,
                    std::optional<ResultSet> result, double delay_ms);
  void broadcast(RelationState& st, const std::string& relation, std::uint64_t seq, const std::string& text);
  void send_replication(const std::string& relation, const NodeId& replica, std::uint64_t seq,
                        const std::string& text);
  void resync(const std::string& relation, const NodeId& replica);
  void drain_replication(RelationState& st, const std::string& relation);
  bool bootstrap_requested(const std::string& relation) const;
  void request_snapshot(const std::string& relation);
  void announce(const std::string& relation, Role role, std::uint64_t epoch, const NodeId& owner,
                bool delay_first = false);
  void announce_to(const std::string& relation, const NodeId& peer, const HelloBody& hello,
                   bool delay_first = false);
  void send_ack(const NodeId& to, const MessageEnvelope& request, MessageKind acked, bool replication,
                const Outcome& outcome);

  SnapshotBody make_snapshot(RelationState& st, const std::string& relation, SnapshotPurpose purpose,
                             std::uint64_t epoch);
  void install_replica(RelationState& st, const SnapshotBody& snap);
  void abort_migration(const std::string& relation, const std::string& reason);
  void switch_over(const std::string& relation, bool delay_announcement);
  void finish_takeover(const std::string& relation);
  void discard_takeover(const std::string& relation, std::uint64_t epoch);

  Network& network_;
  NodeConfig config_;
  Store store_;
  std::set<NodeId> peers_;
  std::map<std::string, RelationState> relations_;
  std::map<Key, Outbound> outstanding_;
  std::map<NodeId, bool> live_;
  std::vector<std::string> registration_errors_;
  std::uint64_t control_seq_ = 0;
  bool fail_next_install_ = false;
  EventSink sink_;
  ExecutionObserver observer_;
  mutable std::recursive_mutex mutex_;
};

}  // namespace arm
