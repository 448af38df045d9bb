#pragma once

// Bodies carried inside MessageEnvelope payloads by the notifier.
// Row values are tagged: 0x00 null, 0x01 int64, 0x02 float64 (IEEE-754),
// 0x03 u32 length-prefixed UTF-8, 0x04 bool (one byte). Integers are
// big-endian throughout.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arm/bytes.hpp"
#include "arm/envelope.hpp"
#include "arm/error.hpp"
#include "arm/store.hpp"

namespace arm {

enum class Role : std::uint8_t { none = 0, owner = 1, replica = 2 };
std::string_view to_string(Role role);

void write_value(ByteWriter& w, const Value& v);
Value read_value(ByteReader& r);
void write_node(ByteWriter& w, const NodeId& n);
NodeId read_node(ByteReader& r);

// COMMAND: a client request routed to the owner, or a replication record
// broadcast by the owner (seq is then the relation sequence).
struct CommandBody {
  bool replication = false;
  // Sender's smallest unresolved seq; receivers may skip abandoned gaps.
  std::uint64_t low_watermark = 0;
  std::optional<std::uint64_t> expected_version;
  std::string text;

  friend bool operator==(const CommandBody&, const CommandBody&) = default;
};

struct Outcome {
  bool ok = true;
  ErrorCode code = ErrorCode::invalid_argument;
  std::string message;
  std::uint64_t affected = 0;
  std::uint64_t relation_seq = 0;

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

// ACK: completion of a COMMAND, HELLO or migration SNAPSHOT with the seq
// of the acknowledged message in the envelope.
struct AckBody {
  bool replication = false;
  MessageKind acked = MessageKind::command;
  Outcome outcome;

  friend bool operator==(const AckBody&, const AckBody&) = default;
};

struct ResultBody {
  Outcome outcome;
  ResultSet result;

  friend bool operator==(const ResultBody&, const ResultBody&) = default;
};

struct CachedReply {
  std::uint64_t seq = 0;
  Outcome outcome;

  friend bool operator==(const CachedReply&, const CachedReply&) = default;
};

// Dedup state of one client stream at the owner.
struct StreamState {
  NodeId sender;
  std::uint64_t last_applied = 0;
  std::vector<CachedReply> replies;

  friend bool operator==(const StreamState&, const StreamState&) = default;
};

enum class SnapshotPurpose : std::uint8_t { bootstrap = 0, migration = 1, abort = 2 };

struct SnapshotBody {
  SnapshotPurpose purpose = SnapshotPurpose::bootstrap;
  std::uint64_t epoch = 0;
  RelationData data;
  std::vector<StreamState> streams;
  std::vector<NodeId> replicas;

  friend bool operator==(const SnapshotBody&, const SnapshotBody&) = default;
};

// HELLO: announces `role` of the sender for the relation named in the
// sender address; for ownership announcements `owner` names the owner
// (which differs from the sender during a migration switchover). An empty
// payload is the node-scope connection handshake.
struct HelloBody {
  Role role = Role::none;
  std::uint64_t epoch = 0;
  NodeId owner;
  bool reject = false;

  friend bool operator==(const HelloBody&, const HelloBody&) = default;
};

Bytes encode_body(const CommandBody& b);
Bytes encode_body(const AckBody& b);
Bytes encode_body(const ResultBody& b);
Bytes encode_body(const SnapshotBody& b);
Bytes encode_body(const HelloBody& b);

CommandBody decode_command(std::span<const std::uint8_t> bytes);
AckBody decode_ack(std::span<const std::uint8_t> bytes);
ResultBody decode_result(std::span<const std::uint8_t> bytes);
SnapshotBody decode_snapshot(std::span<const std::uint8_t> bytes);
HelloBody decode_hello(std::span<const std::uint8_t> bytes);

void write_result_set(ByteWriter& w, const ResultSet& rs);
ResultSet read_result_set(ByteReader& r);
void write_relation_data(ByteWriter& w, const RelationData& d);
RelationData read_relation_data(ByteReader& r);

}  // namespace arm
