#pragma once

#include <compare>
#include <cstdint>
#include <string>

#include "arm/bytes.hpp"
#include "arm/value.hpp"

namespace arm {

// Node scope of an address: host (ip or url) plus application (process id).
struct NodeId {
  std::string host;
  std::int64_t app = 0;

  std::string str() const { return host + ":" + std::to_string(app); }

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
  friend bool operator==(const NodeId&, const NodeId&) = default;
};

// 3-tier object identity: host, application, object name + id.
struct ObjectAddress {
  std::string host;
  std::int64_t app = 0;
  std::string object_name;
  Value object_id;

  static ObjectAddress of(const NodeId& node, std::string name = {}, Value id = {}) {
    return {node.host, node.app, std::move(name), std::move(id)};
  }
  NodeId node() const { return {host, app}; }

  friend bool operator==(const ObjectAddress&, const ObjectAddress&) = default;
};

enum class MessageKind : std::uint8_t {
  hello = 0x01,
  command = 0x02,
  ack = 0x03,
  snapshot_req = 0x04,
  snapshot = 0x05,
  ping = 0x06,
  pong = 0x07,
  result = 0x08,
};

std::string_view to_string(MessageKind kind);
bool is_message_kind(std::uint8_t byte);

struct MessageEnvelope {
  ObjectAddress sender;
  ObjectAddress recipient;
  std::uint64_t seq = 0;
  MessageKind kind = MessageKind::ping;
  Bytes payload;

  friend bool operator==(const MessageEnvelope&, const MessageEnvelope&) = default;
};

}  // namespace arm
