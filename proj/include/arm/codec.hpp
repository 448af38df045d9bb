#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "arm/envelope.hpp"

namespace arm {

// Frame layout (all integers big-endian):
//   magic "ARM1" | version 0x01 | msg_type | length u32 | payload
// PING and PONG frames carry the envelope payload only. Every other kind
// prefixes the payload with sender and recipient addresses (four u32
// length-prefixed UTF-8 strings each: host, app as decimal text, object
// name, object id as a canonical literal) and a u64 sequence number.
inline constexpr std::array<std::uint8_t, 4> kFrameMagic = {'A', 'R', 'M', '1'};
inline constexpr std::uint8_t kFrameVersion = 0x01;
inline constexpr std::size_t kFrameHeaderSize = 10;
inline constexpr std::uint32_t kMaxFramePayload = 64u << 20;
inline constexpr std::uint16_t kDefaultPort = 7431;

Bytes encode(const MessageEnvelope& envelope);

// Decodes exactly one frame occupying all of `bytes`.
MessageEnvelope decode(std::span<const std::uint8_t> bytes);

// Validated header of the frame at the start of `bytes`, or nullopt when
// fewer than kFrameHeaderSize bytes are present.
struct FrameHeader {
  MessageKind kind;
  std::uint32_t length;
};
std::optional<FrameHeader> peek_header(std::span<const std::uint8_t> bytes);

// Incremental decoder for a byte stream of concatenated frames.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  // Next complete frame, or nullopt if more bytes are needed. Throws on a
  // malformed frame; the reader is unusable afterwards.
  std::optional<MessageEnvelope> next();
  std::size_t buffered() const { return buffer_.size() - start_; }

 private:
  Bytes buffer_;
  std::size_t start_ = 0;
};

}  // namespace arm
