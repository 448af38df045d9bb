#include "arm/codec.hpp"

#include <algorithm>
#include <charconv>

#include "arm/error.hpp"

namespace arm {

std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::hello: return "HELLO";
    case MessageKind::command: return "COMMAND";
    case MessageKind::ack: return "ACK";
    case MessageKind::snapshot_req: return "SNAPSHOT_REQ";
    case MessageKind::snapshot: return "SNAPSHOT";
    case MessageKind::ping: return "PING";
    case MessageKind::pong: return "PONG";
    case MessageKind::result: return "RESULT";
  }
  return "?";
}

bool is_message_kind(std::uint8_t byte) { return byte >= 0x01 && byte <= 0x08; }

namespace {

bool link_level(MessageKind kind) { return kind == MessageKind::ping || kind == MessageKind::pong; }

void write_address(ByteWriter& w, const ObjectAddress& a) {
  w.str(a.host);
  w.str(std::to_string(a.app));
  w.str(a.object_name);
  w.str(render_literal(a.object_id));
}

ObjectAddress read_address(ByteReader& r) {
  ObjectAddress a;
  a.host = r.str();
  const auto app = r.str();
  auto res = std::from_chars(app.data(), app.data() + app.size(), a.app);
  if (res.ec != std::errc() || res.ptr != app.data() + app.size() || std::to_string(a.app) != app)
    throw Error(ErrorCode::malformed_payload, "non-canonical app field '" + app + "'");
  a.object_name = r.str();
  const auto id = r.str();
  try {
    a.object_id = parse_literal(id);
  } catch (const Error&) {
    throw Error(ErrorCode::malformed_payload, "bad object id '" + id + "'");
  }
  if (render_literal(a.object_id) != id)
    throw Error(ErrorCode::malformed_payload, "non-canonical object id '" + id + "'");
  return a;
}

}  // namespace

Bytes encode(const MessageEnvelope& e) {
  ByteWriter body;
  if (link_level(e.kind)) {
    if (e.seq != 0 || !(e.sender == ObjectAddress{}) || !(e.recipient == ObjectAddress{}))
      throw Error(ErrorCode::invalid_argument, "PING/PONG envelopes carry no addressing");
  } else {
    write_address(body, e.sender);
    write_address(body, e.recipient);
    body.u64(e.seq);
  }
  body.raw(e.payload);
  const auto& payload = body.bytes();
  if (payload.size() > kMaxFramePayload) throw Error(ErrorCode::invalid_argument, "frame payload too large");

  ByteWriter frame;
  frame.raw(kFrameMagic);
  frame.u8(kFrameVersion);
  frame.u8(static_cast<std::uint8_t>(e.kind));
  frame.u32(static_cast<std::uint32_t>(payload.size()));
  frame.raw(payload);
  return frame.take();
}

std::optional<FrameHeader> peek_header(std::span<const std::uint8_t> bytes) {
  const auto magic_len = std::min(bytes.size(), kFrameMagic.size());
  if (!std::equal(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(magic_len), kFrameMagic.begin()))
    throw Error(ErrorCode::bad_magic, "bad frame magic");
  if (bytes.size() >= 5 && bytes[4] != kFrameVersion)
    throw Error(ErrorCode::unsupported_version, "unsupported frame version " + std::to_string(bytes[4]));
  if (bytes.size() >= 6 && !is_message_kind(bytes[5]))
    throw Error(ErrorCode::malformed_payload, "unknown message type " + std::to_string(bytes[5]));
  if (bytes.size() < kFrameHeaderSize) return std::nullopt;
  ByteReader r(bytes.subspan(6, 4));
  const auto length = r.u32();
  if (length > kMaxFramePayload) throw Error(ErrorCode::protocol_violation, "frame too large");
  return FrameHeader{static_cast<MessageKind>(bytes[5]), length};
}

MessageEnvelope decode(std::span<const std::uint8_t> bytes) {
  auto header = peek_header(bytes);
  if (!header) throw Error(ErrorCode::truncated_frame, "frame shorter than its header");
  const auto total = kFrameHeaderSize + header->length;
  if (bytes.size() < total) throw Error(ErrorCode::truncated_frame, "frame payload truncated");
  if (bytes.size() > total) throw Error(ErrorCode::length_mismatch, "bytes beyond declared frame length");

  MessageEnvelope e;
  e.kind = header->kind;
  ByteReader r(bytes.subspan(kFrameHeaderSize));
  if (!link_level(e.kind)) {
    e.sender = read_address(r);
    e.recipient = read_address(r);
    e.seq = r.u64();
  }
  auto rest = r.rest();
  e.payload.assign(rest.begin(), rest.end());
  return e;
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) {
  if (start_ > 0 && start_ == buffer_.size()) {
    buffer_.clear();
    start_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<MessageEnvelope> FrameReader::next() {
  std::span<const std::uint8_t> view(buffer_.data() + start_, buffer_.size() - start_);
  auto header = peek_header(view);
  if (!header) return std::nullopt;
  const auto total = kFrameHeaderSize + header->length;
  if (view.size() < total) return std::nullopt;
  auto envelope = decode(view.first(total));
  start_ += total;
  if (start_ > 4096 && start_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(start_));
    start_ = 0;
  }
  return envelope;
}

}  // namespace arm
