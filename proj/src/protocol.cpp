#include "arm/protocol.hpp"

namespace arm {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::none: return "none";
    case Role::owner: return "owner";
    case Role::replica: return "replica";
  }
  return "?";
}

void write_value(ByteWriter& w, const Value& v) {
  if (v.is_null()) {
    w.u8(0x00);
  } else if (v.is_int()) {
    w.u8(0x01);
    w.i64(v.as_int());
  } else if (v.is_float()) {
    w.u8(0x02);
    w.f64(v.as_float());
  } else if (v.is_text()) {
    w.u8(0x03);
    w.str(v.as_text());
  } else {
    w.u8(0x04);
    w.u8(v.as_bool() ? 1 : 0);
  }
}

Value read_value(ByteReader& r) {
  switch (r.u8()) {
    case 0x00: return Value::null();
    case 0x01: return Value(r.i64());
    case 0x02: return Value(r.f64());
    case 0x03: return Value(r.str());
    case 0x04: {
      const auto b = r.u8();
      if (b > 1) throw Error(ErrorCode::malformed_payload, "bad bool byte");
      return Value(b == 1);
    }
    default: throw Error(ErrorCode::malformed_payload, "unknown value tag");
  }
}

void write_node(ByteWriter& w, const NodeId& n) {
  w.str(n.host);
  w.i64(n.app);
}

NodeId read_node(ByteReader& r) {
  NodeId n;
  n.host = r.str();
  n.app = r.i64();
  return n;
}

namespace {

bool read_flag(ByteReader& r) {
  const auto b = r.u8();
  if (b > 1) throw Error(ErrorCode::malformed_payload, "bad flag byte");
  return b == 1;
}

void write_outcome(ByteWriter& w, const Outcome& o) {
  w.u8(o.ok ? 1 : 0);
  w.u16(static_cast<std::uint16_t>(o.code));
  w.str(o.message);
  w.u64(o.affected);
  w.u64(o.relation_seq);
}

Outcome read_outcome(ByteReader& r) {
  Outcome o;
  o.ok = read_flag(r);
  const auto code = r.u16();
  if (code > static_cast<std::uint16_t>(ErrorCode::validation_error))
    throw Error(ErrorCode::malformed_payload, "unknown error code");
  o.code = static_cast<ErrorCode>(code);
  o.message = r.str();
  o.affected = r.u64();
  o.relation_seq = r.u64();
  return o;
}

}  // namespace

void write_result_set(ByteWriter& w, const ResultSet& rs) {
  w.u32(static_cast<std::uint32_t>(rs.columns.size()));
  for (const auto& c : rs.columns) w.str(c);
  w.u32(static_cast<std::uint32_t>(rs.rows.size()));
  for (const auto& row : rs.rows) {
    w.u32(static_cast<std::uint32_t>(row.size()));
    for (const auto& v : row) write_value(w, v);
  }
  w.u64(rs.affected_count);
}

ResultSet read_result_set(ByteReader& r) {
  ResultSet rs;
  auto ncols = r.u32();
  for (std::uint32_t i = 0; i < ncols; ++i) rs.columns.push_back(r.str());
  auto nrows = r.u32();
  for (std::uint32_t i = 0; i < nrows; ++i) {
    Row row(r.u32());
    for (auto& v : row) v = read_value(r);
    rs.rows.push_back(std::move(row));
  }
  rs.affected_count = r.u64();
  return rs;
}

void write_relation_data(ByteWriter& w, const RelationData& d) {
  w.str(d.schema.name);
  w.str(d.schema.primary_key);
  w.u32(static_cast<std::uint32_t>(d.schema.columns.size()));
  for (const auto& c : d.schema.columns) {
    w.str(c.name);
    w.u8(static_cast<std::uint8_t>(c.type));
  }
  w.u64(d.seq);
  w.u32(static_cast<std::uint32_t>(d.rows.size()));
  for (const auto& [key, row] : d.rows) {
    w.u64(row.version);
    for (const auto& v : row.values) write_value(w, v);
  }
}

RelationData read_relation_data(ByteReader& r) {
  RelationData d;
  d.schema.name = r.str();
  d.schema.primary_key = r.str();
  const auto ncols = r.u32();
  for (std::uint32_t i = 0; i < ncols; ++i) {
    Column c;
    c.name = r.str();
    const auto t = r.u8();
    if (t > static_cast<std::uint8_t>(ColumnType::boolean)) throw Error(ErrorCode::malformed_payload, "bad column type");
    c.type = static_cast<ColumnType>(t);
    d.schema.columns.push_back(std::move(c));
  }
  try {
    validate(d.schema);
  } catch (const Error& e) {
    throw Error(ErrorCode::malformed_payload, e.what());
  }
  d.seq = r.u64();
  const auto key = d.schema.key_index();
  const auto nrows = r.u32();
  for (std::uint32_t i = 0; i < nrows; ++i) {
    StoredRow row;
    row.version = r.u64();
    row.values.resize(ncols);
    for (std::uint32_t c = 0; c < ncols; ++c) {
      row.values[c] = read_value(r);
      if (!row.values[c].matches(d.schema.columns[c].type))
        throw Error(ErrorCode::malformed_payload, "row value type mismatch");
    }
    Value pk = row.values[key];
    if (pk.is_null() || !d.rows.emplace(std::move(pk), std::move(row)).second)
      throw Error(ErrorCode::malformed_payload, "bad primary key in snapshot rows");
  }
  return d;
}

Bytes encode_body(const CommandBody& b) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>((b.replication ? 0x01 : 0) | (b.expected_version ? 0x02 : 0)));
  w.u64(b.low_watermark);
  w.u64(b.expected_version.value_or(0));
  w.str(b.text);
  return w.take();
}

CommandBody decode_command(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  CommandBody b;
  const auto flags = r.u8();
  if (flags & ~0x03) throw Error(ErrorCode::malformed_payload, "unknown command flags");
  b.replication = flags & 0x01;
  b.low_watermark = r.u64();
  const auto expected = r.u64();
  if (flags & 0x02) b.expected_version = expected;
  b.text = r.str();
  r.expect_done();
  return b;
}

Bytes encode_body(const AckBody& b) {
  ByteWriter w;
  w.u8(b.replication ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(b.acked));
  write_outcome(w, b.outcome);
  return w.take();
}

AckBody decode_ack(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  AckBody b;
  b.replication = read_flag(r);
  const auto kind = r.u8();
  if (!is_message_kind(kind)) throw Error(ErrorCode::malformed_payload, "bad acked kind");
  b.acked = static_cast<MessageKind>(kind);
  b.outcome = read_outcome(r);
  r.expect_done();
  return b;
}

Bytes encode_body(const ResultBody& b) {
  ByteWriter w;
  write_outcome(w, b.outcome);
  write_result_set(w, b.result);
  return w.take();
}

ResultBody decode_result(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  ResultBody b;
  b.outcome = read_outcome(r);
  b.result = read_result_set(r);
  r.expect_done();
  return b;
}

Bytes encode_body(const SnapshotBody& b) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(b.purpose));
  w.u64(b.epoch);
  write_relation_data(w, b.data);
  w.u32(static_cast<std::uint32_t>(b.streams.size()));
  for (const auto& s : b.streams) {
    write_node(w, s.sender);
    w.u64(s.last_applied);
    w.u32(static_cast<std::uint32_t>(s.replies.size()));
    for (const auto& c : s.replies) {
      w.u64(c.seq);
      write_outcome(w, c.outcome);
    }
  }
  w.u32(static_cast<std::uint32_t>(b.replicas.size()));
  for (const auto& n : b.replicas) write_node(w, n);
  return w.take();
}

SnapshotBody decode_snapshot(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  SnapshotBody b;
  const auto purpose = r.u8();
  if (purpose > 2) throw Error(ErrorCode::malformed_payload, "bad snapshot purpose");
  b.purpose = static_cast<SnapshotPurpose>(purpose);
  b.epoch = r.u64();
  b.data = read_relation_data(r);
  const auto nstreams = r.u32();
  for (std::uint32_t i = 0; i < nstreams; ++i) {
    StreamState s;
    s.sender = read_node(r);
    s.last_applied = r.u64();
    const auto nreplies = r.u32();
    for (std::uint32_t j = 0; j < nreplies; ++j) {
      CachedReply c;
      c.seq = r.u64();
      c.outcome = read_outcome(r);
      s.replies.push_back(std::move(c));
    }
    b.streams.push_back(std::move(s));
  }
  const auto nrep = r.u32();
  for (std::uint32_t i = 0; i < nrep; ++i) b.replicas.push_back(read_node(r));
  r.expect_done();
  return b;
}

Bytes encode_body(const HelloBody& b) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(b.role));
  w.u64(b.epoch);
  write_node(w, b.owner);
  w.u8(b.reject ? 1 : 0);
  return w.take();
}

HelloBody decode_hello(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  HelloBody b;
  const auto role = r.u8();
  if (role > 2) throw Error(ErrorCode::malformed_payload, "bad role");
  b.role = static_cast<Role>(role);
  b.epoch = r.u64();
  b.owner = read_node(r);
  b.reject = read_flag(r);
  r.expect_done();
  return b;
}

}  // namespace arm
