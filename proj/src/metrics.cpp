#include "arm/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "arm/error.hpp"

namespace arm {

CommandKind command_kind_from_string(std::string_view text) {
  for (auto k : {CommandKind::select, CommandKind::insert, CommandKind::update, CommandKind::remove})
    if (to_string(k) == text) return k;
  throw Error(ErrorCode::invalid_argument, "unknown operation '" + std::string(text) + "'");
}

double nearest_rank(std::span<const double> sorted, unsigned pct) {
  if (sorted.empty() || pct == 0 || pct > 100) throw Error(ErrorCode::invalid_argument, "bad percentile query");
  const std::size_t n = sorted.size();
  const std::size_t rank = (pct * n + 99) / 100;
  return sorted[rank - 1];
}

Summary summarize(std::span<const OperationRecord> records) {
  Summary s;
  s.count = records.size();
  if (records.empty()) return s;
  std::vector<double> d;
  d.reserve(records.size());
  for (const auto& r : records) d.push_back(r.duration_ms);
  // Summing in sorted order makes the mean independent of arrival order.
  std::sort(d.begin(), d.end());
  double sum = 0;
  for (double v : d) sum += v;
  s.mean_ms = sum / static_cast<double>(d.size());
  s.p95_ms = nearest_rank(d, 95);
  return s;
}

MetricsRecorder::MetricsRecorder(std::optional<double> retention_s) {
  if (retention_s) {
    if (!(*retention_s > 0)) throw Error(ErrorCode::invalid_argument, "retention must be positive");
    retention_ms_ = *retention_s * 1000;
  }
}

namespace {

void check_name(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_of(",\"\r\n") != std::string::npos)
    throw Error(ErrorCode::invalid_argument, std::string(what) + " '" + s + "' is not CSV-safe");
}

std::string number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void MetricsRecorder::record(OperationRecord rec) {
  if (!std::isfinite(rec.duration_ms) || rec.duration_ms < 0)
    throw Error(ErrorCode::invalid_argument, "duration must be a non-negative number");
  if (!std::isfinite(rec.start_ts_ms)) throw Error(ErrorCode::invalid_argument, "timestamp must be finite");
  check_name(rec.relation, "relation");
  check_name(rec.origin_zone, "origin zone");
  std::lock_guard lock(mutex_);
  auto pos = std::upper_bound(records_.begin(), records_.end(), rec.start_ts_ms,
                              [](double t, const OperationRecord& r) { return t < r.start_ts_ms; });
  records_.insert(pos, std::move(rec));
  if (retention_ms_) {
    const double cutoff = records_.back().start_ts_ms - *retention_ms_;
    while (!records_.empty() && records_.front().start_ts_ms <= cutoff) records_.pop_front();
  }
}

StatsWindow MetricsRecorder::stats(const std::string& relation, double window_s, double now_ms) const {
  if (!(window_s > 0)) throw Error(ErrorCode::invalid_argument, "window must be positive");
  StatsWindow w;
  w.relation = relation;
  w.window_s = window_s;
  const double lo = now_ms - window_s * 1000;
  std::vector<OperationRecord> in;
  {
    std::lock_guard lock(mutex_);
    auto it = std::upper_bound(records_.begin(), records_.end(), lo,
                               [](double t, const OperationRecord& r) { return t < r.start_ts_ms; });
    for (; it != records_.end() && it->start_ts_ms <= now_ms; ++it)
      if (it->relation == relation) in.push_back(*it);
  }
  const auto s = summarize(in);
  w.count = s.count;
  w.mean_ms = s.mean_ms;
  w.p95_ms = s.p95_ms;
  for (const auto& r : in) w.frequency[r.origin_zone] += 1;
  for (auto& [zone, f] : w.frequency) f /= window_s;
  return w;
}

std::vector<OperationRecord> MetricsRecorder::records() const {
  std::lock_guard lock(mutex_);
  return {records_.begin(), records_.end()};
}

std::size_t MetricsRecorder::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::string MetricsRecorder::to_csv(std::span<const OperationRecord> records) {
  std::string out(kMetricsCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    out += number(r.start_ts_ms);
    out += ',';
    out += to_string(r.op);
    out += ',';
    out += r.relation;
    out += ',';
    out += r.origin_zone;
    out += ',';
    out += number(r.duration_ms);
    out += '\n';
  }
  return out;
}

void MetricsRecorder::export_csv(const std::filesystem::path& path) const {
  const auto text = to_csv(records());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << text;
  if (!out.flush()) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

namespace {

double parse_number(std::string_view s, std::size_t line) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorCode::validation_error, "line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::vector<OperationRecord> MetricsRecorder::parse_csv(std::string_view text) {
  std::vector<OperationRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (header) {
      if (line != kMetricsCsvHeader) throw Error(ErrorCode::validation_error, "line 1: unexpected CSV header");
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::size_t start = 0;
    for (;;) {
      auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (f.size() != 5)
      throw Error(ErrorCode::validation_error, "line " + std::to_string(line_no) + ": expected 5 fields");
    OperationRecord r;
    r.start_ts_ms = parse_number(f[0], line_no);
    try {
      r.op = command_kind_from_string(f[1]);
    } catch (const Error& e) {
      throw Error(ErrorCode::validation_error, "line " + std::to_string(line_no) + ": " + e.what());
    }
    r.relation = std::string(f[2]);
    r.origin_zone = std::string(f[3]);
    r.duration_ms = parse_number(f[4], line_no);
    out.push_back(std::move(r));
  }
  if (header) throw Error(ErrorCode::validation_error, "empty metrics file");
  return out;
}

std::vector<OperationRecord> MetricsRecorder::import_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

}  // namespace arm
