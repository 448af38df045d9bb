#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arm/query.hpp"

namespace arm {

struct OperationRecord {
  CommandKind op = CommandKind::select;
  std::string relation;
  std::string origin_zone;
  double start_ts_ms = 0;
  double duration_ms = 0;

  friend bool operator==(const OperationRecord&, const OperationRecord&) = default;
};

CommandKind command_kind_from_string(std::string_view text);

struct Summary {
  std::uint64_t count = 0;
  std::optional<double> mean_ms;
  std::optional<double> p95_ms;
};

// Mean and nearest-rank p95 (sorted[ceil(0.95 n) - 1]) of the durations.
Summary summarize(std::span<const OperationRecord> records);
// Nearest-rank percentile of already sorted values; pct in (0, 100].
double nearest_rank(std::span<const double> sorted, unsigned pct);

struct StatsWindow {
  std::string relation;
  double window_s = 0;
  std::uint64_t count = 0;
  std::optional<double> mean_ms;
  std::optional<double> p95_ms;
  std::map<std::string, double> frequency;  // requests/s by origin zone
};

class MetricsRecorder {
 public:
  static constexpr double kDefaultRetentionS = 60;

  // nullopt keeps every record.
  explicit MetricsRecorder(std::optional<double> retention_s = kDefaultRetentionS);

  // Throws invalid_argument for negative or non-finite durations and for
  // names that cannot be written to CSV.
  void record(OperationRecord rec);

  // Records of `relation` starting in (now - window, now].
  StatsWindow stats(const std::string& relation, double window_s, double now_ms) const;
  std::vector<OperationRecord> records() const;
  std::size_t size() const;

  void export_csv(const std::filesystem::path& path) const;
  static std::string to_csv(std::span<const OperationRecord> records);
  static std::vector<OperationRecord> import_csv(const std::filesystem::path& path);
  static std::vector<OperationRecord> parse_csv(std::string_view text);

 private:
  std::optional<double> retention_ms_;
  mutable std::mutex mutex_;
  std::deque<OperationRecord> records_;  // ordered by start_ts_ms
};

inline constexpr std::string_view kMetricsCsvHeader = "ts_ms,op,relation,origin_zone,duration_ms";

}  // namespace arm
