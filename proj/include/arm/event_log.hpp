#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace arm {

// Append-only event log; one event per line as `ts_ms kind details...`.
class EventLog {
 public:
  void append(double ts_ms, std::string_view kind, std::string_view details);
  const std::vector<std::string>& lines() const { return lines_; }
  std::string text() const;
  void write(const std::filesystem::path& path) const;
  void clear() { lines_.clear(); }
  void set_enabled(bool on) { enabled_ = on; }

 private:
  std::vector<std::string> lines_;
  bool enabled_ = true;
};

std::string format_ms(double ms);

}  // namespace arm
