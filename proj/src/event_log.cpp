#include "arm/event_log.hpp"

#include <cstdio>
#include <fstream>

#include "arm/error.hpp"

namespace arm {

std::string format_ms(double ms) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", ms);
  return buf;
}

void EventLog::append(double ts_ms, std::string_view kind, std::string_view details) {
  if (!enabled_) return;
  std::string line = format_ms(ts_ms);
  line += ' ';
  line += kind;
  if (!details.empty()) {
    line += ' ';
    line += details;
  }
  lines_.push_back(std::move(line));
}

std::string EventLog::text() const {
  std::string out;
  for (const auto& l : lines_) {
    out += l;
    out += '\n';
  }
  return out;
}

void EventLog::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << text();
}

}  // namespace arm
