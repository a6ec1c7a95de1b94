#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "phylat/time.hpp"
#include "phylat/version.hpp"

namespace phylat {

enum class EventKind : std::uint8_t { Put, Get, Request, FlagSet };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Put: return "put";
    case EventKind::Get: return "get";
    case EventKind::Request: return "request";
    case EventKind::FlagSet: return "flagset";
  }
  return "?";
}

inline EventKind event_kind_from_string(const std::string& s) {
  if (s == "put") return EventKind::Put;
  if (s == "get") return EventKind::Get;
  if (s == "request") return EventKind::Request;
  if (s == "flagset") return EventKind::FlagSet;
  throw std::invalid_argument("unknown event kind '" + s + "'");
}

/// One timestamped buffer operation. `block_id` is the block performing the
/// operation; `occupancy_after` is the buffer's item count once the operation
/// applied (requests and flag-sets leave it unchanged).
struct BufferEvent {
  SimTime t;
  std::string block_id;
  std::string buffer_id;
  EventKind kind = EventKind::Put;
  std::uint64_t occupancy_after = 0;
  std::uint64_t item_units = 0;  // zero for requests and flag-sets
  std::uint32_t frame_id = 0;
  std::uint32_t seq_in_frame = 0;

  bool operator==(const BufferEvent&) const = default;
};

struct RunMetadata {
  std::uint64_t payload_bytes = 0;
  std::string mcs_label;
  std::uint32_t iterations = 0;
  std::string config_hash;
  std::string tool_version = kToolVersion;

  bool operator==(const RunMetadata&) const = default;
};

/// Append-only event log of one simulation run, in kernel order.
class TraceLog {
 public:
  RunMetadata metadata;

  void record(BufferEvent ev) {
    if (!events_.empty() && ev.t < events_.back().t)
      throw std::logic_error("trace: events must be recorded in time order");
    events_.push_back(std::move(ev));
  }

  const std::vector<BufferEvent>& events() const { return events_; }

  bool operator==(const TraceLog& o) const {
    return metadata == o.metadata && events_ == o.events_;
  }

 private:
  std::vector<BufferEvent> events_;
};

/// Row format: one metadata header line of tab-separated key=value pairs,
/// then one line per event with tab-separated fields
/// t_ps, block, buffer, kind, occupancy, units, frame, seq.
/// Times are integer picoseconds; identical logs serialize to identical bytes.
inline void export_rows(const TraceLog& log, std::ostream& os) {
  const RunMetadata& m = log.metadata;
  os << "payload_bytes=" << m.payload_bytes << "\tmcs=" << m.mcs_label
     << "\titerations=" << m.iterations << "\tconfig_hash=" << m.config_hash
     << "\ttool_version=" << m.tool_version << "\n";
  for (const BufferEvent& e : log.events()) {
    os << e.t.ticks() << '\t' << e.block_id << '\t' << e.buffer_id << '\t' << to_string(e.kind)
       << '\t' << e.occupancy_after << '\t' << e.item_units << '\t' << e.frame_id << '\t'
       << e.seq_in_frame << '\n';
  }
}

inline std::string export_rows(const TraceLog& log) {
  std::ostringstream os;
  export_rows(log, os);
  return os.str();
}

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline std::uint64_t parse_u64(const std::string& s, const char* what, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    std::uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("trace line " + std::to_string(line_no) + ": bad " + what + " '" + s +
                             "'");
  }
}

}  // namespace detail

/// Parses the row format back into a TraceLog. Strict: malformed lines raise
/// with their line number.
inline TraceLog import_rows(std::istream& is) {
  TraceLog log;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("trace: missing metadata header line");
  for (const std::string& kv : detail::split_tabs(line)) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("trace header: expected key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (key == "payload_bytes")
      log.metadata.payload_bytes = detail::parse_u64(value, "payload_bytes", 1);
    else if (key == "mcs")
      log.metadata.mcs_label = value;
    else if (key == "iterations")
      log.metadata.iterations = static_cast<std::uint32_t>(detail::parse_u64(value, "iterations", 1));
    else if (key == "config_hash")
      log.metadata.config_hash = value;
    else if (key == "tool_version")
      log.metadata.tool_version = value;
    else
      throw std::runtime_error("trace header: unknown key '" + key + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f = detail::split_tabs(line);
    if (f.size() != 8)
      throw std::runtime_error("trace line " + std::to_string(line_no) + ": expected 8 fields, got " +
                               std::to_string(f.size()));
    BufferEvent ev;
    ev.t = SimTime::ps(detail::parse_u64(f[0], "timestamp", line_no));
    ev.block_id = f[1];
    ev.buffer_id = f[2];
    ev.kind = event_kind_from_string(f[3]);
    ev.occupancy_after = detail::parse_u64(f[4], "occupancy", line_no);
    ev.item_units = detail::parse_u64(f[5], "units", line_no);
    ev.frame_id = static_cast<std::uint32_t>(detail::parse_u64(f[6], "frame", line_no));
    ev.seq_in_frame = static_cast<std::uint32_t>(detail::parse_u64(f[7], "seq", line_no));
    log.record(std::move(ev));
  }
  return log;
}

inline TraceLog import_rows(const std::string& text) {
  std::istringstream is(text);
  return import_rows(is);
}

}  // namespace phylat
