#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "phylat/phy.hpp"
#include "phylat/time.hpp"
#include "phylat/tracing.hpp"

namespace phylat {

class IncompleteRunError : public std::runtime_error {
 public:
  explicit IncompleteRunError(const std::string& what) : std::runtime_error(what) {}
};

class AnalysisError : public std::runtime_error {
 public:
  explicit AnalysisError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline bool is_flag_buffer(const TraceLog& log, const std::string& buffer_id) {
  for (const BufferEvent& e : log.events())
    if (e.buffer_id == buffer_id) return e.kind == EventKind::FlagSet;
  return false;
}

inline std::set<std::string> buffer_ids(const TraceLog& log) {
  std::set<std::string> ids;
  for (const BufferEvent& e : log.events()) ids.insert(e.buffer_id);
  return ids;
}

/// Consumer of a buffer: the block that issues gets/requests on it.
inline std::string buffer_owner(const TraceLog& log, const std::string& buffer_id) {
  for (const BufferEvent& e : log.events())
    if (e.buffer_id == buffer_id &&
        (e.kind == EventKind::Get || e.kind == EventKind::Request))
      return e.block_id;
  return {};
}

}  // namespace detail

/// Identifies the terminal buffer: the one receiving puts whose consuming
/// block puts nothing anywhere. Throws if the log does not determine it
/// uniquely.
inline std::string find_sink_buffer(const TraceLog& log) {
  std::set<std::string> putting_blocks;
  for (const BufferEvent& e : log.events())
    if (e.kind == EventKind::Put) putting_blocks.insert(e.block_id);
  std::vector<std::string> candidates;
  for (const std::string& id : detail::buffer_ids(log)) {
    bool has_put = false;
    for (const BufferEvent& e : log.events())
      if (e.buffer_id == id && e.kind == EventKind::Put) {
        has_put = true;
        break;
      }
    if (!has_put) continue;
    std::string owner = detail::buffer_owner(log, id);
    if (!owner.empty() && !putting_blocks.count(owner)) candidates.push_back(id);
  }
  if (candidates.size() != 1)
    throw AnalysisError("cannot identify a unique sink buffer in the trace (found " +
                        std::to_string(candidates.size()) + " candidates)");
  return candidates.front();
}

/// End-to-end frame latency: timestamp of the last put into the sink buffer
/// minus the source's first request (time zero by construction).
///
/// When the log's metadata names a payload, the sink must have received
/// exactly payload_bytes * 8 bits; anything less means the trace was cut
/// before the frame's last item arrived and IncompleteRunError is raised.
inline SimTime total_latency(const TraceLog& log, std::string sink_buffer = "") {
  if (sink_buffer.empty()) sink_buffer = find_sink_buffer(log);
  std::optional<SimTime> first_request;
  std::optional<SimTime> last_sink_put;
  std::uint64_t sink_units = 0;
  for (const BufferEvent& e : log.events()) {
    if (!first_request && e.kind == EventKind::Request) first_request = e.t;
    if (e.buffer_id != sink_buffer) continue;
    if (e.kind == EventKind::Put) {
      last_sink_put = e.t;
      sink_units += e.item_units;
    }
  }
  if (!last_sink_put)
    throw IncompleteRunError("incomplete run: no put on sink buffer '" + sink_buffer + "'");
  if (log.metadata.payload_bytes > 0 && sink_units != log.metadata.payload_bytes * 8)
    throw IncompleteRunError("incomplete run: sink received " + std::to_string(sink_units) +
                             " of " + std::to_string(log.metadata.payload_bytes * 8) +
                             " payload bits (trace truncated?)");
  SimTime start = first_request.value_or(SimTime::ps(0));
  return *last_sink_put - start;
}

/// Step function of a buffer's item count: starts at (0,0), one point per
/// put/get. Unknown buffers raise, listing what the trace does contain.
inline std::vector<std::pair<SimTime, std::uint64_t>> occupancy_series(
    const TraceLog& log, const std::string& buffer_id) {
  std::set<std::string> ids = detail::buffer_ids(log);
  if (!ids.count(buffer_id)) {
    std::string known;
    for (const std::string& id : ids) {
      if (!known.empty()) known += ", ";
      known += id;
    }
    throw AnalysisError("unknown buffer '" + buffer_id + "'; trace has: " + known);
  }
  std::vector<std::pair<SimTime, std::uint64_t>> series{{SimTime::ps(0), 0}};
  for (const BufferEvent& e : log.events())
    if (e.buffer_id == buffer_id && (e.kind == EventKind::Put || e.kind == EventKind::Get))
      series.emplace_back(e.t, e.occupancy_after);
  return series;
}

// ---------------------------------------------------------------------------
// Residence

struct BlockResidence {
  SimTime wait_min;
  SimTime wait_max;
  SimTime wait_total;
  std::uint64_t wait_count = 0;
  SimTime service_total;
  SimTime flag_wait;
};

/// Per-block dwell summary. wait is put-to-get per item on the block's input
/// buffer; service is first-get-to-next-request per cycle; flag_wait is how
/// long the gate held the block after its first request.
struct ResidenceReport {
  std::map<std::string, BlockResidence> blocks;
};

inline ResidenceReport residence_report(const TraceLog& log) {
  ResidenceReport report;

  std::map<std::string, std::vector<SimTime>> puts, gets;       // by buffer
  std::map<std::string, std::string> owner_of;                  // buffer -> block
  std::map<std::string, std::vector<const BufferEvent*>> by_block;
  std::map<std::string, SimTime> flag_time;  // flag buffer id -> set time
  for (const BufferEvent& e : log.events()) {
    switch (e.kind) {
      case EventKind::Put: puts[e.buffer_id].push_back(e.t); break;
      case EventKind::Get:
        gets[e.buffer_id].push_back(e.t);
        owner_of[e.buffer_id] = e.block_id;
        by_block[e.block_id].push_back(&e);
        break;
      case EventKind::Request:
        owner_of[e.buffer_id] = e.block_id;
        by_block[e.block_id].push_back(&e);
        break;
      case EventKind::FlagSet: flag_time[e.buffer_id] = e.t; break;
    }
  }

  for (const auto& [buffer, get_times] : gets) {
    const std::string& block = owner_of[buffer];
    BlockResidence& r = report.blocks[block];
    const std::vector<SimTime>& put_times = puts[buffer];
    std::size_t n = std::min(put_times.size(), get_times.size());
    for (std::size_t i = 0; i < n; ++i) {
      SimTime w = get_times[i] - put_times[i];  // FIFO pairing
      if (r.wait_count == 0 || w < r.wait_min) r.wait_min = w;
      if (w > r.wait_max) r.wait_max = w;
      r.wait_total += w;
      ++r.wait_count;
    }
  }

  // Service per cycle: a block requests again right after it finishes, so the
  // span from a cycle's first get to the next request is its busy time.
  for (auto& [block, events] : by_block) {
    BlockResidence& r = report.blocks[block];
    std::optional<SimTime> cycle_first_get;
    for (const BufferEvent* e : events) {
      if (e->kind == EventKind::Get) {
        if (!cycle_first_get) cycle_first_get = e->t;
      } else if (e->kind == EventKind::Request) {
        if (cycle_first_get) {
          r.service_total += e->t - *cycle_first_get;
          cycle_first_get.reset();
        }
      }
    }
    SimTime first_request;
    for (const BufferEvent* e : events)
      if (e->kind == EventKind::Request) {
        first_request = e->t;
        break;
      }
    auto ft = flag_time.find(block + ".flag");
    if (ft != flag_time.end() && ft->second > first_request)
      r.flag_wait = ft->second - first_request;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Bottleneck detection

enum class Verdict : std::uint8_t { Clear, NearCritical, Bottleneck };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Clear: return "clear";
    case Verdict::NearCritical: return "near_critical";
    case Verdict::Bottleneck: return "bottleneck";
  }
  return "?";
}

struct BottleneckVerdict {
  std::string block_id;
  std::string buffer_id;
  Verdict verdict = Verdict::Clear;
  std::vector<bool> drained_before_next_arrival;  // one per inter-arrival gap
  std::uint64_t max_occupancy = 0;
  int occupancy_trend_sign = 0;
};

struct AnalysisOptions {
  /// Minimum idle fraction of an inter-arrival gap for a drain to count as
  /// comfortable; anything tighter is "barely keeping up".
  double near_critical_margin = 0.05;
};

/// Applies the buffer-pressure rule to every data buffer in the log.
///
/// Arrivals are the puts on the buffer (puts held back by a gate count from
/// the flag-set instant, as one backlog burst). The queue seen by an arrival
/// is its occupancy excluding itself.
///   Bottleneck    the final arrival still finds earlier work queued: the
///                 consumer never caught up through the end of the frame.
///   Clear         the consumer requested on an empty buffer inside every
///                 inter-arrival gap, with idle margin >= near_critical_margin
///                 of the gap.
///   NearCritical  everything else: drains that are too tight, or backlogs
///                 that build and recede.
inline std::vector<BottleneckVerdict> detect_bottlenecks(const TraceLog& log,
                                                         const AnalysisOptions& opts = {}) {
  struct Arrival {
    std::size_t index;  // position in the event list
    SimTime t;
    std::uint64_t queue_before;
  };

  std::map<std::string, SimTime> flag_time;
  for (const BufferEvent& e : log.events())
    if (e.kind == EventKind::FlagSet) flag_time[e.buffer_id] = e.t;

  std::vector<BottleneckVerdict> out;
  for (const std::string& buffer : detail::buffer_ids(log)) {
    if (detail::is_flag_buffer(log, buffer)) continue;
    std::string owner = detail::buffer_owner(log, buffer);

    std::optional<SimTime> gate;
    std::size_t gate_index = 0;
    auto ft = flag_time.find(owner + ".flag");
    if (ft != flag_time.end()) {
      gate = ft->second;
      for (std::size_t i = 0; i < log.events().size(); ++i)
        if (log.events()[i].kind == EventKind::FlagSet && log.events()[i].buffer_id == owner + ".flag")
          gate_index = i;
    }

    std::vector<Arrival> arrivals;
    std::uint64_t max_occ = 0;
    bool pre_gate_backlog = false;
    for (std::size_t i = 0; i < log.events().size(); ++i) {
      const BufferEvent& e = log.events()[i];
      if (e.buffer_id != buffer || e.kind != EventKind::Put) continue;
      max_occ = std::max(max_occ, e.occupancy_after);
      if (gate && e.t < *gate) {
        pre_gate_backlog = true;
        continue;
      }
      arrivals.push_back(Arrival{i, e.t, e.occupancy_after - 1});
    }
    if (pre_gate_backlog)
      arrivals.insert(arrivals.begin(), Arrival{gate_index, *gate, 0});
    if (arrivals.empty()) continue;

    BottleneckVerdict v;
    v.block_id = owner;
    v.buffer_id = buffer;
    v.max_occupancy = max_occ;

    double min_margin = 1.0;
    bool all_drained = true;
    for (std::size_t k = 0; k + 1 < arrivals.size(); ++k) {
      bool drained = false;
      SimTime drain_t;
      for (std::size_t i = arrivals[k].index + 1; i < arrivals[k + 1].index; ++i) {
        const BufferEvent& e = log.events()[i];
        if (e.buffer_id == buffer && e.kind == EventKind::Request && e.occupancy_after == 0) {
          drained = true;
          drain_t = e.t;
          break;
        }
      }
      v.drained_before_next_arrival.push_back(drained);
      if (!drained) {
        all_drained = false;
      } else {
        SimTime gap = arrivals[k + 1].t - arrivals[k].t;
        if (gap.ticks() > 0) {
          double margin = static_cast<double>((arrivals[k + 1].t - drain_t).ticks()) /
                          static_cast<double>(gap.ticks());
          min_margin = std::min(min_margin, margin);
        }
      }
    }

    std::uint64_t first_queue = arrivals.front().queue_before;
    std::uint64_t last_queue = arrivals.back().queue_before;
    v.occupancy_trend_sign = last_queue > first_queue ? 1 : last_queue < first_queue ? -1 : 0;

    if (arrivals.size() >= 2 && last_queue > 0)
      v.verdict = Verdict::Bottleneck;
    else if (all_drained && min_margin >= opts.near_critical_margin)
      v.verdict = Verdict::Clear;
    else if (arrivals.size() < 2)
      v.verdict = Verdict::Clear;
    else
      v.verdict = Verdict::NearCritical;
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Latency region

/// One completed run, reduced to what region analysis needs.
struct RunPoint {
  std::uint64_t payload_bytes = 0;
  std::string mcs_label;
  std::uint32_t iterations = 0;
  SimTime total_latency;
};

struct RegionBound {
  SimTime latency;
  std::string mcs_label;
  std::uint32_t iterations = 0;
};

/// Per-payload latency envelope over every simulated (MCS, iterations)
/// configuration, with the configs that attain each bound.
struct LatencyRegion {
  std::map<std::uint64_t, std::pair<RegionBound, RegionBound>> by_payload;  // lower, upper
};

inline LatencyRegion latency_region(const std::vector<RunPoint>& results) {
  if (results.empty()) throw AnalysisError("latency_region: no results");
  LatencyRegion region;
  for (const RunPoint& p : results) {
    auto it = region.by_payload.find(p.payload_bytes);
    if (it == region.by_payload.end()) {
      RegionBound b{p.total_latency, p.mcs_label, p.iterations};
      region.by_payload.emplace(p.payload_bytes, std::make_pair(b, b));
      continue;
    }
    auto& [lower, upper] = it->second;
    if (p.total_latency < lower.latency)
      lower = RegionBound{p.total_latency, p.mcs_label, p.iterations};
    if (p.total_latency > upper.latency)
      upper = RegionBound{p.total_latency, p.mcs_label, p.iterations};
  }
  return region;
}

// ---------------------------------------------------------------------------
// Plot-ready tables (tab-separated, one header line)

inline void plot_event_overview(const TraceLog& log, std::ostream& os) {
  os << "t_ps\tblock\tbuffer\tkind\toccupancy\tunits\n";
  for (const BufferEvent& e : log.events())
    os << e.t.ticks() << '\t' << e.block_id << '\t' << e.buffer_id << '\t' << to_string(e.kind)
       << '\t' << e.occupancy_after << '\t' << e.item_units << '\n';
}

/// Rows sorted by (modulation, code rate, iterations); latency must increase
/// along the iterations column within each (modulation, rate) group.
inline void plot_iteration_sweep(std::vector<RunPoint> points, std::ostream& os) {
  std::sort(points.begin(), points.end(), [](const RunPoint& a, const RunPoint& b) {
    if (a.mcs_label != b.mcs_label) return a.mcs_label < b.mcs_label;
    return a.iterations < b.iterations;
  });
  os << "modulation\tcode_rate\titerations\tlatency_ps\n";
  for (const RunPoint& p : points) {
    Mcs mcs = mcs_from_label(p.mcs_label);
    os << to_string(mcs.modulation) << '\t' << rate_string(mcs.rate) << '\t' << p.iterations << '\t'
       << p.total_latency.ticks() << '\n';
  }
}

inline void plot_region(const LatencyRegion& region, std::ostream& os) {
  os << "payload_bytes\tbound\tlatency_ps\tmcs\titerations\n";
  for (const auto& [payload, bounds] : region.by_payload) {
    os << payload << "\tlower\t" << bounds.first.latency.ticks() << '\t' << bounds.first.mcs_label
       << '\t' << bounds.first.iterations << '\n';
    os << payload << "\tupper\t" << bounds.second.latency.ticks() << '\t' << bounds.second.mcs_label
       << '\t' << bounds.second.iterations << '\n';
  }
}

}  // namespace phylat
