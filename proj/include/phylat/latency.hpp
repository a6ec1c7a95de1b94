#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>

#include "phylat/phy.hpp"
#include "phylat/time.hpp"

namespace phylat {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Block that moves units at a sustained rate, plus an optional fixed
/// per-batch overhead charged up front.
struct ThroughputModel {
  Ratio units_per_second;
  SimTime fixed_overhead = SimTime::ps(0);

  bool operator==(const ThroughputModel&) const = default;
};

struct FixedLatencyModel {
  SimTime delay;

  bool operator==(const FixedLatencyModel&) const = default;
};

/// Iterative LDPC decode cost per codeword: a fixed cycle count plus a
/// per-iteration cycle count, both keyed by code rate, over a decoder clock.
/// Rates 1/2 and 5/8 share one per-iteration cost; 3/4 and 13/16 are cheaper,
/// with 13/16 cheapest, so their latency curves diverge as iterations grow.
struct LdpcLatencyModel {
  std::uint64_t clock_hz = 0;
  std::array<std::uint32_t, 4> cycles_fixed{};          // indexed by RateIndex
  std::array<std::uint32_t, 4> cycles_per_iteration{};  // indexed by RateIndex

  bool operator==(const LdpcLatencyModel&) const = default;
};

/// Checks the structural constraints every accepted decoder config must obey.
/// Throws ConfigError naming the violated constraint.
inline void validate(const LdpcLatencyModel& m) {
  if (m.clock_hz == 0) throw ConfigError("ldpc model: clock_hz must be positive");
  for (RateIndex r : kAllRates) {
    auto i = static_cast<std::size_t>(r);
    if (m.cycles_fixed[i] == 0)
      throw ConfigError(std::string("ldpc model: cycles_fixed[") + rate_string(r) +
                        "] must be positive");
    if (m.cycles_per_iteration[i] == 0)
      throw ConfigError(std::string("ldpc model: cycles_per_iteration[") + rate_string(r) +
                        "] must be positive");
  }
  const auto& ci = m.cycles_per_iteration;
  if (ci[0] != ci[1])
    throw ConfigError("ldpc model: cycles_per_iteration[0.5] must equal cycles_per_iteration[0.625]");
  if (!(ci[2] < ci[1]))
    throw ConfigError("ldpc model: cycles_per_iteration[0.75] must be below cycles_per_iteration[0.625]");
  if (!(ci[3] < ci[2]))
    throw ConfigError("ldpc model: cycles_per_iteration[0.8125] must be below cycles_per_iteration[0.75]");
}

/// Latency of one codeword decode, rounded to ticks at the codeword level so a
/// frame total is an exact multiple of the per-codeword value.
inline SimTime decode_latency(const LdpcLatencyModel& m, RateIndex rate, std::uint32_t iterations) {
  if (iterations < 1) throw std::invalid_argument("decoder always runs at least one iteration");
  auto i = static_cast<std::size_t>(rate);
  std::uint64_t cycles =
      m.cycles_fixed[i] + static_cast<std::uint64_t>(iterations) * m.cycles_per_iteration[i];
  return SimTime::ps(muldiv_round_half_up(cycles, kPicosPerSecond, m.clock_hz));
}

/// Whole-frame decode latency: codewords decode sequentially by default;
/// `lanes` > 1 models parallel decoder lanes as a ceil division.
inline SimTime frame_decode_latency(const LdpcLatencyModel& m, const FrameSpec& frame,
                                    std::uint32_t iterations, std::uint32_t lanes = 1) {
  if (lanes < 1) throw std::invalid_argument("decoder lanes must be >= 1");
  if (frame.n_codewords == 0) return SimTime::ps(0);
  std::uint64_t rounds = (frame.n_codewords + lanes - 1) / lanes;
  return SimTime::ps(rounds * decode_latency(m, frame.mcs.rate, iterations).ticks());
}

struct LdpcIterative {
  LdpcLatencyModel model;

  bool operator==(const LdpcIterative&) const = default;
};

using ServiceModel = std::variant<ThroughputModel, FixedLatencyModel, LdpcIterative>;

/// Run-scoped parameters a service model may depend on.
struct ServiceContext {
  RateIndex code_rate = RateIndex::R1_2;
  std::uint32_t ldpc_iterations = 1;
};

/// Time to process one item of `units` under `model`.
inline SimTime service_time(const ServiceModel& model, std::uint64_t units,
                            const ServiceContext& ctx) {
  if (units == 0) throw std::invalid_argument("service_time: item units must be positive");
  if (const auto* t = std::get_if<ThroughputModel>(&model)) {
    if (!t->units_per_second.positive())
      throw ConfigError("throughput model: units_per_second must be positive");
    return ticks_for(units, t->units_per_second) + t->fixed_overhead;
  }
  if (const auto* f = std::get_if<FixedLatencyModel>(&model)) return f->delay;
  const auto& l = std::get<LdpcIterative>(model);
  return decode_latency(l.model, ctx.code_rate, ctx.ldpc_iterations);
}

/// Completion time of the first `prefix_units` of an item relative to its
/// service start. Under a throughput model the prefix finishes early; fixed
/// and decode models complete all output at the end.
inline SimTime prefix_time(const ServiceModel& model, std::uint64_t prefix_units,
                           std::uint64_t item_units, const ServiceContext& ctx) {
  if (const auto* t = std::get_if<ThroughputModel>(&model))
    return ticks_for(prefix_units, t->units_per_second) + t->fixed_overhead;
  return service_time(model, item_units, ctx);
}

/// Per-block service models plus a free-text provenance note for each figure.
struct PerfCatalog {
  struct Entry {
    ServiceModel model;
    std::string provenance;

    bool operator==(const Entry&) const = default;
  };
  std::map<std::string, Entry> entries;

  bool operator==(const PerfCatalog&) const = default;

  const Entry& at(const std::string& block_id) const {
    auto it = entries.find(block_id);
    if (it == entries.end())
      throw ConfigError("no performance entry for block '" + block_id + "'");
    return it->second;
  }
};

/// Validates every entry: positive rates/cycle counts, decoder orderings.
inline void validate(const PerfCatalog& catalog) {
  for (const auto& [id, entry] : catalog.entries) {
    if (const auto* t = std::get_if<ThroughputModel>(&entry.model)) {
      if (!t->units_per_second.positive())
        throw ConfigError("performance entry '" + id + "': units_per_second must be positive");
    } else if (const auto* l = std::get_if<LdpcIterative>(&entry.model)) {
      validate(l->model);
    }
  }
}

}  // namespace phylat
