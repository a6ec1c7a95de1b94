#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "phylat/latency.hpp"
#include "phylat/phy.hpp"
#include "phylat/pipeline.hpp"

namespace phylat {

/// Everything that shapes a single run: channel constants, batch granularity,
/// the block topology and the per-block performance figures.
struct SimConfig {
  PhyConstants constants;
  std::uint32_t batch_symbols = 448;
  TopologyConfig topology = default_topology();
  PerfCatalog catalog;

  bool operator==(const SimConfig&) const = default;
};

/// Sweep axes and execution knobs. The run grid is the Cartesian product
/// payloads x mcs x iterations.
struct SweepConfig {
  std::vector<std::uint64_t> payload_bytes;
  std::vector<std::string> mcs;
  std::vector<std::uint32_t> iterations;
  std::uint32_t pool_size = 1;
  std::string output_dir = "out";
};

/// Default per-block performance figures. The numbers are artifact defaults
/// chosen to sit in the range of published 60 GHz baseband designs; each entry
/// carries its rationale, and all of them are plain config values.
inline PerfCatalog default_perf_catalog() {
  PerfCatalog c;
  auto tput = [](std::uint64_t ups) {
    return ThroughputModel{Ratio{ups, 1}, SimTime::ps(0)};
  };
  c.entries["packet_detection"] = {tput(3'520'000'000ULL),
                                   "sliding autocorrelator, two samples per 1.76 GHz chip clock"};
  c.entries["cfo_iq_estimation"] = {FixedLatencyModel{SimTime::ns(500)},
                                    "joint CFO/IQ estimate over the preamble, fixed pipeline depth"};
  c.entries["cfo_iq_correction"] = {tput(3'520'000'000ULL),
                                    "per-sample derotation at two samples per clock"};
  c.entries["channel_estimation"] = {FixedLatencyModel{SimTime::ns(800)},
                                     "CEF correlation and tap solve, fixed pipeline depth"};
  c.entries["block_assembly"] = {tput(3'520'000'000ULL),
                                 "streaming FFT framer at two samples per clock"};
  c.entries["fd_equalizer"] = {tput(3'520'000'000ULL),
                               "single-tap frequency-domain multiply at two samples per clock"};
  c.entries["demapper"] = {tput(1'920'000'000ULL),
                           "LLR computation, eight symbols per 240 MHz clock; 9% above line rate"};
  LdpcLatencyModel ldpc;
  ldpc.clock_hz = 2'500'000'000ULL;
  ldpc.cycles_fixed = {32, 32, 28, 18};          // rates 1/2, 5/8, 3/4, 13/16
  ldpc.cycles_per_iteration = {11, 11, 8, 6};    // 1/2 and 5/8 share layer counts
  c.entries["ldpc_decoder"] = {LdpcIterative{ldpc},
                               "layered decoder; cycle counts track the layer structure of the "
                               "672-bit code matrices"};
  c.entries["descrambler"] = {tput(10'560'000'000ULL), "LFSR descrambler unrolled six bits per clock"};
  return c;
}

inline SimConfig default_sim_config() {
  SimConfig cfg;
  cfg.catalog = default_perf_catalog();
  return cfg;
}

inline void validate(const SimConfig& cfg) {
  if (cfg.batch_symbols < 1) throw ConfigError("batch_symbols must be >= 1");
  if (!cfg.constants.efficiency.positive() || cfg.constants.efficiency.num > cfg.constants.efficiency.den)
    throw ConfigError("efficiency must lie in (0, 1]");
  if (cfg.constants.symbol_rate_hz == 0) throw ConfigError("symbol_rate_hz must be positive");
  validate(cfg.catalog);
  validate(cfg.topology, cfg.catalog);
}

// ---------------------------------------------------------------------------
// JSON serialization. Objects serialize with sorted keys, so the dump of a
// config is canonical and its hash is stable across machines.

namespace cfgjson {

using nlohmann::json;

inline json to_json(const Ratio& r) {
  if (r.den == 1) return r.num;
  return r.str();
}

inline Ratio ratio_from_json(const json& j, const std::string& what) {
  if (j.is_number_unsigned()) return Ratio{j.get<std::uint64_t>(), 1};
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    std::size_t slash = s.find('/');
    try {
      if (slash == std::string::npos) return Ratio{std::stoull(s), 1};
      return Ratio{std::stoull(s.substr(0, slash)), std::stoull(s.substr(slash + 1))};
    } catch (const std::exception&) {
    }
  }
  throw ConfigError(what + ": expected integer or \"num/den\" string");
}

inline json to_json(const PhyConstants& c) {
  json j;
  j["symbol_rate_hz"] = c.symbol_rate_hz;
  j["max_payload_bytes"] = c.max_payload_bytes;
  j["preamble_ps"] = c.preamble_duration.ticks();
  j["header_ps"] = c.header_duration.ticks();
  j["efficiency"] = to_json(c.efficiency);
  json ov = json::object();
  for (const auto& [label, bps] : c.rate_overrides_bps) ov[label] = bps;
  j["rate_overrides_bps"] = ov;
  return j;
}

inline json to_json(const BlockSpec& b) {
  json j;
  j["id"] = b.id;
  j["kind"] = to_string(b.kind);
  if (!b.flag_to.empty()) j["flag_to"] = b.flag_to;
  if (b.kind == BlockKind::Regroup) {
    j["scale"] = b.scale == ScaleKind::One            ? "one"
                 : b.scale == ScaleKind::BitsPerSymbol ? "bits_per_symbol"
                                                        : "code_rate";
    j["out_units"] = b.out_units == OutUnitsKind::BatchSymbols   ? "batch_symbols"
                     : b.out_units == OutUnitsKind::CodewordBits ? "codeword_bits"
                                                                  : "dataword_bits";
    j["out_kind"] = to_string(b.out_kind);
  }
  if (b.batch_in != 1) j["batch_in"] = b.batch_in;
  return j;
}

inline json to_json(const ServiceModel& m) {
  json j;
  if (const auto* t = std::get_if<ThroughputModel>(&m)) {
    j["model"] = "throughput";
    j["units_per_second"] = to_json(t->units_per_second);
    j["fixed_overhead_ps"] = t->fixed_overhead.ticks();
  } else if (const auto* f = std::get_if<FixedLatencyModel>(&m)) {
    j["model"] = "fixed";
    j["delay_ps"] = f->delay.ticks();
  } else {
    const auto& l = std::get<LdpcIterative>(m).model;
    j["model"] = "ldpc";
    j["clock_hz"] = l.clock_hz;
    json cf = json::object(), ci = json::object();
    for (RateIndex r : kAllRates) {
      cf[rate_string(r)] = l.cycles_fixed[static_cast<std::size_t>(r)];
      ci[rate_string(r)] = l.cycles_per_iteration[static_cast<std::size_t>(r)];
    }
    j["cycles_fixed"] = cf;
    j["cycles_per_iteration"] = ci;
  }
  return j;
}

inline json to_json(const SimConfig& cfg) {
  json j;
  j["constants"] = to_json(cfg.constants);
  j["batch_symbols"] = cfg.batch_symbols;
  json topo = json::array();
  for (const BlockSpec& b : cfg.topology.blocks) topo.push_back(to_json(b));
  j["topology"] = topo;
  json perf = json::object();
  for (const auto& [id, entry] : cfg.catalog.entries) {
    json e = to_json(entry.model);
    e["provenance"] = entry.provenance;
    perf[id] = e;
  }
  j["performance"] = perf;
  return j;
}

inline PhyConstants constants_from_json(const json& j) {
  PhyConstants c;
  if (j.contains("symbol_rate_hz")) c.symbol_rate_hz = j.at("symbol_rate_hz").get<std::uint64_t>();
  if (j.contains("max_payload_bytes"))
    c.max_payload_bytes = j.at("max_payload_bytes").get<std::uint32_t>();
  if (j.contains("preamble_ps"))
    c.preamble_duration = SimTime::ps(j.at("preamble_ps").get<std::uint64_t>());
  if (j.contains("header_ps")) c.header_duration = SimTime::ps(j.at("header_ps").get<std::uint64_t>());
  if (j.contains("efficiency")) c.efficiency = ratio_from_json(j.at("efficiency"), "efficiency");
  if (j.contains("rate_overrides_bps")) {
    c.rate_overrides_bps.clear();
    for (const auto& [label, bps] : j.at("rate_overrides_bps").items()) {
      mcs_from_label(label);  // validates
      c.rate_overrides_bps[label] = bps.get<std::uint64_t>();
    }
  }
  return c;
}

inline BlockSpec block_from_json(const json& j) {
  BlockSpec b;
  b.id = j.at("id").get<std::string>();
  b.kind = block_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("flag_to")) b.flag_to = j.at("flag_to").get<std::string>();
  if (j.contains("batch_in")) b.batch_in = j.at("batch_in").get<std::uint32_t>();
  if (b.kind == BlockKind::Regroup) {
    std::string scale = j.value("scale", "one");
    if (scale == "one")
      b.scale = ScaleKind::One;
    else if (scale == "bits_per_symbol")
      b.scale = ScaleKind::BitsPerSymbol;
    else if (scale == "code_rate")
      b.scale = ScaleKind::CodeRate;
    else
      throw ConfigError("block '" + b.id + "': unknown scale '" + scale + "'");
    std::string ou = j.value("out_units", "batch_symbols");
    if (ou == "batch_symbols")
      b.out_units = OutUnitsKind::BatchSymbols;
    else if (ou == "codeword_bits")
      b.out_units = OutUnitsKind::CodewordBits;
    else if (ou == "dataword_bits")
      b.out_units = OutUnitsKind::DatawordBits;
    else
      throw ConfigError("block '" + b.id + "': unknown out_units '" + ou + "'");
    b.out_kind = item_kind_from_string(j.value("out_kind", "symbol_batch"));
  }
  return b;
}

inline ServiceModel model_from_json(const json& j, const std::string& block_id) {
  std::string model = j.at("model").get<std::string>();
  if (model == "throughput") {
    ThroughputModel t;
    t.units_per_second = ratio_from_json(j.at("units_per_second"), block_id + ".units_per_second");
    t.fixed_overhead = SimTime::ps(j.value("fixed_overhead_ps", std::uint64_t{0}));
    return t;
  }
  if (model == "fixed") return FixedLatencyModel{SimTime::ps(j.at("delay_ps").get<std::uint64_t>())};
  if (model == "ldpc") {
    LdpcLatencyModel l;
    l.clock_hz = j.at("clock_hz").get<std::uint64_t>();
    for (RateIndex r : kAllRates) {
      l.cycles_fixed[static_cast<std::size_t>(r)] =
          j.at("cycles_fixed").at(rate_string(r)).get<std::uint32_t>();
      l.cycles_per_iteration[static_cast<std::size_t>(r)] =
          j.at("cycles_per_iteration").at(rate_string(r)).get<std::uint32_t>();
    }
    return LdpcIterative{l};
  }
  throw ConfigError("performance entry '" + block_id + "': unknown model '" + model + "'");
}

}  // namespace cfgjson

/// Parses a config file. Omitted sections keep their built-in defaults, so a
/// config may override just the pieces it cares about.
inline SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig cfg = default_sim_config();
  if (j.contains("constants")) cfg.constants = cfgjson::constants_from_json(j.at("constants"));
  if (j.contains("batch_symbols")) cfg.batch_symbols = j.at("batch_symbols").get<std::uint32_t>();
  if (j.contains("topology")) {
    cfg.topology.blocks.clear();
    for (const auto& b : j.at("topology")) cfg.topology.blocks.push_back(cfgjson::block_from_json(b));
  }
  if (j.contains("performance")) {
    cfg.catalog.entries.clear();
    for (const auto& [id, e] : j.at("performance").items()) {
      PerfCatalog::Entry entry;
      entry.model = cfgjson::model_from_json(e, id);
      entry.provenance = e.value("provenance", "");
      cfg.catalog.entries[id] = entry;
    }
  }
  return cfg;
}

inline SweepConfig sweep_config_from_json(const nlohmann::json& j) {
  SweepConfig s;
  if (!j.contains("sweep")) return s;
  const auto& sw = j.at("sweep");
  if (sw.contains("payload_bytes"))
    s.payload_bytes = sw.at("payload_bytes").get<std::vector<std::uint64_t>>();
  if (sw.contains("mcs")) s.mcs = sw.at("mcs").get<std::vector<std::string>>();
  if (sw.contains("iterations")) s.iterations = sw.at("iterations").get<std::vector<std::uint32_t>>();
  if (sw.contains("pool_size")) s.pool_size = sw.at("pool_size").get<std::uint32_t>();
  if (sw.contains("output_dir")) s.output_dir = sw.at("output_dir").get<std::string>();
  return s;
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

inline SimConfig load_sim_config(const std::string& path) {
  return sim_config_from_json(load_json_file(path));
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string to_hex16(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

/// Hash of the canonicalized run-affecting config: constants, batch
/// granularity, topology and performance catalog. Sweep axes, pool size and
/// output paths are deliberately excluded so split sweeps stay compatible.
inline std::string config_hash(const SimConfig& cfg) {
  return to_hex16(fnv1a64(cfgjson::to_json(cfg).dump()));
}

}  // namespace phylat
