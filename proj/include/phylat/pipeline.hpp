#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "phylat/engine.hpp"
#include "phylat/latency.hpp"
#include "phylat/phy.hpp"
#include "phylat/time.hpp"
#include "phylat/tracing.hpp"

namespace phylat {

enum class ItemKind : std::uint8_t { Chunk, SymbolBatch, BitBatch, Codeword, Dataword };

inline const char* to_string(ItemKind k) {
  switch (k) {
    case ItemKind::Chunk: return "chunk";
    case ItemKind::SymbolBatch: return "symbol_batch";
    case ItemKind::BitBatch: return "bit_batch";
    case ItemKind::Codeword: return "codeword";
    case ItemKind::Dataword: return "dataword";
  }
  return "?";
}

inline ItemKind item_kind_from_string(const std::string& s) {
  if (s == "chunk") return ItemKind::Chunk;
  if (s == "symbol_batch") return ItemKind::SymbolBatch;
  if (s == "bit_batch") return ItemKind::BitBatch;
  if (s == "codeword") return ItemKind::Codeword;
  if (s == "dataword") return ItemKind::Dataword;
  throw std::invalid_argument("unknown item kind '" + s + "'");
}

struct DataItem {
  ItemKind kind = ItemKind::Chunk;
  ChunkRole role = ChunkRole::Payload;
  std::uint64_t units = 0;  // symbols or bits, depending on kind
  std::uint32_t frame_id = 0;
  std::uint32_t seq_in_frame = 0;
};

/// Zero-size frame-end marker. It flows through every buffer so block loops
/// terminate, but produces no put/get records and no occupancy change.
struct FrameEnd {};

using Slot = std::variant<DataItem, FrameEnd>;

/// Unbounded FIFO data buffer owned by its consuming block. Every put and get
/// is recorded against the kernel clock.
class Buffer {
 public:
  Buffer(std::string id, std::string owner_block)
      : id_(std::move(id)), owner_(std::move(owner_block)) {}

  const std::string& id() const { return id_; }
  const std::string& owner() const { return owner_; }
  bool empty() const { return slots_.empty(); }
  std::uint64_t occupancy() const { return occupancy_; }

  void put(Engine& eng, TraceLog& log, const std::string& actor, const DataItem& item) {
    slots_.push_back(item);
    ++occupancy_;
    log.record(BufferEvent{eng.now(), actor, id_, EventKind::Put, occupancy_, item.units,
                           item.frame_id, item.seq_in_frame});
    wake(eng);
  }

  void put_end(Engine& eng) {
    slots_.push_back(FrameEnd{});
    wake(eng);
  }

  /// Removes the head slot. Data items are logged as gets against the owning
  /// block; the frame-end marker passes silently.
  Slot pop(Engine& eng, TraceLog& log) {
    Slot s = std::move(slots_.front());
    slots_.pop_front();
    if (const auto* item = std::get_if<DataItem>(&s)) {
      --occupancy_;
      log.record(BufferEvent{eng.now(), owner_, id_, EventKind::Get, occupancy_, item->units,
                             item->frame_id, item->seq_in_frame});
    }
    return s;
  }

  void log_request(Engine& eng, TraceLog& log) const {
    log.record(BufferEvent{eng.now(), owner_, id_, EventKind::Request, occupancy_, 0, 0, 0});
  }

  /// Parks the current activity until the next put on this buffer. The waker
  /// re-checks emptiness, so callers loop around this await.
  auto wait_for_item(Engine& eng) {
    struct Awaiter {
      Engine& eng;
      Buffer& buf;
      bool await_ready() const { return !buf.slots_.empty(); }
      void await_suspend(Process::Handle h) {
        Activity* act = h.promise().activity;
        act->state = ActivityState::WaitingOnBuffer;
        act->waiting_on = buf.id_;
        buf.waiters_.push_back(act);
      }
      void await_resume() const {}
    };
    return Awaiter{eng, *this};
  }

 private:
  void wake(Engine& eng) {
    if (waiters_.empty()) return;
    std::vector<Activity*> woken;
    woken.swap(waiters_);
    for (Activity* act : woken)
      eng.schedule(SimTime::ps(0), [&eng, act] { eng.resume(*act); });
  }

  std::string id_;
  std::string owner_;
  std::deque<Slot> slots_;
  std::uint64_t occupancy_ = 0;
  std::vector<Activity*> waiters_;
};

/// One-shot gating signal. A block gated by an unset flag performs no gets on
/// its data buffer; once set the flag stays set for the rest of the frame.
class FlagBuffer {
 public:
  explicit FlagBuffer(std::string id) : id_(std::move(id)) {}

  const std::string& id() const { return id_; }
  bool is_set() const { return set_at_.has_value(); }
  std::optional<SimTime> set_at() const { return set_at_; }

  void set(Engine& eng, TraceLog& log, const std::string& actor) {
    if (set_at_)
      throw ConfigError("flag buffer '" + id_ + "' set twice in one frame (topology bug)");
    set_at_ = eng.now();
    log.record(BufferEvent{eng.now(), actor, id_, EventKind::FlagSet, 0, 0, 0, 0});
    std::vector<Activity*> woken;
    woken.swap(waiters_);
    for (Activity* act : woken)
      eng.schedule(SimTime::ps(0), [&eng, act] { eng.resume(*act); });
  }

  auto wait_for_set(Engine& eng) {
    struct Awaiter {
      Engine& eng;
      FlagBuffer& flag;
      bool await_ready() const { return flag.is_set(); }
      void await_suspend(Process::Handle h) {
        Activity* act = h.promise().activity;
        act->state = ActivityState::WaitingOnFlag;
        act->waiting_on = flag.id_;
        flag.waiters_.push_back(act);
      }
      void await_resume() const {}
    };
    return Awaiter{eng, *this};
  }

 private:
  std::string id_;
  std::optional<SimTime> set_at_;
  std::vector<Activity*> waiters_;
};

/// Behavior classes a pipeline block can take.
///   Passthrough        services every item and forwards it unchanged.
///   PreambleEstimator  services the preamble only, then raises its flag and
///                      forwards; other items pass with no delay.
///   Regroup            payload only: scales units (symbols to bits, coded to
///                      data bits) and re-packs them into fixed-size output
///                      items; preamble and header are absorbed here.
///   Descramble         forwards payload bits 1:1 but trims the final batch to
///                      the frame's true payload size, dropping code padding.
///   Sink               terminal consumer; drains items with no service.
enum class BlockKind : std::uint8_t { Passthrough, PreambleEstimator, Regroup, Descramble, Sink };

inline const char* to_string(BlockKind k) {
  switch (k) {
    case BlockKind::Passthrough: return "passthrough";
    case BlockKind::PreambleEstimator: return "preamble_estimator";
    case BlockKind::Regroup: return "regroup";
    case BlockKind::Descramble: return "descramble";
    case BlockKind::Sink: return "sink";
  }
  return "?";
}

inline BlockKind block_kind_from_string(const std::string& s) {
  if (s == "passthrough") return BlockKind::Passthrough;
  if (s == "preamble_estimator") return BlockKind::PreambleEstimator;
  if (s == "regroup") return BlockKind::Regroup;
  if (s == "descramble") return BlockKind::Descramble;
  if (s == "sink") return BlockKind::Sink;
  throw std::invalid_argument("unknown block kind '" + s + "'");
}

/// Unit scaling applied by a regroup block, resolved per run.
enum class ScaleKind : std::uint8_t { One, BitsPerSymbol, CodeRate };

/// Output item size of a regroup block, resolved per run.
enum class OutUnitsKind : std::uint8_t { BatchSymbols, CodewordBits, DatawordBits };

/// Config-level description of one block. The data path is a linear chain in
/// list order; `flag_to` adds a gating edge from an estimator to a later block.
struct BlockSpec {
  std::string id;
  BlockKind kind = BlockKind::Passthrough;
  std::string flag_to;  // preamble_estimator only
  ScaleKind scale = ScaleKind::One;
  OutUnitsKind out_units = OutUnitsKind::BatchSymbols;
  ItemKind out_kind = ItemKind::SymbolBatch;
  std::uint32_t batch_in = 1;

  bool operator==(const BlockSpec&) const = default;
};

struct TopologyConfig {
  std::vector<BlockSpec> blocks;

  bool operator==(const TopologyConfig&) const = default;
};

/// The default receiver baseband: packet detection, joint CFO/IQ estimation
/// gating the corrector, channel estimation gating the equalizer, block
/// assembly, frequency-domain equalization, demapping, LDPC decoding,
/// descrambling, sink.
inline TopologyConfig default_topology() {
  auto block = [](std::string id, BlockKind kind) {
    BlockSpec b;
    b.id = std::move(id);
    b.kind = kind;
    return b;
  };
  auto estimator = [&](std::string id, std::string flag_to) {
    BlockSpec b = block(std::move(id), BlockKind::PreambleEstimator);
    b.flag_to = std::move(flag_to);
    return b;
  };
  auto regroup = [&](std::string id, ScaleKind scale, OutUnitsKind out_units, ItemKind out_kind) {
    BlockSpec b = block(std::move(id), BlockKind::Regroup);
    b.scale = scale;
    b.out_units = out_units;
    b.out_kind = out_kind;
    return b;
  };
  TopologyConfig t;
  t.blocks = {
      block("packet_detection", BlockKind::Passthrough),
      estimator("cfo_iq_estimation", "cfo_iq_correction"),
      block("cfo_iq_correction", BlockKind::Passthrough),
      estimator("channel_estimation", "fd_equalizer"),
      regroup("block_assembly", ScaleKind::One, OutUnitsKind::BatchSymbols, ItemKind::SymbolBatch),
      block("fd_equalizer", BlockKind::Passthrough),
      regroup("demapper", ScaleKind::BitsPerSymbol, OutUnitsKind::CodewordBits, ItemKind::Codeword),
      regroup("ldpc_decoder", ScaleKind::CodeRate, OutUnitsKind::DatawordBits, ItemKind::Dataword),
      block("descrambler", BlockKind::Descramble),
      block("sink", BlockKind::Sink),
  };
  return t;
}

/// Checks chain shape, flag-edge ordering and catalog coverage. Throws
/// ConfigError naming the offending block.
inline void validate(const TopologyConfig& topo, const PerfCatalog& catalog) {
  if (topo.blocks.empty()) throw ConfigError("topology: no blocks");
  if (topo.blocks.back().kind != BlockKind::Sink)
    throw ConfigError("topology: last block must be a sink");
  for (std::size_t i = 0; i < topo.blocks.size(); ++i) {
    const BlockSpec& b = topo.blocks[i];
    if (b.id.empty()) throw ConfigError("topology: block without id");
    if (b.kind == BlockKind::Sink && i + 1 != topo.blocks.size())
      throw ConfigError("topology: sink '" + b.id + "' must be the last block");
    for (std::size_t j = i + 1; j < topo.blocks.size(); ++j)
      if (topo.blocks[j].id == b.id)
        throw ConfigError("topology: duplicate block id '" + b.id + "'");
    if (b.batch_in < 1) throw ConfigError("topology: block '" + b.id + "': batch_in must be >= 1");
    if (!b.flag_to.empty()) {
      if (b.kind != BlockKind::PreambleEstimator)
        throw ConfigError("topology: block '" + b.id + "': only estimators raise flags");
      bool downstream = false;
      for (std::size_t j = i + 1; j < topo.blocks.size(); ++j)
        if (topo.blocks[j].id == b.flag_to) downstream = true;
      if (!downstream)
        throw ConfigError("topology: flag from '" + b.id + "' targets '" + b.flag_to +
                          "', which is not a downstream block");
    }
    if (b.kind != BlockKind::Sink) catalog.at(b.id);  // raises if missing
  }
}

/// Runtime block: the spec plus its wired buffers and resolved parameters.
struct Block {
  BlockSpec spec;
  Buffer* input = nullptr;
  FlagBuffer* gate = nullptr;      // set when some estimator targets this block
  Buffer* output = nullptr;        // null for the sink
  FlagBuffer* flag_out = nullptr;  // estimator target
  const ServiceModel* model = nullptr;

  Ratio scale{1, 1};
  std::uint64_t out_units = 0;
  std::uint64_t pool = 0;  // regroup carry, in output units
  std::uint32_t out_seq = 0;
  std::uint64_t payload_bits_remaining = 0;  // descramble trim budget
};

struct SimConfig;  // defined in config.hpp

struct RunParams {
  std::uint64_t payload_bytes = 0;
  Mcs mcs;
  std::uint32_t iterations = 1;
};

/// One fully wired simulation run: kernel, trace, frame plan and topology.
struct SimRun {
  FrameSpec frame;
  ServiceContext svc;
  std::uint32_t batch_symbols = 448;
  std::vector<std::unique_ptr<Buffer>> buffers;
  std::vector<std::unique_ptr<FlagBuffer>> flags;
  std::vector<std::unique_ptr<Block>> blocks;
  TraceLog log;
  Engine engine;

  Buffer& add_buffer(std::string id, std::string owner) {
    buffers.push_back(std::make_unique<Buffer>(std::move(id), std::move(owner)));
    return *buffers.back();
  }
  FlagBuffer& add_flag(std::string id) {
    flags.push_back(std::make_unique<FlagBuffer>(std::move(id)));
    return *flags.back();
  }
};

namespace detail {

inline Ratio resolve_scale(ScaleKind k, const FrameSpec& frame) {
  switch (k) {
    case ScaleKind::One: return Ratio{1, 1};
    case ScaleKind::BitsPerSymbol: return Ratio{frame.mcs.bps(), 1};
    case ScaleKind::CodeRate: return frame.mcs.rate_ratio();
  }
  throw std::invalid_argument("unknown scale kind");
}

inline std::uint64_t resolve_out_units(OutUnitsKind k, const FrameSpec& frame,
                                       std::uint32_t batch_symbols) {
  switch (k) {
    case OutUnitsKind::BatchSymbols: return batch_symbols;
    case OutUnitsKind::CodewordBits: return kCodewordBits;
    case OutUnitsKind::DatawordBits: return frame.data_bits_per_cw();
  }
  throw std::invalid_argument("unknown out-units kind");
}

/// Emits one data item downstream, stamping the block's output sequence.
inline void emit(SimRun& run, Block& b, ItemKind kind, ChunkRole role, std::uint64_t units) {
  DataItem out{kind, role, units, 0, b.out_seq++};
  b.output->put(run.engine, run.log, b.spec.id, out);
}

}  // namespace detail

// Block service loop: request, await the gate flag, get a batch, advance by
// the service time, put the transformed items downstream. Regrouped outputs
// appear at their exact analytic completion instants within the item's
// service interval, not bunched at its end, so per-symbol pacing survives
// batching.

inline Process run_block(SimRun& run, Block& b) {
  Engine& eng = run.engine;
  for (;;) {
    b.input->log_request(eng, run.log);
    if (b.gate)
      while (!b.gate->is_set()) co_await b.gate->wait_for_set(eng);

    std::vector<DataItem> items;
    bool frame_ended = false;
    while (items.size() < b.spec.batch_in && !frame_ended) {
      while (b.input->empty()) co_await b.input->wait_for_item(eng);
      Slot slot = b.input->pop(eng, run.log);
      if (std::holds_alternative<FrameEnd>(slot))
        frame_ended = true;
      else
        items.push_back(std::get<DataItem>(slot));
    }

    for (const DataItem& item : items) {
      switch (b.spec.kind) {
        case BlockKind::Sink:
          break;  // terminal: consume, no service, no output
        case BlockKind::Passthrough: {
          SimTime s = service_time(*b.model, item.units, run.svc);
          if (s.ticks() > 0) co_await eng.wait(s);
          detail::emit(run, b, item.kind, item.role, item.units);
          break;
        }
        case BlockKind::PreambleEstimator: {
          if (item.role == ChunkRole::Preamble) {
            SimTime s = service_time(*b.model, item.units, run.svc);
            if (s.ticks() > 0) co_await eng.wait(s);
            if (b.flag_out) b.flag_out->set(eng, run.log, b.spec.id);
          }
          detail::emit(run, b, item.kind, item.role, item.units);
          break;
        }
        case BlockKind::Regroup: {
          if (item.role != ChunkRole::Payload) break;  // preamble/header end here
          std::uint64_t contrib_num = item.units * b.scale.num;
          if (contrib_num % b.scale.den != 0)
            throw ConfigError("block '" + b.spec.id + "': item of " + std::to_string(item.units) +
                              " units does not scale by " + b.scale.str() + " to whole units");
          std::uint64_t contrib = contrib_num / b.scale.den;
          std::uint64_t before = b.pool;
          std::uint64_t n_out = (before + contrib) / b.out_units;
          SimTime total = service_time(*b.model, item.units, run.svc);
          SimTime elapsed = SimTime::ps(0);
          for (std::uint64_t k = 1; k <= n_out; ++k) {
            std::uint64_t needed_out = k * b.out_units - before;
            std::uint64_t prefix_units = (needed_out * b.scale.den + b.scale.num - 1) / b.scale.num;
            SimTime at = prefix_time(*b.model, prefix_units, item.units, run.svc);
            if (at > elapsed) {
              co_await eng.wait(at - elapsed);
              elapsed = at;
            }
            detail::emit(run, b, b.spec.out_kind, ChunkRole::Payload, b.out_units);
          }
          b.pool = before + contrib - n_out * b.out_units;
          if (total > elapsed) co_await eng.wait(total - elapsed);
          break;
        }
        case BlockKind::Descramble: {
          if (item.role != ChunkRole::Payload) {
            SimTime s = service_time(*b.model, item.units, run.svc);
            if (s.ticks() > 0) co_await eng.wait(s);
            detail::emit(run, b, item.kind, item.role, item.units);
            break;
          }
          // Service covers the retained payload bits; code padding past the
          // frame's last payload bit never enters the descrambler.
          std::uint64_t keep = std::min<std::uint64_t>(item.units, b.payload_bits_remaining);
          b.payload_bits_remaining -= keep;
          if (keep > 0) {
            SimTime s = service_time(*b.model, keep, run.svc);
            if (s.ticks() > 0) co_await eng.wait(s);
            detail::emit(run, b, ItemKind::BitBatch, ChunkRole::Payload, keep);
          }
          break;
        }
      }
    }

    if (frame_ended) {
      if (b.spec.kind == BlockKind::Regroup && b.pool > 0) {
        detail::emit(run, b, b.spec.out_kind, ChunkRole::Payload, b.pool);
        b.pool = 0;
      }
      if (b.output) b.output->put_end(eng);
      break;
    }
  }
}

/// Transmitter source: replays the frame's emission schedule into the first
/// block's input buffer, then sends the frame-end marker.
inline Process run_source(SimRun& run, Buffer& source_marker, Buffer& first_input,
                          std::vector<TxEmission> schedule) {
  Engine& eng = run.engine;
  source_marker.log_request(eng, run.log);
  std::uint32_t seq = 0;
  for (const TxEmission& e : schedule) {
    if (e.at > eng.now()) co_await eng.wait(e.at - eng.now());
    DataItem item{ItemKind::Chunk, e.role, e.units, 0, seq++};
    first_input.put(eng, run.log, "source", item);
  }
  first_input.put_end(eng);
}

}  // namespace phylat
