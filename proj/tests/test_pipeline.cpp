#include <catch2/catch_amalgamated.hpp>

#include <deque>
#include <map>
#include <random>

#include "phylat/analysis.hpp"
#include "phylat/simulate.hpp"

using namespace phylat;

namespace {

DataItem payload_item(std::uint64_t units, std::uint32_t seq) {
  DataItem it;
  it.kind = ItemKind::Chunk;
  it.role = ChunkRole::Payload;
  it.units = units;
  it.seq_in_frame = seq;
  return it;
}

Process emit_at(SimRun& run, Buffer& dest, std::vector<std::pair<std::uint64_t, DataItem>> puts,
                bool end_frame) {
  for (const auto& [t, item] : puts) {
    if (SimTime::ps(t) > run.engine.now()) co_await run.engine.wait(SimTime::ps(t) - run.engine.now());
    dest.put(run.engine, run.log, "driver", item);
  }
  if (end_frame) dest.put_end(run.engine);
}

Process set_flag_at(SimRun& run, FlagBuffer& flag, std::uint64_t t) {
  co_await run.engine.wait(SimTime::ps(t));
  flag.set(run.engine, run.log, "driver");
}

/// Hand-built linear pipeline for kernel-level checks.
struct Harness {
  SimRun run;
  std::deque<ServiceModel> models;
  std::vector<Block*> chain;

  Block& add(const std::string& id, BlockKind kind, ServiceModel model) {
    auto b = std::make_unique<Block>();
    b->spec.id = id;
    b->spec.kind = kind;
    b->input = &run.add_buffer(id + ".in", id);
    models.push_back(std::move(model));
    b->model = &models.back();
    chain.push_back(b.get());
    run.blocks.push_back(std::move(b));
    return *chain.back();
  }

  Block& add_sink() {
    Block& b = add("sink", BlockKind::Sink, FixedLatencyModel{SimTime::ps(0)});
    b.model = nullptr;
    return b;
  }

  void wire_and_spawn() {
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) chain[i]->output = chain[i + 1]->input;
    for (Block* b : chain) run.engine.spawn(b->spec.id, run_block(run, *b));
  }

  std::vector<const BufferEvent*> events_on(const std::string& buffer, EventKind kind) {
    std::vector<const BufferEvent*> out;
    for (const BufferEvent& e : run.log.events())
      if (e.buffer_id == buffer && e.kind == kind) out.push_back(&e);
    return out;
  }
};

}  // namespace

TEST_CASE("put appends, logs and bumps occupancy") {
  Engine eng;
  TraceLog log;
  Buffer buf("b.in", "b");
  buf.put(eng, log, "driver", payload_item(7, 0));
  REQUIRE(buf.occupancy() == 1);
  REQUIRE(log.events().size() == 1);
  REQUIRE(log.events()[0].kind == EventKind::Put);
  REQUIRE(log.events()[0].occupancy_after == 1);
  REQUIRE(log.events()[0].item_units == 7);
  buf.put(eng, log, "driver", payload_item(3, 1));
  REQUIRE(buf.occupancy() == 2);
}

TEST_CASE("puts are logged at the simulated put time") {
  Harness h;
  h.add("b", BlockKind::Passthrough, FixedLatencyModel{SimTime::ps(0)});
  h.add_sink();
  h.wire_and_spawn();
  h.run.engine.spawn("driver",
                     emit_at(h.run, *h.chain[0]->input, {{100, payload_item(5, 0)}}, true));
  h.run.engine.run_until_idle();
  auto puts = h.events_on("b.in", EventKind::Put);
  REQUIRE(puts.size() == 1);
  REQUIRE(puts[0]->t == SimTime::ps(100));
}

TEST_CASE("fifo order and request/get pairing") {
  Harness h;
  h.add("b", BlockKind::Passthrough, FixedLatencyModel{SimTime::ps(0)});
  h.add_sink();
  h.wire_and_spawn();
  h.run.engine.spawn(
      "driver", emit_at(h.run, *h.chain[0]->input,
                        {{10, payload_item(1, 0)}, {10, payload_item(2, 1)}}, true));
  h.run.engine.run_until_idle();

  auto gets = h.events_on("b.in", EventKind::Get);
  REQUIRE(gets.size() == 2);
  REQUIRE(gets[0]->seq_in_frame == 0);  // FIFO
  REQUIRE(gets[1]->seq_in_frame == 1);
  REQUIRE(gets[0]->t == SimTime::ps(10));  // put wakes the parked request
  REQUIRE(gets[1]->t == SimTime::ps(10));  // zero service, same tick

  // the block's first event is its initial request, before any put existed
  const BufferEvent* first = nullptr;
  for (const BufferEvent& e : h.run.log.events())
    if (e.block_id == "b") {
      first = &e;
      break;
    }
  REQUIRE(first->kind == EventKind::Request);
  REQUIRE(first->t == SimTime::ps(0));
}

TEST_CASE("request on a non-empty buffer is followed by a get at the same tick") {
  Harness h;
  h.add("b", BlockKind::Passthrough, FixedLatencyModel{SimTime::ps(50)});
  h.add_sink();
  h.wire_and_spawn();
  h.run.engine.spawn(
      "driver", emit_at(h.run, *h.chain[0]->input,
                        {{0, payload_item(1, 0)}, {1, payload_item(1, 1)}}, true));
  h.run.engine.run_until_idle();
  auto requests = h.events_on("b.in", EventKind::Request);
  auto gets = h.events_on("b.in", EventKind::Get);
  REQUIRE(requests.size() >= 2);
  // second cycle requests at t=50 with item 1 already queued; get at 50 too
  REQUIRE(requests[1]->t == SimTime::ps(50));
  REQUIRE(requests[1]->occupancy_after == 1);
  REQUIRE(gets[1]->t == SimTime::ps(50));
}

TEST_CASE("gated buffer: item at 5, flag at 9, get at 9") {
  Harness h;
  Block& b = h.add("eq", BlockKind::Passthrough, FixedLatencyModel{SimTime::ps(0)});
  h.add_sink();
  FlagBuffer& flag = h.run.add_flag("eq.flag");
  b.gate = &flag;
  h.wire_and_spawn();
  h.run.engine.spawn("driver", emit_at(h.run, *b.input, {{5, payload_item(1, 0)}}, true));
  h.run.engine.spawn("flagger", set_flag_at(h.run, flag, 9));
  h.run.engine.run_until_idle();

  auto gets = h.events_on("eq.in", EventKind::Get);
  REQUIRE(gets.size() == 1);
  REQUIRE(gets[0]->t == SimTime::ps(9));
  auto flagsets = h.events_on("eq.flag", EventKind::FlagSet);
  REQUIRE(flagsets.size() == 1);
  // no get precedes the flag set
  for (const BufferEvent& e : h.run.log.events()) {
    if (e.buffer_id == "eq.in" && e.kind == EventKind::Get) REQUIRE(e.t >= flagsets[0]->t);
  }
}

TEST_CASE("flag set releases an already-waiting consumer with queued items") {
  Harness h;
  Block& b = h.add("eq", BlockKind::Passthrough, FixedLatencyModel{SimTime::ps(0)});
  h.add_sink();
  FlagBuffer& flag = h.run.add_flag("eq.flag");
  b.gate = &flag;
  h.wire_and_spawn();
  h.run.engine.spawn("driver", emit_at(h.run, *b.input,
                                       {{1, payload_item(1, 0)}, {2, payload_item(1, 1)}}, true));
  h.run.engine.spawn("flagger", set_flag_at(h.run, flag, 7));
  h.run.engine.run_until_idle();
  auto gets = h.events_on("eq.in", EventKind::Get);
  REQUIRE(gets.size() == 2);
  REQUIRE(gets[0]->t == SimTime::ps(7));  // released at the flag's timestamp
}

TEST_CASE("double flag set is a topology error") {
  Engine eng;
  TraceLog log;
  FlagBuffer flag("x.flag");
  flag.set(eng, log, "driver");
  REQUIRE_THROWS_WITH(flag.set(eng, log, "driver"),
                      Catch::Matchers::ContainsSubstring("set twice"));
}

TEST_CASE("mis-wired gate deadlocks with a diagnostic") {
  Harness h;
  Block& b = h.add("eq", BlockKind::Passthrough, FixedLatencyModel{SimTime::ps(0)});
  h.add_sink();
  FlagBuffer& flag = h.run.add_flag("eq.flag");
  b.gate = &flag;  // nobody ever sets it
  h.wire_and_spawn();
  h.run.engine.spawn("driver", emit_at(h.run, *b.input, {{5, payload_item(1, 0)}}, true));
  try {
    h.run.engine.run_until_idle();
    FAIL("expected DeadlockError");
  } catch (const DeadlockError& e) {
    std::string msg = e.what();
    REQUIRE(msg.find("eq") != std::string::npos);
    REQUIRE(msg.find("eq.flag") != std::string::npos);
  }
}

TEST_CASE("unloaded linear pipeline adds services exactly") {
  Harness h;
  h.add("a", BlockKind::Passthrough, FixedLatencyModel{SimTime::ps(11)});
  h.add("b", BlockKind::Passthrough, FixedLatencyModel{SimTime::ps(23)});
  h.add("c", BlockKind::Passthrough, FixedLatencyModel{SimTime::ps(40)});
  h.add_sink();
  h.wire_and_spawn();
  h.run.engine.spawn("driver", emit_at(h.run, *h.chain[0]->input, {{100, payload_item(4, 0)}}, true));
  h.run.engine.run_until_idle();
  auto sink_puts = h.events_on("sink.in", EventKind::Put);
  REQUIRE(sink_puts.size() == 1);
  REQUIRE(sink_puts[0]->t == SimTime::ps(100 + 11 + 23 + 40));
}

TEST_CASE("topology validation") {
  PerfCatalog catalog = default_perf_catalog();
  TopologyConfig topo = default_topology();
  REQUIRE_NOTHROW(validate(topo, catalog));

  SECTION("flag producers precede their consumers in the default chain") {
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < topo.blocks.size(); ++i) pos[topo.blocks[i].id] = i;
    for (const BlockSpec& b : topo.blocks)
      if (!b.flag_to.empty()) REQUIRE(pos[b.id] < pos[b.flag_to]);
  }
  SECTION("missing performance entry names the block") {
    catalog.entries.erase("demapper");
    REQUIRE_THROWS_WITH(validate(topo, catalog), Catch::Matchers::ContainsSubstring("demapper"));
  }
  SECTION("flag edge may not point upstream") {
    TopologyConfig bad = default_topology();
    bad.blocks[3].flag_to = "packet_detection";
    REQUIRE_THROWS_WITH(validate(bad, catalog),
                        Catch::Matchers::ContainsSubstring("packet_detection"));
  }
  SECTION("sink must be last") {
    TopologyConfig bad = default_topology();
    std::swap(bad.blocks[bad.blocks.size() - 1], bad.blocks[bad.blocks.size() - 2]);
    REQUIRE_THROWS_AS(validate(bad, catalog), ConfigError);
  }
  SECTION("duplicate ids rejected") {
    TopologyConfig bad = default_topology();
    bad.blocks[0].id = "demapper";
    REQUIRE_THROWS_AS(validate(bad, catalog), ConfigError);
  }
}

TEST_CASE("default pipeline conserves payload bits to the sink") {
  SimConfig cfg = default_sim_config();
  for (const char* label : {"0.0", "2.0", "3.3"})
    for (std::uint64_t payload : {1ULL, 42ULL, 100ULL, 1000ULL}) {
      SimOutput out = run_simulation(RunParams{payload, mcs_from_label(label), 3}, cfg);
      std::uint64_t sink_bits = 0;
      for (const BufferEvent& e : out.log.events())
        if (e.kind == EventKind::Put && e.buffer_id == "sink.in") sink_bits += e.item_units;
      REQUIRE(sink_bits == payload * 8);
    }
}

TEST_CASE("per-block unit transforms hold in the default run") {
  SimConfig cfg = default_sim_config();
  SimOutput out = run_simulation(RunParams{100, mcs_from_label("2.0"), 10}, cfg);
  auto sum_units = [&](const std::string& buffer, EventKind kind, const std::string& by_block = "") {
    std::uint64_t total = 0;
    for (const BufferEvent& e : out.log.events())
      if (e.buffer_id == buffer && e.kind == kind && (by_block.empty() || e.block_id == by_block))
        total += e.item_units;
    return total;
  };
  std::uint32_t n_cw = codewords_for(100, mcs_from_label("2.0"), cfg.constants);
  std::uint64_t payload_symbols = static_cast<std::uint64_t>(n_cw) * 672 / 4;

  // demapper: symbols in * bits_per_symbol == coded bits out
  std::uint64_t demap_in = sum_units("demapper.in", EventKind::Get);
  std::uint64_t demap_out = sum_units("ldpc_decoder.in", EventKind::Put, "demapper");
  REQUIRE(demap_in == payload_symbols);
  REQUIRE(demap_out == demap_in * 4);
  REQUIRE(demap_out == static_cast<std::uint64_t>(n_cw) * 672);

  // decoder: 672 coded bits in -> 336 data bits out per codeword
  std::uint64_t dec_out = sum_units("descrambler.in", EventKind::Put, "ldpc_decoder");
  REQUIRE(dec_out == static_cast<std::uint64_t>(n_cw) * 336);

  // every codeword put carries exactly 672 coded bits
  for (const BufferEvent& e : out.log.events())
    if (e.buffer_id == "ldpc_decoder.in" && e.kind == EventKind::Put)
      REQUIRE(e.item_units == 672);
  // every dataword carries exactly 672 * R data bits
  for (const BufferEvent& e : out.log.events())
    if (e.buffer_id == "descrambler.in" && e.kind == EventKind::Put)
      REQUIRE(e.item_units == 336);
}

TEST_CASE("equalizer emits whole blocks and the flush tail") {
  SimConfig cfg = default_sim_config();
  SimOutput out = run_simulation(RunParams{100, mcs_from_label("2.0"), 10}, cfg);
  std::vector<std::uint64_t> eq_puts;
  for (const BufferEvent& e : out.log.events())
    if (e.buffer_id == "demapper.in" && e.kind == EventKind::Put) eq_puts.push_back(e.item_units);
  REQUIRE(eq_puts == std::vector<std::uint64_t>{448, 56});  // 504 payload symbols
}

TEST_CASE("corrector and equalizer never get before their estimator flags") {
  SimConfig cfg = default_sim_config();
  SimOutput out = run_simulation(RunParams{200, mcs_from_label("1.1"), 4}, cfg);
  std::map<std::string, SimTime> flag_at;
  for (const BufferEvent& e : out.log.events())
    if (e.kind == EventKind::FlagSet) flag_at[e.buffer_id] = e.t;
  REQUIRE(flag_at.count("cfo_iq_correction.flag") == 1);
  REQUIRE(flag_at.count("fd_equalizer.flag") == 1);
  for (const BufferEvent& e : out.log.events()) {
    if (e.kind != EventKind::Get) continue;
    if (e.buffer_id == "cfo_iq_correction.in") REQUIRE(e.t >= flag_at["cfo_iq_correction.flag"]);
    if (e.buffer_id == "fd_equalizer.in") REQUIRE(e.t >= flag_at["fd_equalizer.flag"]);
  }
}

TEST_CASE("per-buffer causality and fifo hold across the default run") {
  SimConfig cfg = default_sim_config();
  SimOutput out = run_simulation(RunParams{1000, mcs_from_label("3.1"), 2}, cfg);
  std::map<std::string, std::vector<const BufferEvent*>> puts, gets;
  for (const BufferEvent& e : out.log.events()) {
    if (e.kind == EventKind::Put) puts[e.buffer_id].push_back(&e);
    if (e.kind == EventKind::Get) gets[e.buffer_id].push_back(&e);
  }
  for (const auto& [buffer, get_list] : gets) {
    const auto& put_list = puts[buffer];
    REQUIRE(get_list.size() <= put_list.size());
    for (std::size_t i = 0; i < get_list.size(); ++i) {
      REQUIRE(get_list[i]->t >= put_list[i]->t);                      // causality
      REQUIRE(get_list[i]->seq_in_frame == put_list[i]->seq_in_frame);  // FIFO
    }
  }
}

TEST_CASE("batch granularity one emits per-symbol items") {
  SimConfig cfg = default_sim_config();
  cfg.batch_symbols = 1;
  SimOutput out = run_simulation(RunParams{100, mcs_from_label("3.0"), 1}, cfg);
  std::uint64_t eq_in_items = 0, sink_bits = 0;
  for (const BufferEvent& e : out.log.events()) {
    if (e.buffer_id == "fd_equalizer.in" && e.kind == EventKind::Put) {
      REQUIRE(e.item_units == 1);
      ++eq_in_items;
    }
    if (e.buffer_id == "sink.in" && e.kind == EventKind::Put) sink_bits += e.item_units;
  }
  REQUIRE(eq_in_items == 3 * 672 / 6);  // one item per payload symbol
  REQUIRE(sink_bits == 800);
}

TEST_CASE("batch_in collects items before the cycle starts") {
  Harness h;
  Block& b = h.add("pair", BlockKind::Passthrough, FixedLatencyModel{SimTime::ps(10)});
  b.spec.batch_in = 2;
  h.add_sink();
  h.wire_and_spawn();
  h.run.engine.spawn("driver",
                     emit_at(h.run, *b.input,
                             {{5, payload_item(1, 0)}, {50, payload_item(1, 1)}}, true));
  h.run.engine.run_until_idle();

  // one request covers the whole two-item cycle; the cycle starts only once
  // the second item exists, then services run back to back
  auto requests = h.events_on("pair.in", EventKind::Request);
  REQUIRE(requests.size() == 2);  // the data cycle plus the frame-end cycle
  auto sink_puts = h.events_on("sink.in", EventKind::Put);
  REQUIRE(sink_puts.size() == 2);
  REQUIRE(sink_puts[0]->t == SimTime::ps(60));
  REQUIRE(sink_puts[1]->t == SimTime::ps(70));
}

TEST_CASE("conservation, causality and fifo hold over random configurations") {
  std::mt19937 rng(31337);
  std::vector<Mcs> mcs = all_mcs();
  const std::uint32_t batches[] = {1, 7, 448};
  for (int trial = 0; trial < 20; ++trial) {
    SimConfig cfg = default_sim_config();
    cfg.batch_symbols = batches[rng() % 3];
    std::uint64_t payload = 1 + rng() % 4096;
    Mcs m = mcs[rng() % mcs.size()];
    std::uint32_t iters = 1 + rng() % 10;
    INFO("payload " << payload << " mcs " << m.label() << " iters " << iters << " batch "
                    << cfg.batch_symbols);
    SimOutput out = run_simulation(RunParams{payload, m, iters}, cfg);

    std::uint64_t sink_bits = 0;
    std::map<std::string, std::vector<const BufferEvent*>> puts, gets;
    for (const BufferEvent& e : out.log.events()) {
      if (e.kind == EventKind::Put && e.buffer_id == "sink.in") sink_bits += e.item_units;
      if (e.kind == EventKind::Put) puts[e.buffer_id].push_back(&e);
      if (e.kind == EventKind::Get) gets[e.buffer_id].push_back(&e);
    }
    REQUIRE(sink_bits == payload * 8);
    for (const auto& [buffer, get_list] : gets) {
      REQUIRE(get_list.size() == puts[buffer].size());  // everything drained
      for (std::size_t i = 0; i < get_list.size(); ++i) {
        REQUIRE(get_list[i]->t >= puts[buffer][i]->t);
        REQUIRE(get_list[i]->seq_in_frame == puts[buffer][i]->seq_in_frame);
      }
    }
  }
}

TEST_CASE("largest allowed payload flows through intact") {
  SimConfig cfg = default_sim_config();
  SimOutput out = run_simulation(RunParams{262'143, mcs_from_label("3.3"), 1}, cfg);
  std::uint64_t sink_bits = 0;
  for (const BufferEvent& e : out.log.events())
    if (e.kind == EventKind::Put && e.buffer_id == "sink.in") sink_bits += e.item_units;
  REQUIRE(sink_bits == 262'143ULL * 8);
  REQUIRE_NOTHROW(total_latency(out.log));
}

TEST_CASE("every block's first logged event is a request") {
  SimConfig cfg = default_sim_config();
  SimOutput out = run_simulation(RunParams{100, mcs_from_label("2.0"), 10}, cfg);
  std::map<std::string, EventKind> first_kind;
  for (const BufferEvent& e : out.log.events())
    if (!first_kind.count(e.block_id)) first_kind[e.block_id] = e.kind;
  REQUIRE(first_kind.size() == 11);  // source plus the ten chain blocks
  for (const auto& [block, kind] : first_kind) {
    INFO(block);
    REQUIRE(kind == EventKind::Request);
  }
}
