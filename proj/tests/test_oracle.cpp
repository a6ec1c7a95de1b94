#include <catch2/catch_amalgamated.hpp>

#include <deque>
#include <map>
#include <random>

#include "phylat/analysis.hpp"
#include "phylat/pipeline.hpp"
#include "queue_replay.hpp"

using namespace phylat;

TEST_CASE("kernel matches the brute-force queue replay on random pipelines") {
  std::mt19937 rng(20260810);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t stages = 1 + rng() % 3;
    std::size_t items = 1 + rng() % 20;

    std::vector<std::uint64_t> emissions;
    std::uint64_t t = rng() % 50;
    for (std::size_t i = 0; i < items; ++i) {
      emissions.push_back(t);
      t += rng() % 100;  // zero gaps allowed
    }
    std::vector<std::uint64_t> delays(stages);
    std::vector<std::vector<std::uint64_t>> service(stages);
    for (std::size_t j = 0; j < stages; ++j) {
      delays[j] = rng() % 60;
      service[j].assign(items, delays[j]);
    }

    oracle::Replay replay(emissions, service);
    oracle::KernelChain kernel(delays);
    kernel.execute(emissions);

    INFO("trial " << trial << ": " << stages << " stages, " << items << " items");
    REQUIRE(total_latency(kernel.run.log, "sink.in").ticks() == replay.total_latency());

    for (std::size_t j = 0; j < stages; ++j) {
      std::string buffer = "s" + std::to_string(j) + ".in";
      std::vector<std::uint64_t> put_ts, get_ts;
      std::map<std::uint64_t, std::uint64_t> kernel_steps;
      for (const BufferEvent& e : kernel.run.log.events()) {
        if (e.buffer_id != buffer) continue;
        if (e.kind == EventKind::Put) put_ts.push_back(e.t.ticks());
        if (e.kind == EventKind::Get) get_ts.push_back(e.t.ticks());
        if (e.kind == EventKind::Put || e.kind == EventKind::Get)
          kernel_steps[e.t.ticks()] = e.occupancy_after;
      }
      REQUIRE(put_ts == replay.arrive[j]);
      REQUIRE(get_ts == replay.start[j]);
      REQUIRE(kernel_steps == replay.occupancy_steps(j));
    }
  }
}

TEST_CASE("replay equivalence holds for throughput models with unit counts") {
  std::mt19937 rng(4242);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t stages = 1 + rng() % 3;
    std::size_t items = 1 + rng() % 15;

    std::vector<std::uint64_t> emissions;
    std::vector<std::uint64_t> units;
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < items; ++i) {
      emissions.push_back(t);
      t += rng() % 400;
      units.push_back(1 + rng() % 10);
    }
    // a rate of 10^12/k units per second makes service exactly units*k ticks
    std::vector<std::uint64_t> per_unit(stages);
    std::vector<std::vector<std::uint64_t>> service(stages);
    for (std::size_t j = 0; j < stages; ++j) {
      per_unit[j] = 1 + rng() % 40;
      for (std::size_t i = 0; i < items; ++i) service[j].push_back(units[i] * per_unit[j]);
    }
    oracle::Replay replay(emissions, service);

    SimRun run;
    std::deque<ServiceModel> models;
    std::vector<Block*> chain;
    for (std::size_t j = 0; j < stages; ++j) {
      auto b = std::make_unique<Block>();
      b->spec.id = "s" + std::to_string(j);
      b->spec.kind = BlockKind::Passthrough;
      b->input = &run.add_buffer(b->spec.id + ".in", b->spec.id);
      models.push_back(ThroughputModel{Ratio{kPicosPerSecond / per_unit[j], 1}, SimTime::ps(0)});
      b->model = &models.back();
      chain.push_back(b.get());
      run.blocks.push_back(std::move(b));
    }
    auto sink = std::make_unique<Block>();
    sink->spec.id = "sink";
    sink->spec.kind = BlockKind::Sink;
    sink->input = &run.add_buffer("sink.in", "sink");
    chain.push_back(sink.get());
    run.blocks.push_back(std::move(sink));
    for (std::size_t j = 0; j + 1 < chain.size(); ++j) chain[j]->output = chain[j + 1]->input;
    for (Block* b : chain) run.engine.spawn(b->spec.id, run_block(run, *b));

    auto emit_units = [](SimRun& r, Buffer& dest, std::vector<std::uint64_t> times,
                         std::vector<std::uint64_t> sizes) -> Process {
      for (std::size_t i = 0; i < times.size(); ++i) {
        if (SimTime::ps(times[i]) > r.engine.now())
          co_await r.engine.wait(SimTime::ps(times[i]) - r.engine.now());
        DataItem item;
        item.kind = ItemKind::Chunk;
        item.role = ChunkRole::Payload;
        item.units = sizes[i];
        item.seq_in_frame = static_cast<std::uint32_t>(i);
        dest.put(r.engine, r.log, "driver", item);
      }
      dest.put_end(r.engine);
    };
    run.engine.spawn("driver", emit_units(run, *chain[0]->input, emissions, units));
    run.engine.run_until_idle();

    INFO("trial " << trial);
    REQUIRE(total_latency(run.log, "sink.in").ticks() == replay.total_latency());
    for (std::size_t j = 0; j < stages; ++j) {
      std::string buffer = "s" + std::to_string(j) + ".in";
      std::vector<std::uint64_t> get_ts;
      for (const BufferEvent& e : run.log.events())
        if (e.buffer_id == buffer && e.kind == EventKind::Get) get_ts.push_back(e.t.ticks());
      REQUIRE(get_ts == replay.start[j]);
    }
  }
}
