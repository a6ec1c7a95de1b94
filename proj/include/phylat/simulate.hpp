#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "phylat/config.hpp"
#include "phylat/pipeline.hpp"

namespace phylat {

struct SimOutput {
  TraceLog log;
  SimTime end_time;
};

/// Builds the configured topology for one frame and runs it to completion.
/// Buffers are named "<block>.in" and flag buffers "<block>.flag"; those ids
/// are what the trace and all downstream analysis refer to.
inline SimOutput run_simulation(const RunParams& params, const SimConfig& cfg) {
  validate(cfg);
  if (params.iterations < 1) throw ConfigError("iterations must be >= 1");
  FrameSpec frame = make_frame(params.payload_bytes, params.mcs, cfg.constants);

  SimRun run;
  run.frame = frame;
  run.svc = ServiceContext{frame.mcs.rate, params.iterations};
  run.batch_symbols = cfg.batch_symbols;

  Buffer& source_marker = run.add_buffer("source", "source");

  std::map<std::string, Block*> by_id;
  std::vector<Block*> chain;
  for (const BlockSpec& spec : cfg.topology.blocks) {
    auto block = std::make_unique<Block>();
    block->spec = spec;
    block->input = &run.add_buffer(spec.id + ".in", spec.id);
    if (spec.kind != BlockKind::Sink) block->model = &cfg.catalog.at(spec.id).model;
    if (spec.kind == BlockKind::Regroup) {
      block->scale = detail::resolve_scale(spec.scale, frame);
      block->out_units = detail::resolve_out_units(spec.out_units, frame, cfg.batch_symbols);
    }
    if (spec.kind == BlockKind::Descramble) block->payload_bits_remaining = frame.payload_bits();
    by_id[spec.id] = block.get();
    chain.push_back(block.get());
    run.blocks.push_back(std::move(block));
  }
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) chain[i]->output = chain[i + 1]->input;
  for (Block* b : chain) {
    if (!b->spec.flag_to.empty()) {
      FlagBuffer& flag = run.add_flag(b->spec.flag_to + ".flag");
      b->flag_out = &flag;
      by_id.at(b->spec.flag_to)->gate = &flag;
    }
  }

  run.engine.spawn("source",
                   run_source(run, source_marker, *chain.front()->input,
                              serialize_schedule(frame, cfg.constants)));
  for (Block* b : chain) run.engine.spawn(b->spec.id, run_block(run, *b));

  SimTime end = run.engine.run_until_idle();
  run.log.metadata = RunMetadata{params.payload_bytes, params.mcs.label(), params.iterations,
                                 config_hash(cfg), kToolVersion};
  return SimOutput{std::move(run.log), end};
}

}  // namespace phylat
