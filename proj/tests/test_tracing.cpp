#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "phylat/analysis.hpp"
#include "phylat/simulate.hpp"
#include "phylat/tracing.hpp"

using namespace phylat;

TEST_CASE("record keeps kernel order and rejects regressions") {
  TraceLog log;
  BufferEvent a;
  a.t = SimTime::ps(5);
  a.block_id = "b";
  a.buffer_id = "b.in";
  a.kind = EventKind::Put;
  log.record(a);
  BufferEvent b = a;
  b.t = SimTime::ps(5);
  log.record(b);  // equal times fine
  BufferEvent c = a;
  c.t = SimTime::ps(4);
  REQUIRE_THROWS_AS(log.record(c), std::logic_error);
}

TEST_CASE("export produces the documented row format") {
  TraceLog log;
  log.metadata = RunMetadata{100, "2.0", 10, "deadbeefdeadbeef", "phylat 0.1.0"};
  BufferEvent e;
  e.t = SimTime::ps(1234);
  e.block_id = "demapper";
  e.buffer_id = "demapper.in";
  e.kind = EventKind::Get;
  e.occupancy_after = 2;
  e.item_units = 448;
  e.frame_id = 0;
  e.seq_in_frame = 7;
  log.record(e);
  std::string text = export_rows(log);
  REQUIRE(text ==
          "payload_bytes=100\tmcs=2.0\titerations=10\tconfig_hash=deadbeefdeadbeef\t"
          "tool_version=phylat 0.1.0\n"
          "1234\tdemapper\tdemapper.in\tget\t2\t448\t0\t7\n");
}

TEST_CASE("export of an empty run is header-only") {
  TraceLog log;
  log.metadata = RunMetadata{0, "0.0", 1, "x", "phylat 0.1.0"};
  std::string text = export_rows(log);
  REQUIRE(text.find('\n') == text.size() - 1);
}

TEST_CASE("export is deterministic and round-trips") {
  SimConfig cfg = default_sim_config();
  SimOutput out = run_simulation(RunParams{100, mcs_from_label("2.0"), 10}, cfg);
  std::string once = export_rows(out.log);
  std::string twice = export_rows(out.log);
  REQUIRE(once == twice);

  TraceLog parsed = import_rows(once);
  REQUIRE(parsed == out.log);
  REQUIRE(export_rows(parsed) == once);
}

TEST_CASE("import rejects malformed input with line context") {
  REQUIRE_THROWS_WITH(import_rows(std::string("payload_bytes=1\n1\tb\tb.in\tget\t0\n")),
                      Catch::Matchers::ContainsSubstring("line 2"));
  REQUIRE_THROWS_WITH(import_rows(std::string("bogus\n")),
                      Catch::Matchers::ContainsSubstring("key=value"));
  REQUIRE_THROWS_AS(import_rows(std::string("")), std::runtime_error);
}

TEST_CASE("identical runs export byte-identical traces") {
  SimConfig cfg = default_sim_config();
  RunParams params{1000, mcs_from_label("1.2"), 4};
  std::string a = export_rows(run_simulation(params, cfg).log);
  std::string b = export_rows(run_simulation(params, cfg).log);
  REQUIRE(a == b);
}

TEST_CASE("trace bookkeeping: puts minus gets equals final occupancy") {
  SimConfig cfg = default_sim_config();
  SimOutput out = run_simulation(RunParams{100, mcs_from_label("0.0"), 2}, cfg);
  std::map<std::string, long long> net;
  for (const BufferEvent& e : out.log.events()) {
    if (e.kind == EventKind::Put) net[e.buffer_id]++;
    if (e.kind == EventKind::Get) net[e.buffer_id]--;
  }
  for (const auto& [buffer, n] : net) {
    INFO(buffer);
    REQUIRE(n == 0);  // completed run: every buffer drained
  }
}

TEST_CASE("flag set precedes the equalizer's first get in the log") {
  SimConfig cfg = default_sim_config();
  SimOutput out = run_simulation(RunParams{100, mcs_from_label("2.0"), 10}, cfg);
  bool seen_flag = false;
  for (const BufferEvent& e : out.log.events()) {
    if (e.kind == EventKind::FlagSet && e.buffer_id == "fd_equalizer.flag") seen_flag = true;
    if (e.kind == EventKind::Get && e.buffer_id == "fd_equalizer.in") {
      REQUIRE(seen_flag);
      break;
    }
  }
}

TEST_CASE("replay: total latency recomputed from exported log matches the live log") {
  SimConfig cfg = default_sim_config();
  SimOutput out = run_simulation(RunParams{333, mcs_from_label("2.1"), 6}, cfg);
  SimTime live = total_latency(out.log);
  TraceLog replayed = import_rows(export_rows(out.log));
  REQUIRE(total_latency(replayed) == live);
}

TEST_CASE("metadata echoes the run parameters") {
  SimConfig cfg = default_sim_config();
  SimOutput out = run_simulation(RunParams{100, mcs_from_label("2.0"), 10}, cfg);
  REQUIRE(out.log.metadata.payload_bytes == 100);
  REQUIRE(out.log.metadata.mcs_label == "2.0");
  REQUIRE(out.log.metadata.iterations == 10);
  REQUIRE(out.log.metadata.config_hash == config_hash(cfg));
  REQUIRE(out.log.metadata.tool_version == kToolVersion);
}
