#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "phylat/analysis.hpp"
#include "phylat/config.hpp"
#include "phylat/simulate.hpp"
#include "phylat/sweep.hpp"
#include "phylat/version.hpp"

namespace phylat {

namespace cli_detail {

inline int exit_invalid(const std::string& msg, std::ostream& err) {
  err << "error: " << msg << "\n";
  return 2;
}

inline SimConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) return default_sim_config();
  return load_sim_config(config_path);
}

inline void write_or_print(const std::string& out_path, const std::string& content,
                           std::ostream& os) {
  if (out_path.empty()) {
    os << content;
    return;
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + out_path + "' for writing");
  f << content;
}

inline std::uint32_t default_pool_size(std::uint32_t from_config) {
  if (const char* env = std::getenv("PHYLAT_POOL_SIZE")) {
    try {
      unsigned long v = std::stoul(env);
      if (v >= 1) return static_cast<std::uint32_t>(v);
    } catch (const std::exception&) {
    }
  }
  return from_config >= 1 ? from_config : 1;
}

}  // namespace cli_detail

/// Command-line entry point. Exit codes: 0 success, 1 partial failure
/// (some sweep runs failed), 2 invalid input.
inline int cli_main(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"phylat: wireless PHY latency tracking simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  // let `--config` appear before or after the subcommand
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "config file (JSON)")->capture_default_str();

  // run
  auto* run_cmd = app.add_subcommand("run", "simulate a single frame, emit trace and summary");
  std::uint64_t run_payload = 0;
  std::string run_mcs;
  std::uint32_t run_iters = 0;
  std::string run_out = "out";
  run_cmd->add_option("--payload-bytes", run_payload, "payload length in bytes")->required();
  run_cmd->add_option("--mcs", run_mcs, "MCS label, e.g. 2.0")->required();
  run_cmd->add_option("--iterations", run_iters, "LDPC decoder iterations")->required();
  run_cmd->add_option("--out", run_out, "output directory");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "run the configured parameter grid");
  std::uint32_t sweep_pool = 0;
  std::string sweep_out;
  sweep_cmd->add_option("--pool", sweep_pool, "worker pool size (default: PHYLAT_POOL_SIZE or config)");
  sweep_cmd->add_option("--out", sweep_out, "output directory (overrides config)");

  // aggregate
  auto* agg_cmd = app.add_subcommand("aggregate", "merge result directories into one table");
  std::vector<std::string> agg_dirs;
  std::string agg_out;
  agg_cmd->add_option("dirs", agg_dirs, "result directories")->required()->expected(-1);
  agg_cmd->add_option("--out", agg_out, "write the merged table here (default: stdout)");

  // analyze
  auto* an_cmd = app.add_subcommand("analyze", "turn a trace into reports");
  std::string an_trace;
  std::string an_report = "all";
  std::string an_buffer;
  double an_margin = 0.05;
  an_cmd->add_option("--trace", an_trace, "trace file")->required();
  an_cmd->add_option("--report", an_report, "total|residence|bottlenecks|occupancy|all");
  an_cmd->add_option("--buffer", an_buffer, "buffer id for the occupancy report");
  an_cmd->add_option("--near-critical-margin", an_margin,
                     "idle fraction of a gap below which a drain counts as barely keeping up");

  // plot-data
  auto* plot_cmd = app.add_subcommand("plot-data", "emit plot-ready tables");
  std::string plot_kind, plot_trace, plot_results, plot_out;
  plot_cmd->add_option("--kind", plot_kind, "event_overview|iteration_sweep|region")->required();
  plot_cmd->add_option("--trace", plot_trace, "trace file (event_overview)");
  plot_cmd->add_option("--results", plot_results, "results table (iteration_sweep, region)");
  plot_cmd->add_option("--out", plot_out, "output file (default: stdout)");

  // validate-config
  auto* val_cmd = app.add_subcommand("validate-config", "check a config file's constraints");

  std::vector<const char*> argv;
  argv.push_back("phylat");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) {
      SimConfig cfg = cli_detail::load_or_default(config_path);
      mcs_from_label(run_mcs);  // reject bad labels before touching the filesystem
      std::string cfg_hash = config_hash(cfg);
      RunSpec spec{run_payload, run_mcs, run_iters,
                   make_run_id(run_payload, run_mcs, run_iters, cfg_hash)};
      RunResult r = execute_one(spec, cfg, run_out);
      out << render_result(r);
      out << "output=" << (std::filesystem::path(run_out) / spec.run_id).string() << "\n";
      if (!r.ok) return cli_detail::exit_invalid(r.error, err);
      return 0;
    }
    if (sweep_cmd->parsed()) {
      if (config_path.empty())
        return cli_detail::exit_invalid("sweep requires --config with a sweep section", err);
      nlohmann::json j = load_json_file(config_path);
      SimConfig cfg = sim_config_from_json(j);
      SweepConfig sw = sweep_config_from_json(j);
      if (!sweep_out.empty()) sw.output_dir = sweep_out;
      std::uint32_t pool = sweep_pool >= 1 ? sweep_pool : cli_detail::default_pool_size(sw.pool_size);
      std::vector<RunSpec> runs = expand(sw, cfg);
      std::vector<RunResult> results = execute(runs, cfg, pool, sw.output_dir);
      std::size_t failed = 0;
      for (const RunResult& r : results)
        if (!r.ok) ++failed;
      out << "runs=" << results.size() << " ok=" << results.size() - failed
          << " failed=" << failed << " out=" << sw.output_dir << "\n";
      return failed == 0 ? 0 : 1;
    }
    if (agg_cmd->parsed()) {
      std::vector<RunResult> merged = aggregate(agg_dirs);
      cli_detail::write_or_print(agg_out, render_results_table(merged), out);
      return 0;
    }
    if (an_cmd->parsed()) {
      std::ifstream f(an_trace);
      if (!f) return cli_detail::exit_invalid("cannot open trace '" + an_trace + "'", err);
      TraceLog log = import_rows(f);
      if (an_report == "total" || an_report == "all")
        out << "total_latency_ps=" << total_latency(log).ticks() << "\n";
      if (an_report == "bottlenecks" || an_report == "all") {
        AnalysisOptions opts;
        opts.near_critical_margin = an_margin;
        out << "buffer\tblock\tverdict\tmax_occupancy\n";
        for (const BottleneckVerdict& v : detect_bottlenecks(log, opts))
          out << v.buffer_id << '\t' << v.block_id << '\t' << to_string(v.verdict) << '\t'
              << v.max_occupancy << '\n';
      }
      if (an_report == "residence" || an_report == "all") {
        ResidenceReport rep = residence_report(log);
        out << "block\twait_min_ps\twait_max_ps\twait_total_ps\twait_count\tservice_total_ps\tflag_"
               "wait_ps\n";
        for (const auto& [block, r] : rep.blocks)
          out << block << '\t' << r.wait_min.ticks() << '\t' << r.wait_max.ticks() << '\t'
              << r.wait_total.ticks() << '\t' << r.wait_count << '\t' << r.service_total.ticks()
              << '\t' << r.flag_wait.ticks() << '\n';
      }
      if (an_report == "occupancy") {
        if (an_buffer.empty())
          return cli_detail::exit_invalid("occupancy report requires --buffer", err);
        out << "t_ps\toccupancy\n";
        for (const auto& [t, occ] : occupancy_series(log, an_buffer))
          out << t.ticks() << '\t' << occ << '\n';
      }
      if (an_report != "total" && an_report != "bottlenecks" && an_report != "residence" &&
          an_report != "occupancy" && an_report != "all")
        return cli_detail::exit_invalid("unknown report '" + an_report + "'", err);
      return 0;
    }
    if (plot_cmd->parsed()) {
      std::ostringstream table;
      if (plot_kind == "event_overview") {
        if (plot_trace.empty())
          return cli_detail::exit_invalid("event_overview needs --trace", err);
        if (!plot_results.empty())
          return cli_detail::exit_invalid("event_overview takes --trace, not --results", err);
        std::ifstream f(plot_trace);
        if (!f) return cli_detail::exit_invalid("cannot open trace '" + plot_trace + "'", err);
        TraceLog log = import_rows(f);
        plot_event_overview(log, table);
      } else if (plot_kind == "iteration_sweep" || plot_kind == "region") {
        if (plot_results.empty())
          return cli_detail::exit_invalid(plot_kind + " needs --results", err);
        if (!plot_trace.empty())
          return cli_detail::exit_invalid(plot_kind + " takes --results, not --trace", err);
        std::ifstream f(plot_results);
        if (!f) return cli_detail::exit_invalid("cannot open results '" + plot_results + "'", err);
        std::vector<RunResult> results = parse_results_table(f, plot_results);
        std::vector<RunPoint> points;
        for (const RunResult& r : results)
          if (r.ok) points.push_back(r.point());
        if (plot_kind == "iteration_sweep")
          plot_iteration_sweep(points, table);
        else
          plot_region(latency_region(points), table);
      } else {
        return cli_detail::exit_invalid("unknown plot kind '" + plot_kind + "'", err);
      }
      cli_detail::write_or_print(plot_out, table.str(), out);
      return 0;
    }
    if (val_cmd->parsed()) {
      if (config_path.empty())
        return cli_detail::exit_invalid("validate-config requires --config", err);
      SimConfig cfg = load_sim_config(config_path);
      validate(cfg);
      out << "config ok, hash=" << config_hash(cfg) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    return cli_detail::exit_invalid(e.what(), err);
  }
  return 2;
}

}  // namespace phylat
