#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "phylat/analysis.hpp"
#include "phylat/config.hpp"
#include "phylat/simulate.hpp"

namespace phylat {

struct RunSpec {
  std::uint64_t payload_bytes = 0;
  std::string mcs_label;
  std::uint32_t iterations = 0;
  std::string run_id;
};

/// Stable run identity: parameter tuple plus the config hash, so identical
/// inputs produce the same id on any machine.
inline std::string make_run_id(std::uint64_t payload_bytes, const std::string& mcs_label,
                               std::uint32_t iterations, const std::string& cfg_hash) {
  std::string key = "p=" + std::to_string(payload_bytes) + "|m=" + mcs_label +
                    "|i=" + std::to_string(iterations) + "|cfg=" + cfg_hash;
  return to_hex16(fnv1a64(key));
}

/// Expands the sweep axes into the ordered run list: payload-major, then MCS
/// in listed order, then iterations in listed order.
inline std::vector<RunSpec> expand(const SweepConfig& sweep, const SimConfig& cfg) {
  if (sweep.payload_bytes.empty()) throw ConfigError("sweep: empty axis 'payload_bytes'");
  if (sweep.mcs.empty()) throw ConfigError("sweep: empty axis 'mcs'");
  if (sweep.iterations.empty()) throw ConfigError("sweep: empty axis 'iterations'");
  auto check_unique = [](const auto& axis, const char* name) {
    auto copy = axis;
    std::sort(copy.begin(), copy.end());
    if (std::adjacent_find(copy.begin(), copy.end()) != copy.end())
      throw ConfigError(std::string("sweep: duplicate value in axis '") + name + "'");
  };
  check_unique(sweep.payload_bytes, "payload_bytes");
  check_unique(sweep.mcs, "mcs");
  check_unique(sweep.iterations, "iterations");
  for (const std::string& label : sweep.mcs) mcs_from_label(label);  // validates

  std::string cfg_hash = config_hash(cfg);
  std::vector<RunSpec> runs;
  runs.reserve(sweep.payload_bytes.size() * sweep.mcs.size() * sweep.iterations.size());
  for (std::uint64_t payload : sweep.payload_bytes)
    for (const std::string& label : sweep.mcs)
      for (std::uint32_t iters : sweep.iterations)
        runs.push_back(RunSpec{payload, label, iters, make_run_id(payload, label, iters, cfg_hash)});
  return runs;
}

struct RunResult {
  std::string run_id;
  std::uint64_t payload_bytes = 0;
  std::string mcs_label;
  std::uint32_t iterations = 0;
  std::string config_hash;
  bool ok = false;
  std::string error;
  SimTime total_latency;
  std::map<std::string, BlockResidence> residence;
  std::vector<BottleneckVerdict> verdicts;
  std::string trace_path;

  RunPoint point() const {
    return RunPoint{payload_bytes, mcs_label, iterations, total_latency};
  }
};

inline std::string render_result(const RunResult& r) {
  std::ostringstream os;
  os << "run_id=" << r.run_id << "\n";
  os << "status=" << (r.ok ? "ok" : "failed") << "\n";
  if (!r.ok) os << "error=" << r.error << "\n";
  os << "payload_bytes=" << r.payload_bytes << "\n";
  os << "mcs=" << r.mcs_label << "\n";
  os << "iterations=" << r.iterations << "\n";
  os << "config_hash=" << r.config_hash << "\n";
  if (r.ok) os << "total_latency_ps=" << r.total_latency.ticks() << "\n";
  if (!r.trace_path.empty()) os << "trace=" << r.trace_path << "\n";
  if (!r.verdicts.empty()) {
    os << "[verdicts]\n";
    for (const BottleneckVerdict& v : r.verdicts)
      os << v.buffer_id << '\t' << v.block_id << '\t' << to_string(v.verdict) << '\t'
         << v.max_occupancy << '\n';
  }
  if (!r.residence.empty()) {
    os << "[residence]\n";
    for (const auto& [block, res] : r.residence) {
      std::uint64_t mean =
          res.wait_count == 0 ? 0
                              : muldiv_round_half_up(res.wait_total.ticks(), 1, res.wait_count);
      os << block << '\t' << res.wait_min.ticks() << '\t' << mean << '\t' << res.wait_max.ticks()
         << '\t' << res.wait_total.ticks() << '\t' << res.wait_count << '\t'
         << res.service_total.ticks() << '\t' << res.flag_wait.ticks() << '\n';
    }
  }
  return os.str();
}

inline RunResult parse_result(std::istream& is, const std::string& context) {
  RunResult r;
  std::string line;
  std::string section;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line == "[verdicts]" || line == "[residence]") {
      section = line;
      continue;
    }
    if (section == "[verdicts]") {
      auto f = detail::split_tabs(line);
      if (f.size() != 4) throw std::runtime_error(context + ": bad verdict row '" + line + "'");
      BottleneckVerdict v;
      v.buffer_id = f[0];
      v.block_id = f[1];
      v.verdict = f[2] == "clear"           ? Verdict::Clear
                  : f[2] == "near_critical" ? Verdict::NearCritical
                                            : Verdict::Bottleneck;
      v.max_occupancy = detail::parse_u64(f[3], "max_occupancy", 0);
      r.verdicts.push_back(std::move(v));
      continue;
    }
    if (section == "[residence]") {
      auto f = detail::split_tabs(line);
      if (f.size() != 8) throw std::runtime_error(context + ": bad residence row '" + line + "'");
      BlockResidence res;
      res.wait_min = SimTime::ps(detail::parse_u64(f[1], "wait_min", 0));
      res.wait_max = SimTime::ps(detail::parse_u64(f[3], "wait_max", 0));
      res.wait_total = SimTime::ps(detail::parse_u64(f[4], "wait_total", 0));
      res.wait_count = detail::parse_u64(f[5], "wait_count", 0);
      res.service_total = SimTime::ps(detail::parse_u64(f[6], "service_total", 0));
      res.flag_wait = SimTime::ps(detail::parse_u64(f[7], "flag_wait", 0));
      r.residence[f[0]] = res;
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(context + ": expected key=value, got '" + line + "'");
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "run_id") r.run_id = value;
    else if (key == "status") r.ok = value == "ok";
    else if (key == "error") r.error = value;
    else if (key == "payload_bytes") r.payload_bytes = detail::parse_u64(value, "payload_bytes", 0);
    else if (key == "mcs") r.mcs_label = value;
    else if (key == "iterations")
      r.iterations = static_cast<std::uint32_t>(detail::parse_u64(value, "iterations", 0));
    else if (key == "config_hash") r.config_hash = value;
    else if (key == "total_latency_ps")
      r.total_latency = SimTime::ps(detail::parse_u64(value, "total_latency_ps", 0));
    else if (key == "trace") r.trace_path = value;
    else throw std::runtime_error(context + ": unknown key '" + key + "'");
  }
  if (r.run_id.empty()) throw std::runtime_error(context + ": missing run_id");
  return r;
}

/// Canonical result ordering, independent of how the sweep axes were listed.
inline bool canonical_less(const RunResult& a, const RunResult& b) {
  if (a.payload_bytes != b.payload_bytes) return a.payload_bytes < b.payload_bytes;
  if (a.mcs_label != b.mcs_label) return a.mcs_label < b.mcs_label;
  return a.iterations < b.iterations;
}

inline std::string render_results_table(std::vector<RunResult> results) {
  std::sort(results.begin(), results.end(), canonical_less);
  std::ostringstream os;
  os << "run_id\tpayload_bytes\tmcs\titerations\tstatus\ttotal_latency_ps\n";
  for (const RunResult& r : results) {
    os << r.run_id << '\t' << r.payload_bytes << '\t' << r.mcs_label << '\t' << r.iterations << '\t'
       << (r.ok ? "ok" : "failed") << '\t';
    if (r.ok)
      os << r.total_latency.ticks();
    else
      os << '-';
    os << '\n';
  }
  return os.str();
}

/// Reads a results table back; failed rows come back with ok=false.
inline std::vector<RunResult> parse_results_table(std::istream& is, const std::string& context) {
  std::vector<RunResult> out;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(context + ": empty results table");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = detail::split_tabs(line);
    if (f.size() != 6) throw std::runtime_error(context + ": bad results row '" + line + "'");
    RunResult r;
    r.run_id = f[0];
    r.payload_bytes = detail::parse_u64(f[1], "payload_bytes", 0);
    r.mcs_label = f[2];
    r.iterations = static_cast<std::uint32_t>(detail::parse_u64(f[3], "iterations", 0));
    r.ok = f[4] == "ok";
    if (r.ok) r.total_latency = SimTime::ps(detail::parse_u64(f[5], "total_latency_ps", 0));
    out.push_back(std::move(r));
  }
  return out;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  f << content;
  f.flush();
  if (!f) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace detail

/// Executes one run end to end: simulate, analyze, write trace.tsv and
/// result.txt under out_dir/<run_id>/. Failures are captured in the result.
inline RunResult execute_one(const RunSpec& spec, const SimConfig& cfg,
                             const std::filesystem::path& out_dir) {
  RunResult r;
  r.run_id = spec.run_id;
  r.payload_bytes = spec.payload_bytes;
  r.mcs_label = spec.mcs_label;
  r.iterations = spec.iterations;
  r.config_hash = config_hash(cfg);
  std::filesystem::path run_dir = out_dir / spec.run_id;
  try {
    std::filesystem::create_directories(run_dir);
    RunParams params{spec.payload_bytes, mcs_from_label(spec.mcs_label), spec.iterations};
    SimOutput sim = run_simulation(params, cfg);
    detail::write_file(run_dir / "trace.tsv", export_rows(sim.log));
    r.trace_path = "trace.tsv";
    r.total_latency = total_latency(sim.log);
    r.residence = residence_report(sim.log).blocks;
    r.verdicts = detect_bottlenecks(sim.log);
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  detail::write_file(run_dir / "result.txt", render_result(r));
  return r;
}

/// Runs the grid over an isolated worker pool. Each run owns its output
/// directory; the manifest and results table are written once everything
/// finished, so output bytes do not depend on the pool size.
inline std::vector<RunResult> execute(const std::vector<RunSpec>& runs, const SimConfig& cfg,
                                      std::uint32_t pool_size, const std::string& output_dir) {
  if (pool_size < 1) throw ConfigError("pool_size must be >= 1");
  std::filesystem::path out_dir(output_dir);
  std::filesystem::create_directories(out_dir);

  std::vector<RunResult> results(runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      try {
        results[i] = execute_one(runs[i], cfg, out_dir);
      } catch (const std::exception& e) {
        results[i].run_id = runs[i].run_id;
        results[i].payload_bytes = runs[i].payload_bytes;
        results[i].mcs_label = runs[i].mcs_label;
        results[i].iterations = runs[i].iterations;
        results[i].ok = false;
        results[i].error = e.what();
      }
    }
  };
  std::size_t n_workers = std::min<std::size_t>(pool_size, runs.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  std::ostringstream manifest;
  for (const RunResult& r : results)
    manifest << r.run_id << '\t' << r.payload_bytes << '\t' << r.mcs_label << '\t' << r.iterations
             << '\t' << (r.ok ? "ok" : "failed") << '\n';
  detail::write_file(out_dir / "manifest.txt", manifest.str());
  detail::write_file(out_dir / "results.tsv", render_results_table(results));
  return results;
}

/// Merges per-run results from several output directories. Identical
/// duplicates collapse; any disagreement under one run_id is a hard error.
inline std::vector<RunResult> aggregate(const std::vector<std::string>& dirs) {
  if (dirs.empty()) throw ConfigError("aggregate: no input directories");
  std::map<std::string, std::pair<RunResult, std::string>> merged;  // run_id -> (result, raw)
  std::set<std::string> config_hashes;
  for (const std::string& dir : dirs) {
    std::filesystem::path root(dir);
    if (!std::filesystem::is_directory(root))
      throw std::runtime_error("aggregate: '" + dir + "' is not a directory");
    std::vector<std::filesystem::path> run_dirs;
    for (const auto& entry : std::filesystem::directory_iterator(root))
      if (entry.is_directory() && std::filesystem::exists(entry.path() / "result.txt"))
        run_dirs.push_back(entry.path());
    std::sort(run_dirs.begin(), run_dirs.end());
    for (const std::filesystem::path& rd : run_dirs) {
      std::ifstream f(rd / "result.txt");
      if (!f) throw std::runtime_error("aggregate: cannot read '" + (rd / "result.txt").string() + "'");
      std::ostringstream raw;
      raw << f.rdbuf();
      std::istringstream is(raw.str());
      RunResult r = parse_result(is, (rd / "result.txt").string());
      config_hashes.insert(r.config_hash);
      std::string run_id = r.run_id;
      auto it = merged.find(run_id);
      if (it == merged.end()) {
        merged.emplace(std::move(run_id), std::make_pair(std::move(r), raw.str()));
      } else if (it->second.second != raw.str()) {
        throw std::runtime_error("aggregate: conflicting results for run_id " + run_id +
                                 " (corrupt or mismatched configs)");
      }
    }
  }
  if (config_hashes.size() > 1)
    throw std::runtime_error("aggregate: results stem from " +
                             std::to_string(config_hashes.size()) +
                             " different configs; refusing to merge");
  std::vector<RunResult> out;
  out.reserve(merged.size());
  for (auto& [id, pair] : merged) out.push_back(std::move(pair.first));
  std::sort(out.begin(), out.end(), canonical_less);
  return out;
}

}  // namespace phylat
