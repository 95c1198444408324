// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "agentsim/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace agentsim {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

const char* to_string(RunPreset preset) {
  switch (preset) {
    case RunPreset::kBaseline: return "baseline";
    case RunPreset::kBaselineSched: return "baseline_sched";
    case RunPreset::kSutradhara: return "sutradhara";
  }
  return "unknown";
}

std::optional<RunPreset> preset_by_name(std::string_view name) {
  if (name == "baseline") return RunPreset::kBaseline;
  if (name == "baseline_sched" || name == "baseline-sched") return RunPreset::kBaselineSched;
  if (name == "sutradhara") return RunPreset::kSutradhara;
  return std::nullopt;
}

FeatureFlags preset_features(RunPreset preset) {
  switch (preset) {
    case RunPreset::kBaseline:
      return FeatureFlags{false, false, false};
    case RunPreset::kBaselineSched:
      return FeatureFlags{false, false, false};
    case RunPreset::kSutradhara:
      return FeatureFlags{true, true, true};
  }
  return {};
}

SchedulerPolicy preset_scheduler(RunPreset preset) {
  return preset == RunPreset::kBaseline ? SchedulerPolicy::kFcfs
                                        : SchedulerPolicy::kRequestAware;
}

SimConfig resolve_sim_config(const RunConfig& config) {
  FeatureFlags flags = preset_features(config.preset);
  if (config.kv_override) flags.kv_tiering = *config.kv_override;
  if (config.ps_override) flags.prompt_splitting = *config.ps_override;
  if (config.ds_override) flags.decode_streaming = *config.ds_override;

  SimConfig sim;
  sim.cost = config.cost;
  sim.cache.block_size = config.block_size;
  sim.cache.capacity_blocks = config.capacity_blocks;
  sim.cache.policy = flags.kv_tiering ? EvictionPolicy::kTiered : EvictionPolicy::kLru;
  sim.scheduler = preset_scheduler(config.preset);
  sim.features = flags;
  sim.tool_failure_probability = config.tool_failure_probability;
  sim.failure_seed = splitmix64(config.seed ^ 0xfa11fa11fa11fa11ULL);
  return sim;
}

namespace {

std::uint64_t trace_content_hash(const std::vector<AgenticRequestSpec>& trace) {
  std::ostringstream out;
  write_trace(trace, out);
  return hash_string(out.str());
}

void rescale_arrivals(std::vector<AgenticRequestSpec>& trace, double target_qps) {
  if (trace.size() < 2 || target_qps <= 0) return;
  const SimTime first = trace.front().arrival_ms;
  const SimTime span = trace.back().arrival_ms - first;
  if (span <= 0) return;
  const double current_qps =
      static_cast<double>(trace.size() - 1) / (static_cast<double>(span) / 1000.0);
  const double factor = current_qps / target_qps;
  SimTime prev_orig = first;
  SimTime prev_new = first;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const SimTime gap = trace[i].arrival_ms - prev_orig;
    prev_orig = trace[i].arrival_ms;
    prev_new += static_cast<SimTime>(std::llround(static_cast<double>(gap) * factor));
    trace[i].arrival_ms = prev_new;
  }
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SimError("cannot write " + path.string());
  out << contents;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ordered_json manifest_json(const RunConfig& config, const SimConfig& sim, std::size_t n_requests,
                           std::uint64_t trace_hash) {
  ordered_json m;
  m["format"] = "agentsim-run-v1";
  m["seed"] = config.seed;
  m["preset"] = to_string(config.preset);
  m["scheduler"] = to_string(sim.scheduler);
  m["features"] = {{"kv_tiering", sim.features.kv_tiering},
                   {"prompt_splitting", sim.features.prompt_splitting},
                   {"decode_streaming", sim.features.decode_streaming}};
  m["cost"] = {{"prefill_ms_per_token", sim.cost.prefill_ms_per_token},
               {"decode_ms_per_token", sim.cost.decode_ms_per_token},
               {"batch_decode_overhead_ms", sim.cost.batch_decode_overhead_ms},
               {"chunk_size", sim.cost.chunk_size}};
  m["cache"] = {{"block_size", sim.cache.block_size},
                {"capacity_blocks", sim.cache.capacity_blocks},
                {"policy", sim.cache.policy == EvictionPolicy::kTiered ? "tiered" : "lru"}};
  if (config.qps) {
    m["qps"] = *config.qps;
  } else {
    m["qps"] = nullptr;
  }
  m["tool_failure_probability"] = config.tool_failure_probability;
  m["trace"] = {{"source", config.trace_path ? *config.trace_path
                                             : ("generated:" + config.workload.value_or("?"))},
                {"requests", n_requests},
                {"content_hash", trace_hash}};
  return m;
}

}  // namespace

std::vector<AgenticRequestSpec> resolve_trace(const RunConfig& config) {
  if (config.trace_path && config.workload) {
    throw ConfigError("set either a trace path or a workload to generate, not both");
  }
  if (config.trace_path) {
    std::vector<AgenticRequestSpec> trace = load_trace(*config.trace_path);
    if (config.qps) rescale_arrivals(trace, *config.qps);
    return trace;
  }
  if (config.workload) {
    auto gen = workload_by_name(*config.workload);
    if (!gen) throw ConfigError("unknown workload '" + *config.workload + "'");
    gen->num_requests = config.requests;
    if (config.qps) gen->qps = *config.qps;
    return generate_synthetic_trace(*gen, config.seed);
  }
  throw ConfigError("a trace path or a workload is required");
}

RunOutput run(const RunConfig& config) {
  std::vector<AgenticRequestSpec> trace = resolve_trace(config);
  SimConfig sim = resolve_sim_config(config);
  SimulationResult result = run_trace(trace, sim);

  RunOutput out;
  out.metrics = std::move(result.metrics);
  out.reports = std::move(result.reports);
  out.trace_hash = trace_content_hash(trace);
  out.cache_evictions = result.cache_evictions;
  if (!out.metrics.empty()) {
    std::vector<double> ftr = ftr_values(out.metrics);
    std::vector<double> e2e = e2e_values(out.metrics);
    out.ftr = summarize(ftr);
    out.e2e = summarize(e2e);
    out.hit_rate = cache_hit_rate(out.metrics);
  }

  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    const fs::path dir(config.out_dir);
    write_file(dir / "requests.csv", requests_csv(out.metrics));
    write_file(dir / "summary.txt", summary_text(out.metrics));
    write_file(dir / "cdf_ftr.csv", cdf_csv(ftr_values(out.metrics)));
    write_file(dir / "cdf_e2e.csv", cdf_csv(e2e_values(out.metrics)));
    write_file(dir / "events.log", format_event_log(result.event_log));
    write_file(dir / "timelines.txt", result.timeline_text);
    write_file(dir / "manifest.json",
               manifest_json(config, sim, trace.size(), out.trace_hash).dump(2) + "\n");
  }
  return out;
}

namespace {

struct CsvRun {
  std::vector<std::string> ids;
  std::vector<double> ftr;
  std::vector<double> e2e;
};

CsvRun read_requests_csv(const fs::path& path) {
  CsvRun run;
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() < 3) continue;
    run.ids.push_back(fields[0]);
    run.ftr.push_back(std::stod(fields[1]));
    run.e2e.push_back(std::stod(fields[2]));
  }
  return run;
}

void delta_row(std::ostringstream& out, const char* name, const DistributionSummary& a,
               const DistributionSummary& b) {
  char buf[220];
  std::snprintf(buf, sizeof(buf),
                "%-8s p50 %10.1f -> %10.1f (%+6.2f%%)  p90 %10.1f -> %10.1f (%+6.2f%%)  "
                "p99 %10.1f -> %10.1f (%+6.2f%%)\n",
                name, a.p50, b.p50, percent_improvement(a.p50, b.p50), a.p90, b.p90,
                percent_improvement(a.p90, b.p90), a.p99, b.p99,
                percent_improvement(a.p99, b.p99));
  out << buf;
}

}  // namespace

std::string compare_runs(const std::string& dir_a, const std::string& dir_b) {
  const fs::path a(dir_a), b(dir_b);
  ordered_json ma, mb;
  try {
    ma = ordered_json::parse(read_file(a / "manifest.json"));
    mb = ordered_json::parse(read_file(b / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw TraceMismatch(std::string("unreadable manifest: ") + e.what());
  }
  if (ma["trace"]["content_hash"] != mb["trace"]["content_hash"]) {
    throw TraceMismatch("runs cover different traces");
  }
  if (ma["seed"] != mb["seed"]) throw TraceMismatch("runs used different seeds");

  CsvRun ra = read_requests_csv(a / "requests.csv");
  CsvRun rb = read_requests_csv(b / "requests.csv");
  if (ra.ids != rb.ids) throw TraceMismatch("runs cover different request sets");
  if (ra.ids.empty()) throw TraceMismatch("runs contain no requests");

  std::ostringstream out;
  out << "compare " << dir_a << " (A) vs " << dir_b << " (B); positive % = B improves on A\n";
  delta_row(out, "ftr_ms", summarize(ra.ftr), summarize(rb.ftr));
  delta_row(out, "e2e_ms", summarize(ra.e2e), summarize(rb.e2e));

  std::size_t improved = 0, regressed = 0;
  double delta_sum = 0;
  for (std::size_t i = 0; i < ra.ftr.size(); ++i) {
    const double d = ra.ftr[i] - rb.ftr[i];
    delta_sum += d;
    if (d > 0) ++improved;
    if (d < 0) ++regressed;
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "per-request ftr: %zu improved, %zu regressed, %zu unchanged, mean delta %.1f ms\n",
                improved, regressed, ra.ftr.size() - improved - regressed,
                delta_sum / static_cast<double>(ra.ftr.size()));
  out << buf;
  return out.str();
}

AblationOutcome run_ablation(const RunConfig& config) {
  struct Step {
    const char* name;
    bool ps;
    bool ds;
  };
  const Step steps[] = {{"kv", false, false}, {"kv_ps", true, false}, {"kv_ps_ds", true, true}};

  // Pin the trace so every step replays identical input.
  std::vector<AgenticRequestSpec> trace = resolve_trace(config);
  const fs::path base_dir = config.out_dir.empty() ? fs::path() : fs::path(config.out_dir);
  std::string trace_file;
  if (!base_dir.empty()) {
    fs::create_directories(base_dir);
    trace_file = (base_dir / "ablation_trace.jsonl").string();
  } else {
    trace_file = (fs::temp_directory_path() /
                  ("agentsim_ablation_" + std::to_string(config.seed) + ".jsonl"))
                     .string();
  }
  save_trace(trace, trace_file);

  AblationOutcome outcome;
  std::ostringstream report;
  report << "ablation (request-aware scheduler, tiered cache)\n";
  double medians[3] = {0, 0, 0};
  for (int s = 0; s < 3; ++s) {
    RunConfig step_cfg = config;
    step_cfg.trace_path = trace_file;
    step_cfg.workload.reset();
    step_cfg.qps.reset();  // arrivals already materialized in the trace
    step_cfg.preset = RunPreset::kBaselineSched;
    step_cfg.kv_override = true;
    step_cfg.ps_override = steps[s].ps;
    step_cfg.ds_override = steps[s].ds;
    step_cfg.out_dir =
        base_dir.empty() ? std::string() : (base_dir / steps[s].name).string();
    RunOutput out = run(step_cfg);
    medians[s] = out.ftr.p50;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-9s ftr p50 %10.1f ms  e2e p50 %10.1f ms\n", steps[s].name,
                  out.ftr.p50, out.e2e.p50);
    report << buf;
  }
  for (int s = 1; s < 3; ++s) {
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%s -> %s: ftr p50 %+.2f%%\n", steps[s - 1].name,
                  steps[s].name, percent_improvement(medians[s - 1], medians[s]));
    report << buf;
  }
  outcome.ftr_p50_kv = medians[0];
  outcome.ftr_p50_kv_ps = medians[1];
  outcome.ftr_p50_kv_ps_ds = medians[2];
  outcome.report = report.str();
  if (!base_dir.empty()) write_file(base_dir / "ablation.txt", outcome.report);
  return outcome;
}

}  // namespace agentsim
