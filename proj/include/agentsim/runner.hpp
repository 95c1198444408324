// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "agentsim/orchestrator.hpp"
#include "agentsim/trace_gen.hpp"

namespace agentsim {

enum class RunPreset { kBaseline, kBaselineSched, kSutradhara };

const char* to_string(RunPreset preset);
std::optional<RunPreset> preset_by_name(std::string_view name);

// Preset flag mapping:
//   baseline       = FCFS scheduler, LRU cache, no splitting, no streaming
//   baseline_sched = request-aware scheduler, LRU cache, no PS, no DS
//   sutradhara     = request-aware scheduler, tiered cache, PS, DS
FeatureFlags preset_features(RunPreset preset);
SchedulerPolicy preset_scheduler(RunPreset preset);

struct RunConfig {
  std::optional<std::string> trace_path;
  std::optional<std::string> workload;  // generate a synthetic trace when set
  int requests{60};

  RunPreset preset{RunPreset::kBaseline};
  std::optional<bool> kv_override;
  std::optional<bool> ps_override;
  std::optional<bool> ds_override;

  CostModel cost;
  std::int64_t block_size{16};
  std::int64_t capacity_blocks{8192};
  std::optional<double> qps;  // generator rate, or replay rescaling target
  std::uint64_t seed{1};
  double tool_failure_probability{0.0};

  std::string out_dir;  // empty: no files written
};

struct RunOutput {
  std::vector<RequestMetrics> metrics;
  std::vector<RequestReport> reports;
  DistributionSummary ftr;
  DistributionSummary e2e;
  double hit_rate{0};
  std::uint64_t cache_evictions{0};
  std::uint64_t trace_hash{0};
};

// Resolves the preset + overrides into a SimConfig (scheduler, cache policy,
// feature flags).
SimConfig resolve_sim_config(const RunConfig& config);

// Loads or generates the trace for a run (applying qps rescaling on loaded
// traces).
std::vector<AgenticRequestSpec> resolve_trace(const RunConfig& config);

// Executes one replay; writes requests.csv, summary.txt, cdf_ftr.csv,
// cdf_e2e.csv, manifest.json, events.log and timelines.txt under out_dir.
RunOutput run(const RunConfig& config);

// Compares two completed run directories over the same trace and seed.
// Throws TraceMismatch when they are not comparable.
std::string compare_runs(const std::string& dir_a, const std::string& dir_b);

struct AblationOutcome {
  double ftr_p50_kv{0};
  double ftr_p50_kv_ps{0};
  double ftr_p50_kv_ps_ds{0};
  std::string report;
};

// KV -> KV+PS -> KV+PS+DS sweep on the request-aware scheduler, sharing one
// trace and seed. Writes per-step directories plus ablation.txt when
// config.out_dir is set.
AblationOutcome run_ablation(const RunConfig& config);

}  // namespace agentsim
