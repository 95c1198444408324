// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "agentsim/runner.hpp"
#include "agentsim/scenarios.hpp"

namespace {

using namespace agentsim;

// Exit codes: 0 success, 1 config error, 2 trace error, 3 simulation error.
int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 1;
  if (dynamic_cast<const TraceError*>(&e)) return 2;
  return 3;
}

struct CommonRunFlags {
  std::string trace;
  std::string workload;
  int requests = 60;
  std::string preset = "baseline";
  double qps = 0;
  std::uint64_t seed = 1;
  std::string out;
  double prefill_ms = 0.05;
  double decode_ms = 20.0;
  double overhead_ms = 2.0;
  std::int64_t chunk = 256;
  std::int64_t block_size = 16;
  std::int64_t capacity = 8192;
  double fail_prob = 0.0;
  bool enable_kv = false, disable_kv = false;
  bool enable_ps = false, disable_ps = false;
  bool enable_ds = false, disable_ds = false;
};

void add_run_flags(CLI::App* cmd, CommonRunFlags& f) {
  cmd->add_option("--trace", f.trace, "replay a trace file (jsonl)");
  cmd->add_option("--generate", f.workload,
                  "generate a synthetic trace: default | tool_heavy | iteration_heavy");
  cmd->add_option("--requests", f.requests, "synthetic trace size")->capture_default_str();
  cmd->add_option("--preset", f.preset, "baseline | baseline_sched | sutradhara")
      ->capture_default_str();
  cmd->add_option("--qps", f.qps, "arrival rate (generator) or rescale target (replay)");
  cmd->add_option("--seed", f.seed, "random seed")->capture_default_str();
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--prefill-ms-per-token", f.prefill_ms, "")->capture_default_str();
  cmd->add_option("--decode-ms-per-token", f.decode_ms, "")->capture_default_str();
  cmd->add_option("--batch-overhead-ms", f.overhead_ms, "")->capture_default_str();
  cmd->add_option("--chunk-size", f.chunk, "prefill chunk size")->capture_default_str();
  cmd->add_option("--block-size", f.block_size, "KV block size (tokens)")->capture_default_str();
  cmd->add_option("--capacity-blocks", f.capacity, "KV cache capacity")->capture_default_str();
  cmd->add_option("--tool-failure-probability", f.fail_prob, "")->capture_default_str();
  cmd->add_flag("--enable-kv", f.enable_kv, "force tiered eviction on");
  cmd->add_flag("--disable-kv", f.disable_kv, "force LRU eviction");
  cmd->add_flag("--enable-ps", f.enable_ps, "force prompt splitting on");
  cmd->add_flag("--disable-ps", f.disable_ps, "force prompt splitting off");
  cmd->add_flag("--enable-ds", f.enable_ds, "force streaming tool dispatch on");
  cmd->add_flag("--disable-ds", f.disable_ds, "force streaming tool dispatch off");
}

RunConfig to_run_config(const CommonRunFlags& f) {
  RunConfig cfg;
  if (!f.trace.empty()) cfg.trace_path = f.trace;
  if (!f.workload.empty()) cfg.workload = f.workload;
  cfg.requests = f.requests;
  auto preset = preset_by_name(f.preset);
  if (!preset) throw ConfigError("unknown preset '" + f.preset + "'");
  cfg.preset = *preset;
  if (f.qps > 0) cfg.qps = f.qps;
  cfg.seed = f.seed;
  cfg.out_dir = f.out;
  cfg.cost.prefill_ms_per_token = f.prefill_ms;
  cfg.cost.decode_ms_per_token = f.decode_ms;
  cfg.cost.batch_decode_overhead_ms = f.overhead_ms;
  cfg.cost.chunk_size = f.chunk;
  cfg.block_size = f.block_size;
  cfg.capacity_blocks = f.capacity;
  cfg.tool_failure_probability = f.fail_prob;
  if (f.enable_kv && f.disable_kv) throw ConfigError("--enable-kv conflicts with --disable-kv");
  if (f.enable_ps && f.disable_ps) throw ConfigError("--enable-ps conflicts with --disable-ps");
  if (f.enable_ds && f.disable_ds) throw ConfigError("--enable-ds conflicts with --disable-ds");
  if (f.enable_kv) cfg.kv_override = true;
  if (f.disable_kv) cfg.kv_override = false;
  if (f.enable_ps) cfg.ps_override = true;
  if (f.disable_ps) cfg.ps_override = false;
  if (f.enable_ds) cfg.ds_override = true;
  if (f.disable_ds) cfg.ds_override = false;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agentsim: trace-driven simulator of an agentic inference serving stack"};
  app.require_subcommand(1);

  // --- generate ---
  auto* gen_cmd = app.add_subcommand("generate", "generate a synthetic trace file");
  std::string gen_workload = "default";
  int gen_requests = 60;
  double gen_qps = 0;
  std::uint64_t gen_seed = 1;
  std::string gen_out = "trace.jsonl";
  bool gen_stats = false;
  gen_cmd->add_option("--workload", gen_workload, "default | tool_heavy | iteration_heavy")
      ->capture_default_str();
  gen_cmd->add_option("--requests", gen_requests, "")->capture_default_str();
  gen_cmd->add_option("--qps", gen_qps, "Poisson arrival rate (requests/s)");
  gen_cmd->add_option("--seed", gen_seed, "")->capture_default_str();
  gen_cmd->add_option("--out", gen_out, "output trace path")->capture_default_str();
  gen_cmd->add_flag("--stats", gen_stats, "print trace statistics");

  // --- run ---
  auto* run_cmd = app.add_subcommand("run", "replay a trace through the simulated stack");
  CommonRunFlags run_flags;
  add_run_flags(run_cmd, run_flags);
  bool run_ablation_flag = false;
  run_cmd->add_flag("--ablation", run_ablation_flag,
                    "run the KV / KV+PS / KV+PS+DS sweep instead of a single replay");

  // --- compare ---
  auto* cmp_cmd = app.add_subcommand("compare", "compare two finished run directories");
  std::string cmp_a, cmp_b;
  cmp_cmd->add_option("dir_a", cmp_a, "baseline run directory")->required();
  cmp_cmd->add_option("dir_b", cmp_b, "treated run directory")->required();

  // --- stats ---
  auto* stats_cmd = app.add_subcommand("stats", "print statistics of a trace file");
  std::string stats_trace;
  stats_cmd->add_option("--trace", stats_trace, "trace file")->required();

  // --- scenarios ---
  auto* scen_cmd = app.add_subcommand("scenarios", "run the embedded regression scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) {
      auto cfg = agentsim::workload_by_name(gen_workload);
      if (!cfg) throw agentsim::ConfigError("unknown workload '" + gen_workload + "'");
      cfg->num_requests = gen_requests;
      if (gen_qps > 0) cfg->qps = gen_qps;
      auto trace = agentsim::generate_synthetic_trace(*cfg, gen_seed);
      agentsim::save_trace(trace, gen_out);
      std::cout << "wrote " << trace.size() << " requests to " << gen_out << "\n";
      if (gen_stats && !trace.empty()) {
        std::cout << agentsim::format_stats_report(agentsim::compute_stats(trace));
      }
      return 0;
    }
    if (run_cmd->parsed()) {
      agentsim::RunConfig cfg = to_run_config(run_flags);
      if (run_ablation_flag) {
        agentsim::AblationOutcome outcome = agentsim::run_ablation(cfg);
        std::cout << outcome.report;
        return 0;
      }
      agentsim::RunOutput out = agentsim::run(cfg);
      std::cout << agentsim::summary_text(out.metrics);
      if (!cfg.out_dir.empty()) std::cout << "outputs written to " << cfg.out_dir << "\n";
      return 0;
    }
    if (cmp_cmd->parsed()) {
      std::cout << agentsim::compare_runs(cmp_a, cmp_b);
      return 0;
    }
    if (stats_cmd->parsed()) {
      auto trace = agentsim::load_trace(stats_trace);
      if (trace.empty()) {
        std::cout << "(empty trace)\n";
        return 0;
      }
      std::cout << agentsim::format_stats_report(agentsim::compute_stats(trace));
      return 0;
    }
    if (scen_cmd->parsed()) {
      bool ok = false;
      std::cout << agentsim::run_all_scenarios_report(&ok);
      return ok ? 0 : 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
