// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "agentsim/engine.hpp"
#include "agentsim/metrics.hpp"
#include "agentsim/streaming_parser.hpp"
#include "agentsim/trace.hpp"

namespace agentsim {

struct FeatureFlags {
  bool kv_tiering{false};
  bool prompt_splitting{false};
  bool decode_streaming{false};
};

// How the orchestrator estimates an iteration's LLM time when scaling
// ratio-based tool latencies mid-decode.
enum class LlmTimeEstimator {
  // Actual prefill + decode so far, plus projected remaining decode steps.
  kActualPlusProjection,
  // Actual prefill plus a full-decode projection from the cost model.
  kFullProjection,
};

struct SimConfig {
  CostModel cost;
  CacheConfig cache;
  SchedulerPolicy scheduler{SchedulerPolicy::kFcfs};
  FeatureFlags features;
  double tool_failure_probability{0.0};
  std::uint64_t failure_seed{0x5eedULL};
  LlmTimeEstimator estimator{LlmTimeEstimator::kActualPlusProjection};
  // Test seam: corrupts synthesized transcripts to exercise the
  // batch-parse fallback. Never set outside tests.
  std::function<void(std::string&)> transcript_mutator;
};

struct DispatchRecord {
  std::int32_t iteration{0};
  std::string tool_name;
  std::uint64_t out_key{0};
  std::int64_t out_len{0};
  SimTime dispatch_time{-1};
  SimTime complete_time{-1};
  std::int64_t close_token_index{-1};
};

struct IterationReport {
  CallId call_id{0};
  SimTime submit_time{-1};
  SimTime partial_submit_time{-1};
  SimTime extend_time{-1};
  SimTime decode_start{-1};
  SimTime decode_end{-1};
  std::int64_t prompt_tokens{0};
  std::int64_t cached_prefix{0};
  std::int64_t charged_prefill{0};
  bool used_partial{false};
  std::vector<DispatchRecord> dispatches;
};

struct RequestReport {
  std::string request_id;
  SimTime arrival{0};
  SimTime ftr{-1};
  SimTime e2e{-1};
  std::vector<IterationReport> iterations;
};

struct SimulationResult {
  std::vector<RequestMetrics> metrics;
  std::vector<RequestReport> reports;
  std::vector<EventLogEntry> event_log;
  std::string timeline_text;
  std::uint64_t cache_evictions{0};
  std::size_t events_processed{0};
};

// Splits an iteration's prompt into the tool-independent prefix and the
// sections depending on the immediately preceding iteration's tools.
// Concatenating the two lists in order reconstructs the full prompt.
std::pair<std::vector<PromptSection>, std::vector<PromptSection>> split_prompt(
    const IterationSpec& iter, std::size_t iteration_index);

// Virtual tool latency: fixed, or ratio x iteration LLM time, rounded up.
// Throws ConfigError if neither latency field resolves.
SimTime tool_latency_ms(const ToolCallSpec& tool, SimTime iteration_llm_ms);

// Synthesized decode transcript for an intermediate iteration: a JSON array
// of the iteration's tool calls, plus the per-token character spans that
// place each call's closing brace at its emit token.
struct Transcript {
  std::string text;
  std::vector<std::pair<std::size_t, std::size_t>> token_spans;  // [begin, end) per token
};
Transcript build_transcript(const IterationSpec& iter, std::string_view request_id,
                            std::size_t iteration_index);

// Replays the whole trace through the simulated engine and returns one
// metrics record per request (trace order).
SimulationResult run_trace(const std::vector<AgenticRequestSpec>& trace, const SimConfig& config);

}  // namespace agentsim
