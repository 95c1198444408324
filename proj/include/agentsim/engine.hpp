// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agentsim/kv_cache.hpp"
#include "agentsim/sim.hpp"

namespace agentsim {

// Prefill/decode cost model. Durations are rounded up to whole virtual
// milliseconds per component (chunk part and decode part).
struct CostModel {
  double prefill_ms_per_token{0.05};
  double decode_ms_per_token{20.0};
  double batch_decode_overhead_ms{2.0};
  std::int64_t chunk_size{256};
  // Full-hit admissions and zero-token chunks still take one step.
  SimTime min_step_ms{1};

  SimTime chunk_ms(std::int64_t tokens) const;
  SimTime decode_step_ms() const;
};

enum class SchedulerPolicy { kFcfs, kRequestAware };
const char* to_string(SchedulerPolicy policy);

enum class CallState { kQueued, kPrefilling, kAwaitingExtension, kDecoding, kDone, kAborted };
const char* to_string(CallState state);

struct Interval {
  SimTime begin{0};
  SimTime end{0};
  SimTime length() const { return end - begin; }
};

using TokenCallback = std::function<void(std::int64_t token_index, SimTime at)>;
using CallCallback = std::function<void(CallId call, SimTime at)>;

struct CallSubmission {
  std::string agentic_request_id;
  std::int32_t iteration_id{0};
  SimTime agentic_arrival{0};
  std::vector<TokenId> prompt;
  std::vector<TagRange> tags;  // cover [0, prompt.size())
  std::int64_t decode_length{1};
  std::uint64_t decode_stream_key{0};
  std::optional<CallId> call_id;  // engine assigns when absent
  CallCallback on_decode_complete;
};

struct PartialSubmission {
  std::string agentic_request_id;
  std::int32_t iteration_id{0};
  SimTime agentic_arrival{0};
  std::vector<TokenId> prefix;
  std::vector<TagRange> tags;
  std::uint64_t decode_stream_key{0};
  std::optional<CallId> call_id;
  CallCallback on_ready;       // prefix prefilled, awaiting extension
  CallCallback on_pin_failed;  // cache could not hold the pinned prefix
};

struct ContinuationHandle {
  CallId call_id{0};
};

// Read-only view of a call's lifetime, kept after completion for metrics.
struct CallRecord {
  CallId id{0};
  std::string agentic_request_id;
  std::int32_t iteration_id{0};
  SimTime arrival_at_engine{0};
  SimTime agentic_arrival{0};
  CallState state{CallState::kQueued};
  bool partial{false};

  std::int64_t prompt_tokens{0};
  std::int64_t cached_prefix{0};   // block-aligned hit at admission
  std::int64_t charged_total{0};   // prompt tokens that must be prefilled
  std::int64_t charged_done{0};
  std::int64_t decode_length{0};
  std::int64_t emitted{0};

  SimTime submit_time{0};
  SimTime first_chunk_time{-1};
  SimTime prefill_complete_time{-1};
  SimTime decode_start_time{-1};
  SimTime first_token_time{-1};
  SimTime decode_complete_time{-1};

  std::vector<Interval> prefill_intervals;
  std::vector<Interval> decode_intervals;

  SimTime prefill_busy_ms() const;
  SimTime decode_busy_ms() const;
};

// Simulated LLM serving engine: continuous batching with one prefill chunk
// per step and one decode token per running call per step. Driven entirely
// by EngineStep events on the owning loop.
class Engine {
 public:
  Engine(EventLoop& loop, KvCache& cache, CostModel cost, SchedulerPolicy policy);

  CallId submit_call(CallSubmission submission);
  ContinuationHandle submit_partial_prefill(PartialSubmission submission);
  void extend_prefill(const ContinuationHandle& handle, std::vector<TokenId> suffix,
                      std::vector<TagRange> suffix_tags, std::int64_t decode_length,
                      CallCallback on_decode_complete);
  void register_streaming_callback(CallId call, TokenCallback callback);
  void abandon_partial(const ContinuationHandle& handle);

  const CallRecord& call(CallId id) const;
  bool has_call(CallId id) const { return calls_.count(id) > 0; }
  SchedulerPolicy policy() const { return policy_; }
  const CostModel& cost() const { return cost_; }

  // Estimated total LLM time of a call whose decode is mid-flight: actual
  // prefill and decode so far plus projected remaining decode steps.
  SimTime projected_llm_time(CallId id, std::int64_t tokens_emitted) const;
  // Actual prefill + decode busy time; valid once the call is done.
  SimTime actual_llm_time(CallId id) const;

  void set_step_logging(bool enabled) { step_logging_ = enabled; }
  const std::vector<std::string>& step_log() const { return step_log_; }

 private:
  struct CallData {
    CallRecord rec;
    std::vector<TokenId> prompt;
    std::vector<TagRange> tags;
    std::uint64_t decode_stream_key{0};
    TokenCallback streaming;
    CallCallback on_decode_complete;
    CallCallback on_ready;
    CallCallback on_pin_failed;
    bool extension_received{false};
    std::vector<std::int32_t> chain_refs;   // refs held while the call runs
    std::vector<std::int32_t> pinned_ids;   // partial-prefill pins
  };

  struct InflightStep {
    SimTime start{0};
    SimTime end{0};
    CallId chunk_call{0};  // 0 = no chunk scheduled
    std::int64_t chunk_tokens{0};
    SimTime chunk_ms{0};
    std::vector<CallId> decoding;
    SimTime decode_ms{0};
  };

  CallData& data(CallId id);
  const CallData& data(CallId id) const;
  CallId allocate_id(const std::optional<CallId>& requested);
  void wake(SimTime now);
  void on_engine_step();
  void finish_inflight(SimTime now);
  void start_step(SimTime now);
  CallId select_prefill_head() const;
  void complete_prefill(CallData& call, SimTime now);
  void finish_decode(CallData& call, SimTime now);
  void pin_partial(CallData& call, SimTime now);
  void release_partial_pins(CallData& call);
  void on_token_event(CallId id, std::int64_t token_index);

  EventLoop& loop_;
  KvCache& cache_;
  CostModel cost_;
  SchedulerPolicy policy_;
  CallId next_call_id_{1};
  std::map<CallId, CallData> calls_;
  std::optional<InflightStep> inflight_;
  bool step_event_pending_{false};
  // Blocks pinned by partial prefills, with sharing counts so overlapping
  // partials do not unpin each other.
  std::map<std::int32_t, int> partial_pin_counts_;
  std::map<std::int32_t, KvTag> partial_real_tags_;
  bool step_logging_{false};
  std::vector<std::string> step_log_;
};

}  // namespace agentsim
