// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "agentsim/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace agentsim {

std::pair<std::vector<PromptSection>, std::vector<PromptSection>> split_prompt(
    const IterationSpec& iter, std::size_t iteration_index) {
  std::vector<PromptSection> independent;
  std::vector<PromptSection> dependent;
  const auto prev = static_cast<std::int32_t>(iteration_index) - 1;
  for (const PromptSection& s : iter.prompt_sections) {
    if (s.tag == SectionTag::kToolOutput && s.src_iteration == prev) {
      dependent.push_back(s);
    } else {
      independent.push_back(s);
    }
  }
  return {std::move(independent), std::move(dependent)};
}

SimTime tool_latency_ms(const ToolCallSpec& tool, SimTime iteration_llm_ms) {
  if (tool.fixed_latency_ms) return *tool.fixed_latency_ms;
  if (tool.latency_ratio) {
    auto ms = static_cast<SimTime>(
        std::ceil(*tool.latency_ratio * static_cast<double>(iteration_llm_ms)));
    return std::max<SimTime>(ms, 1);
  }
  throw ConfigError("tool '" + tool.tool_name + "' has neither ratio nor fixed latency");
}

Transcript build_transcript(const IterationSpec& iter, std::string_view request_id,
                            std::size_t iteration_index) {
  Transcript t;
  std::vector<std::size_t> close_positions;
  std::string text = "[";
  for (std::size_t j = 0; j < iter.tool_calls.size(); ++j) {
    const ToolCallSpec& tool = iter.tool_calls[j];
    if (j > 0) text += ", ";
    text += "{\"tool\": \"" + tool.tool_name + "\", \"query\": \"" + std::string(request_id) +
            "/" + std::to_string(iteration_index) + "/" + std::to_string(j) +
            "\", \"call\": " + std::to_string(j) + "}";
    close_positions.push_back(text.size() - 1);
  }
  text += "]";
  t.text = std::move(text);

  const auto n_tokens = static_cast<std::size_t>(iter.decode_length);
  std::vector<std::size_t> counts(n_tokens, 0);
  std::int64_t prev_tok = -1;
  std::int64_t prev_char = -1;
  for (std::size_t j = 0; j < close_positions.size(); ++j) {
    const std::int64_t emit = iter.tool_calls[j].emit_token_index;
    const std::int64_t p = static_cast<std::int64_t>(close_positions[j]);
    const std::int64_t ntoks = emit - prev_tok;
    const std::int64_t nchars = p - prev_char;
    for (std::int64_t k = 0; k < ntoks; ++k) {
      const std::int64_t lo = k * nchars / ntoks;
      const std::int64_t hi = (k + 1) * nchars / ntoks;
      counts[static_cast<std::size_t>(prev_tok + 1 + k)] = static_cast<std::size_t>(hi - lo);
    }
    prev_tok = emit;
    prev_char = p;
  }
  // Trailing characters (the array close and any separators) go to the
  // remaining tokens, or to the last emit token when none remain.
  const std::int64_t rem_chars = static_cast<std::int64_t>(t.text.size()) - 1 - prev_char;
  const std::int64_t rem_toks = static_cast<std::int64_t>(n_tokens) - 1 - prev_tok;
  if (rem_toks <= 0) {
    if (prev_tok >= 0) counts[static_cast<std::size_t>(prev_tok)] += static_cast<std::size_t>(rem_chars);
  } else {
    for (std::int64_t k = 0; k < rem_toks; ++k) {
      const std::int64_t lo = k * rem_chars / rem_toks;
      const std::int64_t hi = (k + 1) * rem_chars / rem_toks;
      counts[static_cast<std::size_t>(prev_tok + 1 + k)] = static_cast<std::size_t>(hi - lo);
    }
  }
  t.token_spans.reserve(n_tokens);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n_tokens; ++i) {
    t.token_spans.emplace_back(pos, pos + counts[i]);
    pos += counts[i];
  }
  return t;
}

namespace {

KvTag kv_tag_for(SectionTag tag) {
  switch (tag) {
    case SectionTag::kSystemPrompt: return KvTag::kSystemPrompt;
    case SectionTag::kUserQuery: return KvTag::kUserQuery;
    case SectionTag::kToolOutput: return KvTag::kToolOutput;
    case SectionTag::kHistory: return KvTag::kHistory;
  }
  return KvTag::kUserQuery;
}

struct BuiltPrompt {
  std::vector<TokenId> tokens;
  std::vector<TagRange> tags;
};

BuiltPrompt build_prompt(std::span<const PromptSection> sections) {
  BuiltPrompt built;
  for (const PromptSection& s : sections) {
    std::vector<TokenId> toks = materialize_tokens(s);
    const auto begin = static_cast<std::int64_t>(built.tokens.size());
    built.tokens.insert(built.tokens.end(), toks.begin(), toks.end());
    const auto end = static_cast<std::int64_t>(built.tokens.size());
    if (end > begin) built.tags.push_back(TagRange{begin, end, kv_tag_for(s.tag)});
  }
  // Merge zero-length sections away; coalesce adjacent equal tags.
  return built;
}

class Orchestrator {
 public:
  Orchestrator(const std::vector<AgenticRequestSpec>& trace, const SimConfig& config)
      : trace_(trace),
        config_(config),
        cache_(config.cache),
        engine_(loop_, cache_, config.cost, config.scheduler),
        failure_rng_(config.failure_seed) {}

  SimulationResult run();

 private:
  struct ToolRt {
    SimTime dispatched_at{-1};
    SimTime completes_at{-1};
    SimTime latency{0};
    std::int64_t close_token{-1};
    bool will_fail{false};
    bool retry_used{false};
    bool done{false};
  };

  struct IterRt {
    CallId call{0};
    std::vector<ToolRt> tools;
    std::size_t tools_pending{0};
    std::size_t next_dispatch{0};
    bool decode_done{false};
    bool advanced{false};
    bool parser_fallback{false};
    Transcript transcript;
    std::unique_ptr<StreamingToolParser> parser;
    IterationReport report;
  };

  struct ReqRt {
    const AgenticRequestSpec* spec{nullptr};
    std::size_t index{0};
    std::optional<ContinuationHandle> continuation;
    std::size_t continuation_for{0};
    bool partial_pin_failed{false};
    std::vector<IterRt> iters;
    std::vector<Interval> tool_intervals;
    bool done{false};
  };

  const IterationSpec& iteration_spec(std::size_t r, std::size_t i) const {
    return trace_[r].iterations[i];
  }

  void note(std::size_t r, const std::string& what) {
    std::ostringstream line;
    line << "t=" << loop_.now() << " request=" << trace_[r].request_id << " " << what;
    timeline_.push_back(line.str());
  }

  std::uint64_t decode_stream_key(std::size_t r, std::size_t i) const {
    return hash_combine(hash_string(trace_[r].request_id), static_cast<std::uint64_t>(i));
  }

  void on_arrival(std::size_t r);
  void submit_iteration(std::size_t r, std::size_t i);
  void setup_decode_side(std::size_t r, std::size_t i);
  void on_decode_complete(std::size_t r, std::size_t i, SimTime at);
  void on_token(std::size_t r, std::size_t i, std::int64_t token_index, SimTime at);
  void batch_dispatch_remaining(std::size_t r, std::size_t i, SimTime now);
  void dispatch_tool(std::size_t r, std::size_t i, std::size_t j, SimTime now,
                     std::int64_t close_token);
  void on_tool_complete(std::size_t r, std::size_t i, std::size_t j);
  void submit_partial_for_next(std::size_t r, std::size_t i, SimTime now);
  void abandon_continuation(std::size_t r, std::size_t next_iter);
  void maybe_advance(std::size_t r, std::size_t i, SimTime now);
  SimTime iteration_llm_estimate(std::size_t r, std::size_t i,
                                 std::optional<std::int64_t> at_token) const;

  const std::vector<AgenticRequestSpec>& trace_;
  SimConfig config_;
  EventLoop loop_;
  KvCache cache_;
  Engine engine_;
  Rng failure_rng_;
  std::vector<ReqRt> requests_;
  std::vector<std::string> timeline_;
};

void Orchestrator::on_arrival(std::size_t r) {
  note(r, "arrival");
  submit_iteration(r, 0);
}

SimTime Orchestrator::iteration_llm_estimate(std::size_t r, std::size_t i,
                                             std::optional<std::int64_t> at_token) const {
  const IterRt& it = requests_[r].iters[i];
  if (config_.estimator == LlmTimeEstimator::kFullProjection) {
    const CallRecord& rec = engine_.call(it.call);
    return rec.prefill_busy_ms() + rec.decode_length * config_.cost.decode_step_ms();
  }
  if (at_token) return engine_.projected_llm_time(it.call, *at_token);
  return engine_.actual_llm_time(it.call);
}

void Orchestrator::submit_iteration(std::size_t r, std::size_t i) {
  ReqRt& req = requests_[r];
  IterRt& it = req.iters[i];
  const IterationSpec& spec = iteration_spec(r, i);
  const SimTime now = loop_.now();

  const bool via_extension =
      req.continuation.has_value() && req.continuation_for == i;
  if (via_extension) {
    ContinuationHandle handle = *req.continuation;
    req.continuation.reset();
    auto [independent, dependent] = split_prompt(spec, i);
    BuiltPrompt suffix = build_prompt(dependent);
    it.call = handle.call_id;
    it.report.call_id = it.call;
    it.report.extend_time = now;
    it.report.used_partial = true;
    engine_.extend_prefill(handle, std::move(suffix.tokens), std::move(suffix.tags),
                           spec.decode_length,
                           [this, r, i](CallId, SimTime at) { on_decode_complete(r, i, at); });
    note(r, "extend_prefill iteration=" + std::to_string(i));
  } else {
    BuiltPrompt prompt = build_prompt(spec.prompt_sections);
    CallSubmission sub;
    sub.agentic_request_id = trace_[r].request_id;
    sub.iteration_id = static_cast<std::int32_t>(i);
    sub.agentic_arrival = trace_[r].arrival_ms;
    sub.prompt = std::move(prompt.tokens);
    sub.tags = std::move(prompt.tags);
    sub.decode_length = spec.decode_length;
    sub.decode_stream_key = decode_stream_key(r, i);
    sub.on_decode_complete = [this, r, i](CallId, SimTime at) { on_decode_complete(r, i, at); };
    it.call = engine_.submit_call(std::move(sub));
    it.report.call_id = it.call;
    note(r, "submit iteration=" + std::to_string(i));
  }
  it.report.submit_time = now;
  setup_decode_side(r, i);
}

void Orchestrator::setup_decode_side(std::size_t r, std::size_t i) {
  IterRt& it = requests_[r].iters[i];
  const IterationSpec& spec = iteration_spec(r, i);
  if (spec.is_final) return;

  it.transcript = build_transcript(spec, trace_[r].request_id, i);
  if (config_.transcript_mutator) config_.transcript_mutator(it.transcript.text);
  it.tools.assign(spec.tool_calls.size(), ToolRt{});
  it.tools_pending = spec.tool_calls.size();

  if (config_.features.decode_streaming) {
    it.parser = std::make_unique<StreamingToolParser>();
    engine_.register_streaming_callback(
        it.call, [this, r, i](std::int64_t token_index, SimTime at) {
          on_token(r, i, token_index, at);
        });
  }
}

void Orchestrator::on_token(std::size_t r, std::size_t i, std::int64_t token_index, SimTime at) {
  IterRt& it = requests_[r].iters[i];
  if (!it.parser || it.parser_fallback) return;
  const auto idx = static_cast<std::size_t>(token_index);
  if (idx >= it.transcript.token_spans.size()) return;
  const auto [begin, end] = it.transcript.token_spans[idx];
  const std::string_view chunk = std::string_view(it.transcript.text).substr(begin, end - begin);
  std::vector<ToolInvocation> closed = it.parser->feed(chunk, token_index);
  for (const ToolInvocation& inv : closed) {
    if (it.next_dispatch >= it.tools.size() ||
        inv.tool_name != iteration_spec(r, i).tool_calls[it.next_dispatch].tool_name) {
      it.parser_fallback = true;
      break;
    }
    dispatch_tool(r, i, it.next_dispatch, at, inv.close_token_index);
    ++it.next_dispatch;
  }
  if (it.parser->malformed()) it.parser_fallback = true;
}

void Orchestrator::batch_dispatch_remaining(std::size_t r, std::size_t i, SimTime now) {
  IterRt& it = requests_[r].iters[i];
  const IterationSpec& spec = iteration_spec(r, i);
  BatchParseResult parsed = batch_parse_tool_calls(it.transcript.text);
  std::size_t matched = 0;
  if (parsed.verdict == StreamVerdict::kComplete &&
      parsed.invocations.size() == spec.tool_calls.size()) {
    matched = parsed.invocations.size();
  }
  // A malformed transcript falls back to the scripted tool list; the
  // request's outputs are trace-defined either way.
  (void)matched;
  for (std::size_t j = it.next_dispatch; j < spec.tool_calls.size(); ++j) {
    dispatch_tool(r, i, j, now, spec.tool_calls[j].emit_token_index);
  }
  it.next_dispatch = spec.tool_calls.size();
}

void Orchestrator::dispatch_tool(std::size_t r, std::size_t i, std::size_t j, SimTime now,
                                 std::int64_t close_token) {
  ReqRt& req = requests_[r];
  IterRt& it = req.iters[i];
  const ToolCallSpec& tool = iteration_spec(r, i).tool_calls[j];
  ToolRt& rt = it.tools[j];

  std::optional<std::int64_t> at_token;
  if (!it.decode_done) at_token = close_token;
  const SimTime llm_ms = tool.latency_ratio ? iteration_llm_estimate(r, i, at_token) : 0;
  rt.latency = tool_latency_ms(tool, llm_ms);
  rt.dispatched_at = now;
  rt.completes_at = now + rt.latency;
  rt.close_token = close_token;
  rt.will_fail = config_.tool_failure_probability > 0 &&
                 failure_rng_.uniform01() < config_.tool_failure_probability;

  DispatchRecord rec;
  rec.iteration = static_cast<std::int32_t>(i);
  rec.tool_name = tool.tool_name;
  rec.out_key = tool.output_section.content_key;
  rec.out_len = tool.output_section.length;
  rec.dispatch_time = now;
  rec.close_token_index = close_token;
  it.report.dispatches.push_back(rec);

  note(r, "dispatch_tool iteration=" + std::to_string(i) + " tool=" + std::to_string(j) + " name=" +
              tool.tool_name);
  loop_.schedule(rt.completes_at, EventKind::kToolComplete,
                 "request=" + trace_[r].request_id + " iter=" + std::to_string(i) + " tool=" +
                     std::to_string(j),
                 [this, r, i, j] { on_tool_complete(r, i, j); });
}

void Orchestrator::on_tool_complete(std::size_t r, std::size_t i, std::size_t j) {
  ReqRt& req = requests_[r];
  IterRt& it = req.iters[i];
  ToolRt& rt = it.tools[j];
  const SimTime now = loop_.now();

  if (rt.will_fail && !rt.retry_used) {
    // Failure discards any eager partial prefill; the tool retries once and
    // the next iteration is rebuilt sequentially from the full prompt.
    rt.retry_used = true;
    abandon_continuation(r, i + 1);
    rt.completes_at = now + rt.latency;
    note(r, "tool_failed_retry iteration=" + std::to_string(i) + " tool=" + std::to_string(j));
    loop_.schedule(rt.completes_at, EventKind::kToolComplete,
                   "request=" + trace_[r].request_id + " iter=" + std::to_string(i) + " tool=" +
                       std::to_string(j) + " retry",
                   [this, r, i, j] { on_tool_complete(r, i, j); });
    return;
  }

  rt.done = true;
  it.tools_pending -= 1;
  req.tool_intervals.push_back(Interval{rt.dispatched_at, now});
  it.report.dispatches[j].complete_time = now;
  note(r, "tool_complete iteration=" + std::to_string(i) + " tool=" + std::to_string(j));
  maybe_advance(r, i, now);
}

void Orchestrator::submit_partial_for_next(std::size_t r, std::size_t i, SimTime now) {
  ReqRt& req = requests_[r];
  const std::size_t next = i + 1;
  const IterationSpec& next_spec = iteration_spec(r, next);
  auto [independent, dependent] = split_prompt(next_spec, next);
  if (independent.empty()) return;
  BuiltPrompt prefix = build_prompt(independent);
  if (prefix.tokens.empty()) return;

  PartialSubmission sub;
  sub.agentic_request_id = trace_[r].request_id;
  sub.iteration_id = static_cast<std::int32_t>(next);
  sub.agentic_arrival = trace_[r].arrival_ms;
  sub.prefix = std::move(prefix.tokens);
  sub.tags = std::move(prefix.tags);
  sub.decode_stream_key = decode_stream_key(r, next);
  sub.on_ready = [this, r, next](CallId, SimTime at) {
    (void)at;
    note(r, "partial_ready iteration=" + std::to_string(next));
  };
  sub.on_pin_failed = [this, r, next](CallId, SimTime) {
    // Could not pin the prefix; fall back to a sequential full prompt.
    requests_[r].continuation.reset();
    requests_[r].partial_pin_failed = true;
    note(r, "partial_pin_failed iteration=" + std::to_string(next));
  };
  req.continuation = engine_.submit_partial_prefill(std::move(sub));
  req.continuation_for = next;
  IterRt& next_rt = req.iters[next];
  next_rt.call = req.continuation->call_id;
  next_rt.report.call_id = next_rt.call;
  next_rt.report.partial_submit_time = now;
  note(r, "submit_partial iteration=" + std::to_string(next));
}

void Orchestrator::abandon_continuation(std::size_t r, std::size_t next_iter) {
  ReqRt& req = requests_[r];
  if (!req.continuation || req.continuation_for != next_iter) return;
  try {
    engine_.abandon_partial(*req.continuation);
  } catch (const StaleHandle&) {
  }
  req.continuation.reset();
  note(r, "abandon_partial iteration=" + std::to_string(next_iter));
}

void Orchestrator::on_decode_complete(std::size_t r, std::size_t i, SimTime at) {
  ReqRt& req = requests_[r];
  IterRt& it = req.iters[i];
  const IterationSpec& spec = iteration_spec(r, i);
  it.decode_done = true;
  note(r, "decode_complete iteration=" + std::to_string(i));

  if (spec.is_final) {
    req.done = true;
    note(r, "request_done");
    return;
  }

  if (!config_.features.decode_streaming || it.parser_fallback ||
      it.next_dispatch < spec.tool_calls.size()) {
    batch_dispatch_remaining(r, i, at);
  }

  if (config_.features.prompt_splitting && it.tools_pending > 0) {
    submit_partial_for_next(r, i, at);
  }
  maybe_advance(r, i, at);
}

void Orchestrator::maybe_advance(std::size_t r, std::size_t i, SimTime now) {
  ReqRt& req = requests_[r];
  IterRt& it = req.iters[i];
  if (it.advanced || !it.decode_done || it.tools_pending > 0) return;
  if (iteration_spec(r, i).is_final) return;
  it.advanced = true;
  (void)now;
  submit_iteration(r, i + 1);
}

SimulationResult Orchestrator::run() {
  requests_.resize(trace_.size());
  for (std::size_t r = 0; r < trace_.size(); ++r) {
    validate_request(trace_[r]);
    requests_[r].spec = &trace_[r];
    requests_[r].index = r;
    requests_[r].iters.resize(trace_[r].iterations.size());
    loop_.schedule(trace_[r].arrival_ms, EventKind::kRequestArrival,
                   "request=" + trace_[r].request_id, [this, r] { on_arrival(r); });
  }
  loop_.run();

  SimulationResult result;
  for (std::size_t r = 0; r < trace_.size(); ++r) {
    const ReqRt& req = requests_[r];
    if (!req.done) {
      throw SimError("request " + trace_[r].request_id + " did not complete");
    }

    RequestReport report;
    report.request_id = trace_[r].request_id;
    report.arrival = trace_[r].arrival_ms;

    RequestTimeline timeline;
    timeline.request_id = trace_[r].request_id;
    timeline.arrival = trace_[r].arrival_ms;
    timeline.tools = req.tool_intervals;

    for (std::size_t i = 0; i < req.iters.size(); ++i) {
      const IterRt& it = req.iters[i];
      const CallRecord& rec = engine_.call(it.call);
      IterationReport ir = it.report;
      ir.prompt_tokens = rec.prompt_tokens;
      ir.cached_prefix = rec.cached_prefix;
      ir.charged_prefill = rec.charged_done;
      ir.decode_start = rec.decode_start_time;
      ir.decode_end = rec.decode_complete_time;
      report.iterations.push_back(std::move(ir));

      timeline.cache.push_back(IterationCacheStat{rec.cached_prefix, rec.prompt_tokens});
      for (const Interval& iv : rec.prefill_intervals) timeline.prefill.push_back(iv);
      for (const Interval& iv : rec.decode_intervals) timeline.decode.push_back(iv);
      if (trace_[r].iterations[i].is_final) {
        report.ftr = rec.first_token_time;
        report.e2e = rec.decode_complete_time;
        timeline.ftr_time = rec.first_token_time;
        timeline.e2e_time = rec.decode_complete_time;
      }
    }
    result.metrics.push_back(compute_request_metrics(timeline));
    result.reports.push_back(std::move(report));
  }

  result.event_log = loop_.event_log();
  std::ostringstream timeline_text;
  for (const std::string& line : timeline_) timeline_text << line << '\n';
  result.timeline_text = timeline_text.str();
  result.cache_evictions = cache_.total_evicted();
  result.events_processed = loop_.processed_count();
  cache_.audit();
  return result;
}

}  // namespace

SimulationResult run_trace(const std::vector<AgenticRequestSpec>& trace, const SimConfig& config) {
  Orchestrator orchestrator(trace, config);
  return orchestrator.run();
}

}  // namespace agentsim
