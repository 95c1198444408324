// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "agentsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "agentsim/trace.hpp"

namespace agentsim {

const char* to_string(SchedulerPolicy policy) {
  switch (policy) {
    case SchedulerPolicy::kFcfs: return "fcfs";
    case SchedulerPolicy::kRequestAware: return "request_aware";
  }
  return "unknown";
}

const char* to_string(CallState state) {
  switch (state) {
    case CallState::kQueued: return "queued";
    case CallState::kPrefilling: return "prefilling";
    case CallState::kAwaitingExtension: return "awaiting_extension";
    case CallState::kDecoding: return "decoding";
    case CallState::kDone: return "done";
    case CallState::kAborted: return "aborted";
  }
  return "unknown";
}

SimTime CostModel::chunk_ms(std::int64_t tokens) const {
  if (tokens <= 0) return min_step_ms;
  auto ms = static_cast<SimTime>(std::ceil(static_cast<double>(tokens) * prefill_ms_per_token));
  return std::max<SimTime>(ms, 1);
}

SimTime CostModel::decode_step_ms() const {
  return static_cast<SimTime>(std::ceil(decode_ms_per_token + batch_decode_overhead_ms));
}

SimTime CallRecord::prefill_busy_ms() const {
  SimTime total = 0;
  for (const Interval& i : prefill_intervals) total += i.length();
  return total;
}

SimTime CallRecord::decode_busy_ms() const {
  SimTime total = 0;
  for (const Interval& i : decode_intervals) total += i.length();
  return total;
}

namespace {

void append_interval(std::vector<Interval>& intervals, SimTime begin, SimTime end) {
  if (end <= begin) return;
  if (!intervals.empty() && intervals.back().end == begin) {
    intervals.back().end = end;
  } else {
    intervals.push_back(Interval{begin, end});
  }
}

void check_tags_cover(const std::vector<TagRange>& tags, std::size_t len) {
  std::int64_t covered = 0;
  for (const TagRange& r : tags) {
    if (r.begin != covered || r.end < r.begin) {
      throw InvalidState("tag ranges must cover the prompt without gaps");
    }
    covered = r.end;
  }
  if (covered != static_cast<std::int64_t>(len)) {
    throw InvalidState("tag ranges must cover the full prompt");
  }
}

}  // namespace

Engine::Engine(EventLoop& loop, KvCache& cache, CostModel cost, SchedulerPolicy policy)
    : loop_(loop), cache_(cache), cost_(cost), policy_(policy) {
  if (cost_.prefill_ms_per_token <= 0 || cost_.decode_ms_per_token <= 0) {
    throw ConfigError("cost model rates must be positive");
  }
  if (cost_.batch_decode_overhead_ms < 0) {
    throw ConfigError("batch decode overhead must be non-negative");
  }
  if (cost_.chunk_size < 1) throw ConfigError("chunk_size must be >= 1");
}

Engine::CallData& Engine::data(CallId id) {
  auto it = calls_.find(id);
  if (it == calls_.end()) throw UnknownCall("call " + std::to_string(id) + " unknown");
  return it->second;
}

const Engine::CallData& Engine::data(CallId id) const {
  auto it = calls_.find(id);
  if (it == calls_.end()) throw UnknownCall("call " + std::to_string(id) + " unknown");
  return it->second;
}

const CallRecord& Engine::call(CallId id) const { return data(id).rec; }

CallId Engine::allocate_id(const std::optional<CallId>& requested) {
  if (requested) {
    if (calls_.count(*requested)) {
      throw DuplicateCallId("call id " + std::to_string(*requested) + " already submitted");
    }
    next_call_id_ = std::max(next_call_id_, *requested + 1);
    return *requested;
  }
  return next_call_id_++;
}

void Engine::wake(SimTime now) {
  if (inflight_ || step_event_pending_) return;
  step_event_pending_ = true;
  loop_.schedule(now, EventKind::kEngineStep, "", [this] { on_engine_step(); });
}

CallId Engine::submit_call(CallSubmission submission) {
  if (submission.prompt.empty()) throw InvalidState("submit_call: prompt must be non-empty");
  if (submission.decode_length < 1) throw InvalidState("submit_call: decode_length must be >= 1");
  check_tags_cover(submission.tags, submission.prompt.size());

  const SimTime now = loop_.now();
  CallId id = allocate_id(submission.call_id);
  CallData d;
  d.rec.id = id;
  d.rec.agentic_request_id = submission.agentic_request_id;
  d.rec.iteration_id = submission.iteration_id;
  d.rec.arrival_at_engine = now;
  d.rec.agentic_arrival = submission.agentic_arrival;
  d.rec.submit_time = now;
  d.rec.prompt_tokens = static_cast<std::int64_t>(submission.prompt.size());
  d.rec.cached_prefix = cache_.lookup_prefix(submission.prompt, now);
  d.rec.charged_total = d.rec.prompt_tokens - d.rec.cached_prefix;
  d.rec.decode_length = submission.decode_length;
  d.rec.state = CallState::kQueued;
  d.prompt = std::move(submission.prompt);
  d.tags = std::move(submission.tags);
  d.decode_stream_key = submission.decode_stream_key;
  d.on_decode_complete = std::move(submission.on_decode_complete);
  calls_.emplace(id, std::move(d));
  wake(now);
  return id;
}

ContinuationHandle Engine::submit_partial_prefill(PartialSubmission submission) {
  if (submission.prefix.empty()) {
    throw InvalidState("submit_partial_prefill: prefix must be non-empty");
  }
  check_tags_cover(submission.tags, submission.prefix.size());

  const SimTime now = loop_.now();
  CallId id = allocate_id(submission.call_id);
  CallData d;
  d.rec.id = id;
  d.rec.agentic_request_id = submission.agentic_request_id;
  d.rec.iteration_id = submission.iteration_id;
  d.rec.arrival_at_engine = now;
  d.rec.agentic_arrival = submission.agentic_arrival;
  d.rec.submit_time = now;
  d.rec.partial = true;
  d.rec.prompt_tokens = static_cast<std::int64_t>(submission.prefix.size());
  d.rec.cached_prefix = cache_.lookup_prefix(submission.prefix, now);
  d.rec.charged_total = d.rec.prompt_tokens - d.rec.cached_prefix;
  d.rec.decode_length = 0;  // set by extend_prefill
  d.rec.state = CallState::kQueued;
  d.prompt = std::move(submission.prefix);
  d.tags = std::move(submission.tags);
  d.decode_stream_key = submission.decode_stream_key;
  d.on_ready = std::move(submission.on_ready);
  d.on_pin_failed = std::move(submission.on_pin_failed);
  calls_.emplace(id, std::move(d));
  wake(now);
  return ContinuationHandle{id};
}

void Engine::extend_prefill(const ContinuationHandle& handle, std::vector<TokenId> suffix,
                            std::vector<TagRange> suffix_tags, std::int64_t decode_length,
                            CallCallback on_decode_complete) {
  auto it = calls_.find(handle.call_id);
  if (it == calls_.end()) throw StaleHandle("unknown continuation handle");
  CallData& call = it->second;
  if (!call.rec.partial || call.extension_received) {
    throw StaleHandle("continuation handle already consumed");
  }
  if (call.rec.state == CallState::kDone || call.rec.state == CallState::kAborted ||
      call.rec.state == CallState::kDecoding) {
    throw StaleHandle("continuation no longer extendable (state " +
                      std::string(to_string(call.rec.state)) + ")");
  }
  if (decode_length < 1) throw InvalidState("extend_prefill: decode_length must be >= 1");
  check_tags_cover(suffix_tags, suffix.size());

  const SimTime now = loop_.now();
  const auto prefix_len = static_cast<std::int64_t>(call.prompt.size());
  call.extension_received = true;
  call.prompt.insert(call.prompt.end(), suffix.begin(), suffix.end());
  for (TagRange r : suffix_tags) {
    call.tags.push_back(TagRange{r.begin + prefix_len, r.end + prefix_len, r.tag});
  }
  call.rec.prompt_tokens += static_cast<std::int64_t>(suffix.size());
  call.rec.charged_total += static_cast<std::int64_t>(suffix.size());
  call.rec.decode_length = decode_length;
  call.on_decode_complete = std::move(on_decode_complete);

  if (call.rec.state == CallState::kAwaitingExtension) {
    if (call.rec.charged_done >= call.rec.charged_total) {
      // Empty suffix: nothing left to prefill.
      complete_prefill(call, now);
    } else {
      call.rec.state = CallState::kPrefilling;
    }
  }
  // Queued/Prefilling: the suffix simply queues behind the remaining prefix.
  wake(now);
}

void Engine::register_streaming_callback(CallId call, TokenCallback callback) {
  auto it = calls_.find(call);
  if (it == calls_.end()) throw UnknownCall("call " + std::to_string(call) + " unknown");
  if (it->second.rec.state == CallState::kDone || it->second.rec.state == CallState::kAborted) {
    throw InvalidState("cannot register streaming callback on a finished call");
  }
  it->second.streaming = std::move(callback);
}

void Engine::abandon_partial(const ContinuationHandle& handle) {
  auto it = calls_.find(handle.call_id);
  if (it == calls_.end()) throw StaleHandle("unknown continuation handle");
  CallData& call = it->second;
  if (!call.rec.partial || call.extension_received ||
      call.rec.state == CallState::kDone || call.rec.state == CallState::kAborted) {
    throw StaleHandle("continuation handle no longer abandonable");
  }
  release_partial_pins(call);
  if (!call.chain_refs.empty()) {
    cache_.release(call.chain_refs);
    call.chain_refs.clear();
  }
  call.rec.state = CallState::kAborted;
}

void Engine::pin_partial(CallData& call, SimTime now) {
  std::vector<TagRange> partial_range{
      TagRange{0, static_cast<std::int64_t>(call.prompt.size()), KvTag::kPartialPrefill}};
  std::vector<std::int32_t> ids;
  try {
    ids = cache_.insert(call.prompt, partial_range, now);
  } catch (const CacheFull&) {
    call.rec.state = CallState::kAborted;
    if (call.on_pin_failed) call.on_pin_failed(call.rec.id, now);
    return;
  }
  call.chain_refs = ids;
  auto tag_at = [&](std::int64_t pos) {
    for (const TagRange& r : call.tags) {
      if (pos >= r.begin && pos < r.end) return r.tag;
    }
    return KvTag::kUserQuery;
  };
  const std::int64_t bs = cache_.config().block_size;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::int32_t id = ids[i];
    if (partial_pin_counts_[id]++ == 0) {
      const KvBlock& b = cache_.block(id);
      // Blocks that pre-existed the partial keep their own tag on release;
      // fresh blocks take the real tag of their first token.
      KvTag real = b.tag != KvTag::kPartialPrefill
                       ? b.tag
                       : tag_at(static_cast<std::int64_t>(i) * bs);
      partial_real_tags_[id] = real;
    }
    cache_.set_reuse_priority(std::span<const std::int32_t>(&id, 1),
                              PriorityUpdate{true, KvTag::kPartialPrefill});
  }
  call.pinned_ids = ids;
  call.rec.state = CallState::kAwaitingExtension;
  if (call.on_ready) call.on_ready(call.rec.id, now);
}

void Engine::release_partial_pins(CallData& call) {
  for (std::int32_t id : call.pinned_ids) {
    auto it = partial_pin_counts_.find(id);
    if (it == partial_pin_counts_.end()) continue;
    if (--it->second > 0) continue;
    partial_pin_counts_.erase(it);
    if (cache_.contains(id)) {
      cache_.set_reuse_priority(std::span<const std::int32_t>(&id, 1),
                                PriorityUpdate{false, std::nullopt});
      auto tag_it = partial_real_tags_.find(id);
      if (tag_it != partial_real_tags_.end()) cache_.set_tag(id, tag_it->second);
    }
    partial_real_tags_.erase(id);
  }
  call.pinned_ids.clear();
}

void Engine::complete_prefill(CallData& call, SimTime now) {
  call.rec.prefill_complete_time = now;
  if (call.rec.partial && !call.extension_received) {
    pin_partial(call, now);
    return;
  }
  std::vector<std::int32_t> old_refs = std::move(call.chain_refs);
  call.chain_refs.clear();
  try {
    call.chain_refs = cache_.insert(call.prompt, call.tags, now);
  } catch (const CacheFull&) {
    // Proceed uncached; charging already happened at admission.
  }
  if (!call.pinned_ids.empty()) release_partial_pins(call);
  if (!old_refs.empty()) cache_.release(old_refs);
  call.rec.state = CallState::kDecoding;
  call.rec.decode_start_time = now;
}

void Engine::finish_decode(CallData& call, SimTime now) {
  call.rec.state = CallState::kDone;
  call.rec.decode_complete_time = now;

  // Materialize the decode output into the cache, tagged as response
  // content, then drop all references held for this call.
  std::vector<TokenId> full = call.prompt;
  full.reserve(full.size() + static_cast<std::size_t>(call.rec.emitted));
  for (std::int64_t i = 0; i < call.rec.emitted; ++i) {
    full.push_back(decode_token(call.decode_stream_key, i));
  }
  std::vector<TagRange> tags = call.tags;
  tags.push_back(TagRange{call.rec.prompt_tokens, call.rec.prompt_tokens + call.rec.emitted,
                          KvTag::kResponse});
  try {
    std::vector<std::int32_t> ids = cache_.insert(full, tags, now);
    cache_.release(ids);
  } catch (const CacheFull&) {
  }
  if (!call.chain_refs.empty()) {
    cache_.release(call.chain_refs);
    call.chain_refs.clear();
  }
  if (call.on_decode_complete) call.on_decode_complete(call.rec.id, now);
}

CallId Engine::select_prefill_head() const {
  CallId best = 0;
  std::tuple<SimTime, std::int64_t, SimTime, CallId> best_key{};
  for (const auto& [id, call] : calls_) {
    const CallRecord& r = call.rec;
    const bool wants_prefill =
        r.state == CallState::kQueued ||
        (r.state == CallState::kPrefilling && r.charged_done < r.charged_total);
    if (!wants_prefill) continue;
    std::tuple<SimTime, std::int64_t, SimTime, CallId> key =
        policy_ == SchedulerPolicy::kRequestAware
            ? std::make_tuple(r.agentic_arrival, static_cast<std::int64_t>(r.iteration_id),
                              r.arrival_at_engine, id)
            : std::make_tuple(r.arrival_at_engine, std::int64_t{0}, SimTime{0}, id);
    if (best == 0 || key < best_key) {
      best = id;
      best_key = key;
    }
  }
  return best;
}

void Engine::on_engine_step() {
  step_event_pending_ = false;
  const SimTime now = loop_.now();
  finish_inflight(now);
  start_step(now);
}

void Engine::finish_inflight(SimTime now) {
  if (!inflight_ || inflight_->end != now) return;
  InflightStep step = *inflight_;
  inflight_.reset();

  if (step.chunk_call != 0) {
    auto it = calls_.find(step.chunk_call);
    if (it != calls_.end() && it->second.rec.state == CallState::kPrefilling) {
      CallData& call = it->second;
      call.rec.charged_done += step.chunk_tokens;
      append_interval(call.rec.prefill_intervals, step.start, step.start + step.chunk_ms);
      if (call.rec.charged_done >= call.rec.charged_total) {
        complete_prefill(call, now);
      }
    }
  }

  const SimTime decode_begin = step.start + step.chunk_ms;
  std::vector<CallId> completed;
  for (CallId id : step.decoding) {
    auto it = calls_.find(id);
    if (it == calls_.end()) continue;
    CallData& call = it->second;
    call.rec.emitted += 1;
    append_interval(call.rec.decode_intervals, decode_begin, step.end);
    if (call.rec.emitted >= call.rec.decode_length) completed.push_back(id);
  }
  for (CallId id : completed) {
    auto it = calls_.find(id);
    if (it != calls_.end()) finish_decode(it->second, now);
  }
}

void Engine::start_step(SimTime now) {
  const CallId head = select_prefill_head();
  std::vector<CallId> decoding;
  for (const auto& [id, call] : calls_) {
    if (call.rec.state == CallState::kDecoding) decoding.push_back(id);
  }
  if (head == 0 && decoding.empty()) return;  // idle

  InflightStep step;
  step.start = now;
  if (head != 0) {
    CallData& call = data(head);
    const std::int64_t remaining = call.rec.charged_total - call.rec.charged_done;
    step.chunk_call = head;
    step.chunk_tokens = std::min<std::int64_t>(cost_.chunk_size, remaining);
    step.chunk_ms = cost_.chunk_ms(step.chunk_tokens);
    if (call.rec.state == CallState::kQueued) {
      call.rec.state = CallState::kPrefilling;
      call.rec.first_chunk_time = now;
    }
  }
  step.decoding = decoding;
  step.decode_ms = decoding.empty() ? 0 : cost_.decode_step_ms();
  step.end = now + step.chunk_ms + step.decode_ms;

  for (CallId id : decoding) {
    const CallData& call = data(id);
    const std::int64_t token_index = call.rec.emitted;
    loop_.schedule(step.end, EventKind::kCallbackDue,
                   "call=" + std::to_string(id) + " tok=" + std::to_string(token_index),
                   [this, id, token_index] { on_token_event(id, token_index); });
  }
  loop_.schedule(step.end, EventKind::kEngineStep, "", [this] { on_engine_step(); });

  if (step_logging_) {
    std::ostringstream line;
    line << "t=" << now << " dur=" << (step.end - now) << " chunk_call=" << step.chunk_call
         << " chunk_tokens=" << step.chunk_tokens << " decoding=" << decoding.size();
    step_log_.push_back(line.str());
  }
  inflight_ = std::move(step);
}

void Engine::on_token_event(CallId id, std::int64_t token_index) {
  auto it = calls_.find(id);
  if (it == calls_.end()) return;
  CallData& call = it->second;
  const SimTime at = loop_.now();
  if (token_index == 0 && call.rec.first_token_time < 0) {
    call.rec.first_token_time = at;
  }
  if (call.streaming) call.streaming(token_index, at);
}

SimTime Engine::projected_llm_time(CallId id, std::int64_t tokens_emitted) const {
  const CallRecord& r = data(id).rec;
  const std::int64_t remaining = std::max<std::int64_t>(r.decode_length - tokens_emitted, 0);
  return r.prefill_busy_ms() + r.decode_busy_ms() + remaining * cost_.decode_step_ms();
}

SimTime Engine::actual_llm_time(CallId id) const {
  const CallRecord& r = data(id).rec;
  return r.prefill_busy_ms() + r.decode_busy_ms();
}

}  // namespace agentsim
