// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agentsim/common.hpp"

namespace agentsim {

// Semantic tag of a prompt section. Mirrors the tags carried by KV cache
// blocks so that prompt composition maps one-to-one onto block metadata.
enum class SectionTag { kSystemPrompt, kUserQuery, kToolOutput, kHistory };

const char* to_string(SectionTag tag);
std::optional<SectionTag> section_tag_from_string(std::string_view s);

// One contiguous slice of a prompt. Content identity is synthetic: two
// sections with equal (tag, length, content_key) materialize to identical
// token sequences, which is all prefix caching needs.
struct PromptSection {
  SectionTag tag{SectionTag::kSystemPrompt};
  std::int64_t length{0};
  std::uint64_t content_key{0};
  // Producing iteration index; meaningful only for kToolOutput sections.
  std::int32_t src_iteration{-1};

  friend bool operator==(const PromptSection&, const PromptSection&) = default;
};

// A tool invocation scripted by the trace. Latency is either fixed virtual
// milliseconds or a ratio against the owning iteration's LLM execution time;
// exactly one of the two is set.
struct ToolCallSpec {
  std::string tool_name;
  std::optional<double> latency_ratio;
  std::optional<SimTime> fixed_latency_ms;
  // Section this call contributes to later iterations' prompts. Its tag is
  // kToolOutput and src_iteration is the iteration issuing the call.
  PromptSection output_section;
  // Decode-token offset at which the call's closing brace appears.
  std::int64_t emit_token_index{0};
};

struct IterationSpec {
  std::vector<PromptSection> prompt_sections;
  std::int64_t decode_length{1};
  std::vector<ToolCallSpec> tool_calls;
  bool is_final{false};

  std::int64_t prompt_tokens() const;
};

struct AgenticRequestSpec {
  std::string request_id;
  SimTime arrival_ms{0};
  std::vector<IterationSpec> iterations;

  std::size_t depth() const { return iterations.size(); }
};

// ---------------------------------------------------------------------------
// Token materialization
// ---------------------------------------------------------------------------

// Deterministic pure function of (tag, src_iteration, content_key, position).
std::vector<TokenId> materialize_tokens(const PromptSection& section);

// Synthetic decode-output tokens for a call, keyed by an arbitrary stream id.
TokenId decode_token(std::uint64_t stream_key, std::int64_t index);

// ---------------------------------------------------------------------------
// Trace IO (line-delimited records, one request per line)
// ---------------------------------------------------------------------------

// Throws InvariantViolation if any structural rule is broken.
void validate_request(const AgenticRequestSpec& request);

std::vector<AgenticRequestSpec> parse_trace(std::istream& in);
std::vector<AgenticRequestSpec> load_trace(const std::string& path);
void write_trace(const std::vector<AgenticRequestSpec>& trace, std::ostream& out);
void save_trace(const std::vector<AgenticRequestSpec>& trace, const std::string& path);

// ---------------------------------------------------------------------------
// Trace statistics
// ---------------------------------------------------------------------------

// Empirical sample set with the percentile conventions used in stats reports.
class EmpiricalDist {
 public:
  void add(double v) { samples_.push_back(v); sorted_ = false; }
  std::size_t count() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  // Nearest-rank percentile, p in (0, 100].
  double percentile(double p) const;
  // Classic median: midpoint of the two middle samples for even counts.
  double median_midpoint() const;
  double max() const;
  double mean() const;

 private:
  void ensure_sorted() const;
  mutable std::vector<double> samples_;
  mutable bool sorted_{false};
};

// Iteration depth p50 uses the midpoint convention; every other p50 in the
// report is nearest-rank.
struct TraceStats {
  EmpiricalDist iteration_depth;   // per request
  EmpiricalDist tool_fanout;       // per intermediate iteration (final excluded)
  EmpiricalDist prompt_length;     // per iteration, total tokens
  EmpiricalDist decode_intermediate;
  EmpiricalDist decode_final;
};

// Throws EmptyInput on an empty trace.
TraceStats compute_stats(const std::vector<AgenticRequestSpec>& trace);

// Percentile table report (p50/p90/p99/max) as structured text.
std::string format_stats_report(const TraceStats& stats);

}  // namespace agentsim
