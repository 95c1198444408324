// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "agentsim/engine.hpp"

namespace agentsim {

// Sorted, disjoint, half-open interval set over virtual time.
class IntervalSet {
 public:
  IntervalSet() = default;
  explicit IntervalSet(std::vector<Interval> intervals);

  SimTime total() const;
  bool empty() const { return intervals_.empty(); }
  const std::vector<Interval>& intervals() const { return intervals_; }

  IntervalSet intersect(const IntervalSet& other) const;
  IntervalSet subtract(const IntervalSet& other) const;
  IntervalSet union_with(const IntervalSet& other) const;
  IntervalSet clip(SimTime begin, SimTime end) const;

 private:
  std::vector<Interval> intervals_;
};

struct IterationCacheStat {
  std::int64_t hit_tokens{0};
  std::int64_t prompt_tokens{0};
};

// Everything needed to compute one request's metrics, harvested from the
// simulation.
struct RequestTimeline {
  std::string request_id;
  SimTime arrival{0};
  SimTime ftr_time{-1};  // first final-response token
  SimTime e2e_time{-1};  // final decode completion
  std::vector<Interval> prefill;  // engine time prefilling this request's calls
  std::vector<Interval> decode;
  std::vector<Interval> tools;  // dispatch..completion per tool execution
  std::vector<IterationCacheStat> cache;
};

struct FtrBreakdown {
  SimTime critical_tool_ms{0};
  SimTime waiting_ms{0};
  SimTime prefill_ms{0};
  SimTime decode_ms{0};

  SimTime sum() const { return critical_tool_ms + waiting_ms + prefill_ms + decode_ms; }
};

struct RequestMetrics {
  std::string request_id;
  SimTime ftr_ms{0};
  SimTime e2e_ms{0};
  FtrBreakdown breakdown;
  std::vector<IterationCacheStat> cache;

  std::int64_t hit_tokens() const;
  std::int64_t prompt_tokens() const;
};

// Breakdown over [arrival, ftr): prefill and decode are this request's own
// engine activity; critical tool time is the union of tool intervals minus
// any overlap with that activity; waiting is the remainder. The four parts
// partition the FTR window exactly.
RequestMetrics compute_request_metrics(const RequestTimeline& timeline);

struct DistributionSummary {
  double p50{0}, p90{0}, p99{0}, max{0}, mean{0};
};

// Nearest-rank percentiles. Throws EmptyInput on an empty list.
DistributionSummary summarize(std::span<const double> values);

// (baseline - treated) / baseline, as a percentage.
double percent_improvement(double baseline, double treated);

// Total hit tokens / total prompt tokens across all iterations.
double cache_hit_rate(std::span<const RequestMetrics> metrics);

std::vector<double> ftr_values(std::span<const RequestMetrics> metrics);
std::vector<double> e2e_values(std::span<const RequestMetrics> metrics);

// Fixed-format output writers (used by the CLI; byte-stable across runs).
std::string requests_csv(std::span<const RequestMetrics> metrics);
std::string summary_text(std::span<const RequestMetrics> metrics);
std::string cdf_csv(std::span<const double> values);

}  // namespace agentsim
