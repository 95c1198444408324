// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "agentsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace agentsim {

IntervalSet::IntervalSet(std::vector<Interval> intervals) {
  std::vector<Interval> in;
  in.reserve(intervals.size());
  for (const Interval& i : intervals) {
    if (i.end > i.begin) in.push_back(i);
  }
  std::sort(in.begin(), in.end(), [](const Interval& a, const Interval& b) {
    if (a.begin != b.begin) return a.begin < b.begin;
    return a.end < b.end;
  });
  for (const Interval& i : in) {
    if (!intervals_.empty() && i.begin <= intervals_.back().end) {
      intervals_.back().end = std::max(intervals_.back().end, i.end);
    } else {
      intervals_.push_back(i);
    }
  }
}

SimTime IntervalSet::total() const {
  SimTime sum = 0;
  for (const Interval& i : intervals_) sum += i.length();
  return sum;
}

IntervalSet IntervalSet::intersect(const IntervalSet& other) const {
  std::vector<Interval> out;
  std::size_t a = 0, b = 0;
  while (a < intervals_.size() && b < other.intervals_.size()) {
    const Interval& x = intervals_[a];
    const Interval& y = other.intervals_[b];
    const SimTime lo = std::max(x.begin, y.begin);
    const SimTime hi = std::min(x.end, y.end);
    if (lo < hi) out.push_back(Interval{lo, hi});
    if (x.end < y.end) {
      ++a;
    } else {
      ++b;
    }
  }
  return IntervalSet(std::move(out));
}

IntervalSet IntervalSet::subtract(const IntervalSet& other) const {
  std::vector<Interval> out;
  std::size_t b = 0;
  for (Interval cur : intervals_) {
    while (b < other.intervals_.size() && other.intervals_[b].end <= cur.begin) ++b;
    std::size_t k = b;
    SimTime pos = cur.begin;
    while (k < other.intervals_.size() && other.intervals_[k].begin < cur.end) {
      const Interval& y = other.intervals_[k];
      if (y.begin > pos) out.push_back(Interval{pos, y.begin});
      pos = std::max(pos, y.end);
      if (pos >= cur.end) break;
      ++k;
    }
    if (pos < cur.end) out.push_back(Interval{pos, cur.end});
  }
  return IntervalSet(std::move(out));
}

IntervalSet IntervalSet::union_with(const IntervalSet& other) const {
  std::vector<Interval> all = intervals_;
  all.insert(all.end(), other.intervals_.begin(), other.intervals_.end());
  return IntervalSet(std::move(all));
}

IntervalSet IntervalSet::clip(SimTime begin, SimTime end) const {
  std::vector<Interval> out;
  for (const Interval& i : intervals_) {
    const SimTime lo = std::max(i.begin, begin);
    const SimTime hi = std::min(i.end, end);
    if (lo < hi) out.push_back(Interval{lo, hi});
  }
  return IntervalSet(std::move(out));
}

std::int64_t RequestMetrics::hit_tokens() const {
  std::int64_t total = 0;
  for (const IterationCacheStat& c : cache) total += c.hit_tokens;
  return total;
}

std::int64_t RequestMetrics::prompt_tokens() const {
  std::int64_t total = 0;
  for (const IterationCacheStat& c : cache) total += c.prompt_tokens;
  return total;
}

RequestMetrics compute_request_metrics(const RequestTimeline& timeline) {
  if (timeline.ftr_time < timeline.arrival || timeline.e2e_time < timeline.ftr_time) {
    throw IncompleteTimeline("request " + timeline.request_id +
                             ": timeline missing arrival/ftr/e2e ordering");
  }
  RequestMetrics m;
  m.request_id = timeline.request_id;
  m.ftr_ms = timeline.ftr_time - timeline.arrival;
  m.e2e_ms = timeline.e2e_time - timeline.arrival;
  m.cache = timeline.cache;

  const SimTime lo = timeline.arrival;
  const SimTime hi = timeline.ftr_time;
  IntervalSet prefill = IntervalSet(timeline.prefill).clip(lo, hi);
  IntervalSet decode = IntervalSet(timeline.decode).clip(lo, hi);
  IntervalSet tools = IntervalSet(timeline.tools).clip(lo, hi);
  IntervalSet llm = prefill.union_with(decode);

  m.breakdown.prefill_ms = prefill.total();
  m.breakdown.decode_ms = decode.total();
  // Overlap with the request's own LLM activity is attributed to
  // prefill/decode; only the non-overlapped portion counts as tool time.
  m.breakdown.critical_tool_ms = tools.subtract(llm).total();
  m.breakdown.waiting_ms =
      m.ftr_ms - m.breakdown.prefill_ms - m.breakdown.decode_ms - m.breakdown.critical_tool_ms;
  if (m.breakdown.waiting_ms < 0) {
    throw IncompleteTimeline("request " + timeline.request_id +
                             ": breakdown exceeds the FTR window (overlapping activity)");
  }
  return m;
}

DistributionSummary summarize(std::span<const double> values) {
  if (values.empty()) throw EmptyInput("summarize: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  auto nearest_rank = [&](double p) {
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
    if (rank < 1) rank = 1;
    if (rank > sorted.size()) rank = sorted.size();
    return sorted[rank - 1];
  };
  DistributionSummary s;
  s.p50 = nearest_rank(50);
  s.p90 = nearest_rank(90);
  s.p99 = nearest_rank(99);
  s.max = sorted.back();
  double sum = 0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(sorted.size());
  return s;
}

double percent_improvement(double baseline, double treated) {
  if (baseline == 0) return 0;
  return (baseline - treated) / baseline * 100.0;
}

double cache_hit_rate(std::span<const RequestMetrics> metrics) {
  if (metrics.empty()) throw EmptyInput("cache_hit_rate: empty input");
  std::int64_t hits = 0;
  std::int64_t total = 0;
  for (const RequestMetrics& m : metrics) {
    hits += m.hit_tokens();
    total += m.prompt_tokens();
  }
  if (total == 0) return 0.0;
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<double> ftr_values(std::span<const RequestMetrics> metrics) {
  std::vector<double> out;
  out.reserve(metrics.size());
  for (const RequestMetrics& m : metrics) out.push_back(static_cast<double>(m.ftr_ms));
  return out;
}

std::vector<double> e2e_values(std::span<const RequestMetrics> metrics) {
  std::vector<double> out;
  out.reserve(metrics.size());
  for (const RequestMetrics& m : metrics) out.push_back(static_cast<double>(m.e2e_ms));
  return out;
}

std::string requests_csv(std::span<const RequestMetrics> metrics) {
  std::ostringstream out;
  out << "request_id,ftr_ms,e2e_ms,tool_ms,wait_ms,prefill_ms,decode_ms,hit_tokens,prompt_tokens\n";
  for (const RequestMetrics& m : metrics) {
    out << m.request_id << ',' << m.ftr_ms << ',' << m.e2e_ms << ','
        << m.breakdown.critical_tool_ms << ',' << m.breakdown.waiting_ms << ','
        << m.breakdown.prefill_ms << ',' << m.breakdown.decode_ms << ',' << m.hit_tokens() << ','
        << m.prompt_tokens() << '\n';
  }
  return out.str();
}

namespace {

void summary_row(std::ostringstream& out, const char* name, const DistributionSummary& s) {
  char buf[200];
  std::snprintf(buf, sizeof(buf), "%-16s %12.1f %12.1f %12.1f %12.1f %12.1f\n", name, s.p50, s.p90,
                s.p99, s.max, s.mean);
  out << buf;
}

}  // namespace

std::string summary_text(std::span<const RequestMetrics> metrics) {
  std::ostringstream out;
  char buf[200];
  std::snprintf(buf, sizeof(buf), "%-16s %12s %12s %12s %12s %12s\n", "metric", "p50", "p90", "p99",
                "max", "mean");
  out << buf;
  if (metrics.empty()) {
    out << "(no requests)\n";
    return out.str();
  }
  auto field = [&](auto getter) {
    std::vector<double> v;
    v.reserve(metrics.size());
    for (const RequestMetrics& m : metrics) v.push_back(getter(m));
    return summarize(v);
  };
  summary_row(out, "ftr_ms", field([](const RequestMetrics& m) { return double(m.ftr_ms); }));
  summary_row(out, "e2e_ms", field([](const RequestMetrics& m) { return double(m.e2e_ms); }));
  summary_row(out, "tool_ms",
              field([](const RequestMetrics& m) { return double(m.breakdown.critical_tool_ms); }));
  summary_row(out, "wait_ms",
              field([](const RequestMetrics& m) { return double(m.breakdown.waiting_ms); }));
  summary_row(out, "prefill_ms",
              field([](const RequestMetrics& m) { return double(m.breakdown.prefill_ms); }));
  summary_row(out, "decode_ms",
              field([](const RequestMetrics& m) { return double(m.breakdown.decode_ms); }));
  std::snprintf(buf, sizeof(buf), "cache_hit_rate   %12.4f\n", cache_hit_rate(metrics));
  out << buf;
  return out.str();
}

std::string cdf_csv(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::ostringstream out;
  out << "value,cumulative_fraction\n";
  char buf[64];
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.1f,%.6f\n", sorted[i],
                  static_cast<double>(i + 1) / static_cast<double>(sorted.size()));
    out << buf;
  }
  return out.str();
}

}  // namespace agentsim
