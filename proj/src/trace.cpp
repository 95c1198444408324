// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "agentsim/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace agentsim {

using ordered_json = nlohmann::ordered_json;

const char* to_string(SectionTag tag) {
  switch (tag) {
    case SectionTag::kSystemPrompt: return "system_prompt";
    case SectionTag::kUserQuery: return "user_query";
    case SectionTag::kToolOutput: return "tool_output";
    case SectionTag::kHistory: return "history";
  }
  return "unknown";
}

std::optional<SectionTag> section_tag_from_string(std::string_view s) {
  if (s == "system_prompt") return SectionTag::kSystemPrompt;
  if (s == "user_query") return SectionTag::kUserQuery;
  if (s == "tool_output") return SectionTag::kToolOutput;
  if (s == "history") return SectionTag::kHistory;
  return std::nullopt;
}

std::int64_t IterationSpec::prompt_tokens() const {
  std::int64_t total = 0;
  for (const auto& s : prompt_sections) total += s.length;
  return total;
}

// ---------------------------------------------------------------------------
// Token materialization: counter-mode hash stream per section identity.
// ---------------------------------------------------------------------------

namespace {

std::uint64_t tag_salt(SectionTag tag) {
  switch (tag) {
    case SectionTag::kSystemPrompt: return 0x53595354454d5052ULL;
    case SectionTag::kUserQuery: return 0x555345525155455aULL;
    case SectionTag::kToolOutput: return 0x544f4f4c4f555450ULL;
    case SectionTag::kHistory: return 0x48495354f52590aaULL;
  }
  return 0;
}

std::uint64_t section_stream_seed(const PromptSection& s) {
  std::uint64_t seed = splitmix64(s.content_key ^ tag_salt(s.tag));
  if (s.tag == SectionTag::kToolOutput) {
    seed = hash_combine(seed, static_cast<std::uint64_t>(s.src_iteration));
  }
  return seed;
}

}  // namespace

std::vector<TokenId> materialize_tokens(const PromptSection& section) {
  std::vector<TokenId> tokens;
  tokens.reserve(static_cast<std::size_t>(std::max<std::int64_t>(section.length, 0)));
  const std::uint64_t seed = section_stream_seed(section);
  for (std::int64_t i = 0; i < section.length; ++i) {
    tokens.push_back(splitmix64(seed + static_cast<std::uint64_t>(i)));
  }
  return tokens;
}

TokenId decode_token(std::uint64_t stream_key, std::int64_t index) {
  return splitmix64(splitmix64(stream_key ^ 0xdec0de0000000001ULL) +
                    static_cast<std::uint64_t>(index));
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void fail(const std::string& id, const std::string& reason) {
  throw InvariantViolation(id, reason);
}

}  // namespace

void validate_request(const AgenticRequestSpec& request) {
  const std::string& id = request.request_id;
  if (id.empty()) fail(id, "request_id must be non-empty");
  if (request.arrival_ms < 0) fail(id, "arrival_ms must be >= 0");
  if (request.iterations.empty()) fail(id, "at least one iteration required");

  for (std::size_t i = 0; i < request.iterations.size(); ++i) {
    const IterationSpec& iter = request.iterations[i];
    const std::string where = "iteration " + std::to_string(i);
    const bool last = (i + 1 == request.iterations.size());

    if (iter.is_final != last) {
      fail(id, where + ": is_final must be set exactly on the last iteration");
    }
    if (iter.is_final != iter.tool_calls.empty()) {
      fail(id, where + ": an iteration is final iff it makes no tool calls");
    }
    if (iter.decode_length < 1) fail(id, where + ": decode_length must be >= 1");
    if (iter.prompt_tokens() < 1) fail(id, where + ": prompt must be non-empty");

    bool seen_dependent = false;
    for (const PromptSection& s : iter.prompt_sections) {
      if (s.length < 0) fail(id, where + ": section length must be >= 0");
      if (s.tag == SectionTag::kToolOutput) {
        if (s.src_iteration < 0 || static_cast<std::size_t>(s.src_iteration) >= i) {
          fail(id, where + ": tool_output section must reference an earlier iteration");
        }
        // Does this section match a tool output from its producing iteration?
        const auto& producer = request.iterations[s.src_iteration];
        bool matched = false;
        for (const ToolCallSpec& t : producer.tool_calls) {
          if (t.output_section.content_key == s.content_key) {
            if (t.output_section.length != s.length) {
              fail(id, where + ": tool_output section length differs from producing tool output");
            }
            matched = true;
            break;
          }
        }
        if (!matched) fail(id, where + ": tool_output section has no producing tool call");
      }
      const bool dependent =
          s.tag == SectionTag::kToolOutput && s.src_iteration == static_cast<std::int32_t>(i) - 1;
      if (dependent) {
        seen_dependent = true;
      } else if (seen_dependent) {
        fail(id, where + ": tool-independent sections must precede sections from the previous iteration");
      }
    }

    std::int64_t prev_emit = -1;
    for (const ToolCallSpec& t : iter.tool_calls) {
      if (t.tool_name.empty()) fail(id, where + ": tool_name must be non-empty");
      if (t.latency_ratio.has_value() == t.fixed_latency_ms.has_value()) {
        fail(id, where + ": exactly one of ratio/fixed_ms must be set");
      }
      if (t.latency_ratio && *t.latency_ratio <= 0.0) {
        fail(id, where + ": latency_ratio must be > 0");
      }
      if (t.fixed_latency_ms && *t.fixed_latency_ms <= 0) {
        fail(id, where + ": fixed_ms must be > 0");
      }
      if (t.emit_token_index < 0 || t.emit_token_index >= iter.decode_length) {
        fail(id, where + ": emit_idx must lie within the iteration's decode");
      }
      if (t.emit_token_index <= prev_emit) {
        fail(id, where + ": emit_idx values must be strictly increasing");
      }
      prev_emit = t.emit_token_index;
      if (t.output_section.tag != SectionTag::kToolOutput ||
          t.output_section.src_iteration != static_cast<std::int32_t>(i)) {
        fail(id, where + ": tool output_section must be tagged tool_output for this iteration");
      }
      if (t.output_section.length < 0) fail(id, where + ": tool output length must be >= 0");
    }
  }
}

// ---------------------------------------------------------------------------
// JSON trace format
// ---------------------------------------------------------------------------

namespace {

void reject_unknown_fields(const ordered_json& obj, std::initializer_list<const char*> allowed,
                           std::size_t line, const char* context) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (item.key() == a) { known = true; break; }
    }
    if (!known) {
      throw ParseError(line, std::string("unknown field '") + item.key() + "' in " + context);
    }
  }
}

std::int64_t get_int(const ordered_json& obj, const char* field, std::size_t line) {
  if (!obj.contains(field) || !obj[field].is_number()) {
    throw ParseError(line, std::string("missing or non-numeric field '") + field + "'");
  }
  return obj[field].get<std::int64_t>();
}

std::uint64_t get_u64(const ordered_json& obj, const char* field, std::size_t line) {
  if (!obj.contains(field) || !obj[field].is_number()) {
    throw ParseError(line, std::string("missing or non-numeric field '") + field + "'");
  }
  return obj[field].get<std::uint64_t>();
}

PromptSection parse_section(const ordered_json& js, std::size_t line) {
  if (!js.is_object()) throw ParseError(line, "section must be an object");
  reject_unknown_fields(js, {"tag", "len", "key", "src_iter"}, line, "section");
  if (!js.contains("tag") || !js["tag"].is_string()) {
    throw ParseError(line, "section missing string field 'tag'");
  }
  auto tag = section_tag_from_string(js["tag"].get<std::string>());
  if (!tag) throw ParseError(line, "unknown section tag '" + js["tag"].get<std::string>() + "'");
  PromptSection s;
  s.tag = *tag;
  s.length = get_int(js, "len", line);
  s.content_key = get_u64(js, "key", line);
  if (js.contains("src_iter")) {
    s.src_iteration = static_cast<std::int32_t>(get_int(js, "src_iter", line));
  } else if (s.tag == SectionTag::kToolOutput) {
    throw ParseError(line, "tool_output section requires 'src_iter'");
  }
  return s;
}

ToolCallSpec parse_tool(const ordered_json& js, std::size_t line, std::int32_t iteration) {
  if (!js.is_object()) throw ParseError(line, "tool must be an object");
  reject_unknown_fields(js, {"name", "ratio", "fixed_ms", "out_len", "out_key", "emit_idx"},
                        line, "tool");
  ToolCallSpec t;
  if (!js.contains("name") || !js["name"].is_string()) {
    throw ParseError(line, "tool missing string field 'name'");
  }
  t.tool_name = js["name"].get<std::string>();
  if (js.contains("ratio")) t.latency_ratio = js["ratio"].get<double>();
  if (js.contains("fixed_ms")) t.fixed_latency_ms = get_int(js, "fixed_ms", line);
  t.output_section.tag = SectionTag::kToolOutput;
  t.output_section.src_iteration = iteration;
  t.output_section.length = get_int(js, "out_len", line);
  t.output_section.content_key = get_u64(js, "out_key", line);
  t.emit_token_index = get_int(js, "emit_idx", line);
  return t;
}

AgenticRequestSpec parse_request(const ordered_json& js, std::size_t line) {
  if (!js.is_object()) throw ParseError(line, "record must be an object");
  reject_unknown_fields(js, {"request_id", "arrival_ms", "iterations"}, line, "record");
  AgenticRequestSpec req;
  if (!js.contains("request_id") || !js["request_id"].is_string()) {
    throw ParseError(line, "missing string field 'request_id'");
  }
  req.request_id = js["request_id"].get<std::string>();
  req.arrival_ms = get_int(js, "arrival_ms", line);
  if (!js.contains("iterations") || !js["iterations"].is_array()) {
    throw ParseError(line, "missing array field 'iterations'");
  }
  std::int32_t index = 0;
  for (const auto& jit : js["iterations"]) {
    if (!jit.is_object()) throw ParseError(line, "iteration must be an object");
    reject_unknown_fields(jit, {"sections", "decode_len", "final", "tools"}, line, "iteration");
    IterationSpec iter;
    if (!jit.contains("sections") || !jit["sections"].is_array()) {
      throw ParseError(line, "iteration missing array field 'sections'");
    }
    for (const auto& jsec : jit["sections"]) {
      iter.prompt_sections.push_back(parse_section(jsec, line));
    }
    iter.decode_length = get_int(jit, "decode_len", line);
    if (!jit.contains("final") || !jit["final"].is_boolean()) {
      throw ParseError(line, "iteration missing boolean field 'final'");
    }
    iter.is_final = jit["final"].get<bool>();
    if (jit.contains("tools")) {
      if (!jit["tools"].is_array()) throw ParseError(line, "'tools' must be an array");
      for (const auto& jtool : jit["tools"]) {
        iter.tool_calls.push_back(parse_tool(jtool, line, index));
      }
    }
    req.iterations.push_back(std::move(iter));
    ++index;
  }
  return req;
}

ordered_json section_to_json(const PromptSection& s) {
  ordered_json js;
  js["tag"] = to_string(s.tag);
  js["len"] = s.length;
  js["key"] = s.content_key;
  if (s.tag == SectionTag::kToolOutput) js["src_iter"] = s.src_iteration;
  return js;
}

ordered_json request_to_json(const AgenticRequestSpec& req) {
  ordered_json js;
  js["request_id"] = req.request_id;
  js["arrival_ms"] = req.arrival_ms;
  js["iterations"] = ordered_json::array();
  for (const IterationSpec& iter : req.iterations) {
    ordered_json jit;
    jit["sections"] = ordered_json::array();
    for (const PromptSection& s : iter.prompt_sections) {
      jit["sections"].push_back(section_to_json(s));
    }
    jit["decode_len"] = iter.decode_length;
    jit["final"] = iter.is_final;
    jit["tools"] = ordered_json::array();
    for (const ToolCallSpec& t : iter.tool_calls) {
      ordered_json jt;
      jt["name"] = t.tool_name;
      if (t.latency_ratio) jt["ratio"] = *t.latency_ratio;
      if (t.fixed_latency_ms) jt["fixed_ms"] = *t.fixed_latency_ms;
      jt["out_len"] = t.output_section.length;
      jt["out_key"] = t.output_section.content_key;
      jt["emit_idx"] = t.emit_token_index;
      jit["tools"].push_back(std::move(jt));
    }
    js["iterations"].push_back(std::move(jit));
  }
  return js;
}

}  // namespace

std::vector<AgenticRequestSpec> parse_trace(std::istream& in) {
  std::vector<AgenticRequestSpec> trace;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json js;
    try {
      js = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
    AgenticRequestSpec req = parse_request(js, line_no);
    validate_request(req);
    if (!seen_ids.insert(req.request_id).second) {
      throw InvariantViolation(req.request_id, "duplicate request_id in trace");
    }
    trace.push_back(std::move(req));
  }
  std::stable_sort(trace.begin(), trace.end(),
                   [](const AgenticRequestSpec& a, const AgenticRequestSpec& b) {
                     return a.arrival_ms < b.arrival_ms;
                   });
  return trace;
}

std::vector<AgenticRequestSpec> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace file: " + path);
  return parse_trace(in);
}

void write_trace(const std::vector<AgenticRequestSpec>& trace, std::ostream& out) {
  for (const AgenticRequestSpec& req : trace) {
    out << request_to_json(req).dump() << '\n';
  }
}

void save_trace(const std::vector<AgenticRequestSpec>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw TraceError("cannot open trace file for writing: " + path);
  write_trace(trace, out);
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

void EmpiricalDist::ensure_sorted() const {
  if (!sorted_) {
    std::sort(samples_.begin(), samples_.end());
    sorted_ = true;
  }
}

double EmpiricalDist::percentile(double p) const {
  if (samples_.empty()) throw EmptyInput("percentile of empty distribution");
  ensure_sorted();
  auto rank = static_cast<std::size_t>(
      std::ceil(p / 100.0 * static_cast<double>(samples_.size())));
  if (rank < 1) rank = 1;
  if (rank > samples_.size()) rank = samples_.size();
  return samples_[rank - 1];
}

double EmpiricalDist::median_midpoint() const {
  if (samples_.empty()) throw EmptyInput("median of empty distribution");
  ensure_sorted();
  const std::size_t n = samples_.size();
  if (n % 2 == 1) return samples_[n / 2];
  return 0.5 * (samples_[n / 2 - 1] + samples_[n / 2]);
}

double EmpiricalDist::max() const {
  if (samples_.empty()) throw EmptyInput("max of empty distribution");
  ensure_sorted();
  return samples_.back();
}

double EmpiricalDist::mean() const {
  if (samples_.empty()) throw EmptyInput("mean of empty distribution");
  double sum = 0;
  for (double v : samples_) sum += v;
  return sum / static_cast<double>(samples_.size());
}

TraceStats compute_stats(const std::vector<AgenticRequestSpec>& trace) {
  if (trace.empty()) throw EmptyInput("compute_stats: empty trace");
  TraceStats stats;
  for (const AgenticRequestSpec& req : trace) {
    stats.iteration_depth.add(static_cast<double>(req.iterations.size()));
    for (const IterationSpec& iter : req.iterations) {
      stats.prompt_length.add(static_cast<double>(iter.prompt_tokens()));
      if (iter.is_final) {
        stats.decode_final.add(static_cast<double>(iter.decode_length));
      } else {
        stats.decode_intermediate.add(static_cast<double>(iter.decode_length));
        stats.tool_fanout.add(static_cast<double>(iter.tool_calls.size()));
      }
    }
  }
  return stats;
}

namespace {

void stats_row(std::ostringstream& out, const char* name, const EmpiricalDist& d,
               bool midpoint_median) {
  char buf[160];
  if (d.empty()) {
    std::snprintf(buf, sizeof(buf), "%-20s %10s %10s %10s %10s %10s\n", name, "-", "-", "-", "-",
                  "-");
    out << buf;
    return;
  }
  const double p50 = midpoint_median ? d.median_midpoint() : d.percentile(50);
  std::snprintf(buf, sizeof(buf), "%-20s %10.1f %10.1f %10.1f %10.1f %10.1f\n", name, p50,
                d.percentile(90), d.percentile(99), d.max(), d.mean());
  out << buf;
}

}  // namespace

std::string format_stats_report(const TraceStats& stats) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-20s %10s %10s %10s %10s %10s\n", "metric", "p50", "p90",
                "p99", "max", "mean");
  out << buf;
  stats_row(out, "iteration_depth", stats.iteration_depth, /*midpoint_median=*/true);
  stats_row(out, "tool_fanout", stats.tool_fanout, false);
  stats_row(out, "prompt_length", stats.prompt_length, false);
  stats_row(out, "decode_intermediate", stats.decode_intermediate, false);
  stats_row(out, "decode_final", stats.decode_final, false);
  return out.str();
}

}  // namespace agentsim
