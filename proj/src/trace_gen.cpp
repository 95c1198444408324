// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "agentsim/trace_gen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace agentsim {

void GeneratorConfig::validate() const {
  if (num_requests < 0) throw ConfigError("num_requests must be >= 0");
  if (qps <= 0) throw ConfigError("qps must be > 0");
  if (depth_p <= 0 || depth_p >= 1) throw ConfigError("depth_p must be in (0,1)");
  if (fanout_p <= 0 || fanout_p >= 1) throw ConfigError("fanout_p must be in (0,1)");
  if (depth_max < 1 || fanout_max < 1) throw ConfigError("depth_max/fanout_max must be >= 1");
  if (prompt_base_median <= 0 || tool_out_median <= 0 || decode_inter_median <= 0 ||
      decode_final_median <= 0) {
    throw ConfigError("length medians must be > 0");
  }
  if (system_frac <= 0 || user_frac <= 0 || system_frac + user_frac >= 1.0) {
    throw ConfigError("section fractions must be positive and sum below 1");
  }
  if (system_variants < 1) throw ConfigError("system_variants must be >= 1");
  if (tools.empty()) throw ConfigError("tool registry must be non-empty");
  for (const ToolProfile& t : tools) {
    if (t.name.empty() || t.base_ratio <= 0) throw ConfigError("invalid tool profile");
  }
  if (ratio_scale <= 0) throw ConfigError("ratio_scale must be > 0");
}

namespace {

std::vector<ToolProfile> default_tools() {
  return {
      {"search", 1.2},   {"code_exec", 1.8}, {"kb_lookup", 0.8}, {"web_fetch", 1.5},
      {"calendar", 0.4}, {"email", 0.5},     {"file_io", 0.7},
  };
}

}  // namespace

GeneratorConfig default_workload() {
  GeneratorConfig c;
  c.tools = default_tools();
  return c;
}

GeneratorConfig tool_heavy_workload() {
  GeneratorConfig c = default_workload();
  c.fanout_p = 0.22;  // median fan-out 3, heavy tails
  c.ratio_scale = 1.2;
  c.tool_out_median = 1500.0;
  c.qps = 0.03;
  return c;
}

GeneratorConfig iteration_heavy_workload() {
  GeneratorConfig c = default_workload();
  c.depth_p = 0.25;   // median depth 3
  c.fanout_p = 0.6;   // median fan-out 1
  c.ratio_scale = 0.25;
  c.tool_out_median = 900.0;
  c.qps = 0.03;
  return c;
}

std::optional<GeneratorConfig> workload_by_name(std::string_view name) {
  if (name == "default") return default_workload();
  if (name == "tool_heavy" || name == "tool-heavy") return tool_heavy_workload();
  if (name == "iteration_heavy" || name == "iteration-heavy") return iteration_heavy_workload();
  return std::nullopt;
}

namespace {

std::int64_t clamped_length(double v, std::int64_t lo) {
  auto n = static_cast<std::int64_t>(std::llround(v));
  return std::max(n, lo);
}

std::string pool_key_string(bool is_final, const std::set<std::string>& prev_tools) {
  std::string s = is_final ? "final|" : "inter|";
  for (const std::string& t : prev_tools) {
    s += t;
    s += ',';
  }
  return s;
}

}  // namespace

std::vector<AgenticRequestSpec> generate_synthetic_trace(const GeneratorConfig& config,
                                                         std::uint64_t seed) {
  config.validate();
  std::vector<AgenticRequestSpec> trace;
  trace.reserve(static_cast<std::size_t>(config.num_requests));

  Rng arrivals(splitmix64(seed ^ 0xa221a221a221a221ULL));
  SimTime clock = 0;

  for (int r = 0; r < config.num_requests; ++r) {
    clock += static_cast<SimTime>(
        std::llround(arrivals.exponential(config.qps) * 1000.0));

    Rng rng(splitmix64(seed ^ (static_cast<std::uint64_t>(r) * 0x9e3779b97f4a7c15ULL + 1)));
    AgenticRequestSpec req;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "r%05d", r);
    req.request_id = idbuf;
    req.arrival_ms = clock;

    const auto depth = static_cast<std::size_t>(
        rng.truncated_geometric(config.depth_p, config.depth_max));

    const double base = rng.lognormal(std::log(config.prompt_base_median), config.prompt_sigma);
    const double hist_frac = 1.0 - config.system_frac - config.user_frac;
    const std::int64_t user_len = clamped_length(base * config.user_frac, 16);
    const std::int64_t hist_len = clamped_length(base * hist_frac, 16);
    const std::uint64_t user_key = splitmix64(seed ^ (static_cast<std::uint64_t>(r) * 31 + 7));
    const std::uint64_t hist_key = splitmix64(seed ^ (static_cast<std::uint64_t>(r) * 31 + 11));

    std::set<std::string> prev_tools;
    std::vector<PromptSection> accumulated_outputs;

    for (std::size_t i = 0; i < depth; ++i) {
      IterationSpec iter;
      iter.is_final = (i + 1 == depth);

      // System prompt from a small shared pool keyed by iteration type and
      // the previous iteration's tool set, so cross-request sharing occurs.
      const std::string pool_key = pool_key_string(iter.is_final, prev_tools);
      const auto variant = rng.below(static_cast<std::uint64_t>(config.system_variants));
      const std::uint64_t sys_key =
          splitmix64(seed ^ hash_string(pool_key) ^ (variant * 0x51ed2701b7b5a0dULL + 3));
      Rng pool_rng(sys_key);
      const std::int64_t sys_len = clamped_length(
          pool_rng.lognormal(std::log(config.prompt_base_median * config.system_frac),
                             config.prompt_sigma),
          64);

      iter.prompt_sections.push_back(
          PromptSection{SectionTag::kSystemPrompt, sys_len, sys_key, -1});
      iter.prompt_sections.push_back(PromptSection{SectionTag::kUserQuery, user_len, user_key, -1});
      iter.prompt_sections.push_back(PromptSection{SectionTag::kHistory, hist_len, hist_key, -1});
      for (const PromptSection& out : accumulated_outputs) iter.prompt_sections.push_back(out);

      if (iter.is_final) {
        iter.decode_length = clamped_length(
            rng.lognormal(std::log(config.decode_final_median), config.decode_sigma), 16);
      } else {
        const auto fanout = rng.truncated_geometric(config.fanout_p, config.fanout_max);
        iter.decode_length = clamped_length(
            rng.lognormal(std::log(config.decode_inter_median), config.decode_sigma),
            std::max<std::int64_t>(8, 3 * (fanout + 1)));
        std::set<std::string> names;
        for (std::int64_t j = 0; j < fanout; ++j) {
          const ToolProfile& profile =
              config.tools[rng.below(static_cast<std::uint64_t>(config.tools.size()))];
          ToolCallSpec tool;
          tool.tool_name = profile.name;
          double ratio = rng.lognormal(std::log(profile.base_ratio * config.ratio_scale),
                                       config.ratio_sigma);
          tool.latency_ratio = std::clamp(ratio, 0.05, 50.0);
          tool.output_section.tag = SectionTag::kToolOutput;
          tool.output_section.src_iteration = static_cast<std::int32_t>(i);
          tool.output_section.length =
              clamped_length(rng.lognormal(std::log(config.tool_out_median), config.tool_out_sigma),
                             16);
          tool.output_section.content_key =
              splitmix64(seed ^ (static_cast<std::uint64_t>(r) * 1009 +
                                 static_cast<std::uint64_t>(i) * 131 +
                                 static_cast<std::uint64_t>(j) * 17 + 13));
          tool.emit_token_index = (static_cast<std::int64_t>(j) + 1) * iter.decode_length /
                                  (fanout + 1);
          iter.tool_calls.push_back(std::move(tool));
          names.insert(profile.name);
        }
        for (const ToolCallSpec& t : iter.tool_calls) {
          accumulated_outputs.push_back(t.output_section);
        }
        prev_tools = std::move(names);
      }
      req.iterations.push_back(std::move(iter));
    }
    validate_request(req);
    trace.push_back(std::move(req));
  }
  return trace;
}

}  // namespace agentsim
