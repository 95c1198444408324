// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agentsim/trace.hpp"

namespace agentsim {

struct ToolProfile {
  std::string name;
  double base_ratio{1.0};  // tool time / iteration LLM time, before noise
};

// Synthetic workload shape. Only the medians and maxima are anchored to the
// production statistics; distribution shapes are config choices.
struct GeneratorConfig {
  int num_requests{60};
  double qps{0.05};  // Poisson arrival rate, requests/second

  // Iteration depth ~ truncated geometric on {1..depth_max}.
  double depth_p{0.4};
  std::int64_t depth_max{7};

  // Per-iteration tool fan-out ~ truncated geometric on {1..fanout_max}.
  double fanout_p{0.4};
  std::int64_t fanout_max{20};

  // First-iteration prompt total ~ lognormal(median = prompt_base_median).
  double prompt_base_median{16000.0};
  double prompt_sigma{0.30};
  double system_frac{0.62};
  double user_frac{0.22};  // history gets the remainder
  int system_variants{2};  // pool size per (iteration type, tool set) key

  double tool_out_median{1200.0};
  double tool_out_sigma{0.5};

  double decode_inter_median{150.0};
  double decode_final_median{750.0};
  double decode_sigma{0.35};

  std::vector<ToolProfile> tools;
  double ratio_scale{0.8};
  double ratio_sigma{0.85};

  void validate() const;  // throws ConfigError
};

GeneratorConfig default_workload();
GeneratorConfig tool_heavy_workload();
GeneratorConfig iteration_heavy_workload();
std::optional<GeneratorConfig> workload_by_name(std::string_view name);

// Deterministic in (config, seed). Arrival times follow a Poisson process at
// config.qps; emitted statistics approximate the configured targets.
std::vector<AgenticRequestSpec> generate_synthetic_trace(const GeneratorConfig& config,
                                                         std::uint64_t seed);

}  // namespace agentsim
