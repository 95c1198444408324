// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "agentsim/orchestrator.hpp"

namespace agentsim {

struct ScenarioResult {
  std::string name;
  bool passed{false};
  std::string details;  // per-assertion lines, plus diagnostics on failure
};

struct Scenario {
  std::string name;
  std::string summary;
  std::function<ScenarioResult()> run;
};

// Deterministic regression scenarios with embedded traces:
//   kv_thrashing        - LRU evicts a blocked request's context, tiered keeps it
//   request_scheduling  - FCFS vs request-aware ordering of a later iteration
//   overlap_timeline    - sequential vs split+streaming makespan, closed form
const std::vector<Scenario>& paper_scenarios();

ScenarioResult run_scenario(const Scenario& scenario);
std::string run_all_scenarios_report(bool* all_passed = nullptr);

// Embedded traces, exposed for tests that assert on cache/scheduler effects.
std::vector<AgenticRequestSpec> thrashing_trace();
SimConfig thrashing_config(bool tiered);
std::vector<AgenticRequestSpec> scheduling_trace();
SimConfig scheduling_config(SchedulerPolicy policy);
std::vector<AgenticRequestSpec> overlap_trace();
SimConfig overlap_config(bool split_and_stream);

}  // namespace agentsim
