// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "agentsim/common.hpp"

namespace agentsim {

enum class EventKind { kRequestArrival, kEngineStep, kToolComplete, kCallbackDue };

const char* to_string(EventKind kind);

// One processed-event record, enough to diff two runs for determinism.
struct EventLogEntry {
  SimTime time;
  std::uint64_t sequence;
  EventKind kind;
  std::string detail;
};

// Deterministic virtual-time event loop. Pop order is (fire_time, sequence)
// ascending; sequence is assigned at schedule time, so events at equal times
// run in insertion order. Single-threaded by contract: handlers run to
// completion before the next event is popped.
class EventLoop {
 public:
  using Handler = std::function<void()>;

  SimTime now() const { return now_; }

  // Throws TimeTravel if fire_time < now().
  void schedule(SimTime fire_time, EventKind kind, std::string detail, Handler handler);

  // Processes events until the queue empties or the next event would fire
  // after `until`. Returns the final clock value.
  SimTime run(std::optional<SimTime> until = std::nullopt);

  bool empty() const { return queue_.empty(); }
  std::size_t processed_count() const { return processed_; }

  const std::vector<EventLogEntry>& event_log() const { return log_; }
  void set_logging(bool enabled) { logging_ = enabled; }

 private:
  struct Scheduled {
    SimTime fire_time;
    std::uint64_t sequence;
    EventKind kind;
    std::string detail;
    Handler handler;
  };
  struct Later {
    bool operator()(const Scheduled& a, const Scheduled& b) const {
      if (a.fire_time != b.fire_time) return a.fire_time > b.fire_time;
      return a.sequence > b.sequence;
    }
  };

  SimTime now_{0};
  std::uint64_t next_sequence_{0};
  std::size_t processed_{0};
  bool logging_{true};
  std::priority_queue<Scheduled, std::vector<Scheduled>, Later> queue_;
  std::vector<EventLogEntry> log_;
};

// Renders the event log with one line per processed event.
std::string format_event_log(const std::vector<EventLogEntry>& log);

}  // namespace agentsim
