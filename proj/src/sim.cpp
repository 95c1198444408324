// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "agentsim/sim.hpp"

#include <sstream>

namespace agentsim {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kRequestArrival: return "request_arrival";
    case EventKind::kEngineStep: return "engine_step";
    case EventKind::kToolComplete: return "tool_complete";
    case EventKind::kCallbackDue: return "callback_due";
  }
  return "unknown";
}

void EventLoop::schedule(SimTime fire_time, EventKind kind, std::string detail, Handler handler) {
  if (fire_time < now_) {
    throw TimeTravel("schedule at t=" + std::to_string(fire_time) + " before now=" +
                     std::to_string(now_));
  }
  queue_.push(Scheduled{fire_time, next_sequence_++, kind, std::move(detail), std::move(handler)});
}

SimTime EventLoop::run(std::optional<SimTime> until) {
  while (!queue_.empty()) {
    const Scheduled& top = queue_.top();
    if (until && top.fire_time > *until) break;
    // Copy out before pop; the handler may schedule new events.
    Scheduled event{top.fire_time, top.sequence, top.kind, top.detail, top.handler};
    queue_.pop();
    now_ = event.fire_time;
    if (logging_) {
      log_.push_back(EventLogEntry{event.fire_time, event.sequence, event.kind, event.detail});
    }
    ++processed_;
    event.handler();
  }
  return now_;
}

std::string format_event_log(const std::vector<EventLogEntry>& log) {
  std::ostringstream out;
  for (const EventLogEntry& e : log) {
    out << "t=" << e.time << " seq=" << e.sequence << " kind=" << to_string(e.kind);
    if (!e.detail.empty()) out << ' ' << e.detail;
    out << '\n';
  }
  return out.str();
}

}  // namespace agentsim
