// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace agentsim {

// Virtual time in integer milliseconds. The whole simulation runs on this
// clock; there is no floating-point time anywhere.
using SimTime = std::int64_t;
using TokenId = std::uint64_t;
using CallId = std::uint64_t;

// ---------------------------------------------------------------------------
// Error types. The CLI maps these onto exit codes: ConfigError -> 1,
// trace errors -> 2, everything else raised during a run -> 3.
// ---------------------------------------------------------------------------

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class TraceError : public std::runtime_error {
 public:
  explicit TraceError(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public TraceError {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : TraceError("parse error at line " + std::to_string(line) + ": " + reason),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class InvariantViolation : public TraceError {
 public:
  InvariantViolation(const std::string& request_id, const std::string& reason)
      : TraceError("invariant violation in request '" + request_id + "': " + reason),
        request_id_(request_id) {}
  const std::string& request_id() const { return request_id_; }

 private:
  std::string request_id_;
};

class TraceMismatch : public TraceError {
 public:
  explicit TraceMismatch(const std::string& what) : TraceError(what) {}
};

class SimError : public std::runtime_error {
 public:
  explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

class TimeTravel : public SimError {
 public:
  explicit TimeTravel(const std::string& what) : SimError(what) {}
};

class CacheError : public SimError {
 public:
  explicit CacheError(const std::string& what) : SimError(what) {}
};

class CacheFull : public CacheError {
 public:
  explicit CacheFull(const std::string& what) : CacheError(what) {}
};

class UnknownBlock : public CacheError {
 public:
  explicit UnknownBlock(const std::string& what) : CacheError(what) {}
};

class ZeroRefRelease : public CacheError {
 public:
  explicit ZeroRefRelease(const std::string& what) : CacheError(what) {}
};

class EngineError : public SimError {
 public:
  explicit EngineError(const std::string& what) : SimError(what) {}
};

class DuplicateCallId : public EngineError {
 public:
  explicit DuplicateCallId(const std::string& what) : EngineError(what) {}
};

class StaleHandle : public EngineError {
 public:
  explicit StaleHandle(const std::string& what) : EngineError(what) {}
};

class InvalidState : public EngineError {
 public:
  explicit InvalidState(const std::string& what) : EngineError(what) {}
};

class UnknownCall : public EngineError {
 public:
  explicit UnknownCall(const std::string& what) : EngineError(what) {}
};

class MetricsError : public SimError {
 public:
  explicit MetricsError(const std::string& what) : SimError(what) {}
};

class EmptyInput : public MetricsError {
 public:
  explicit EmptyInput(const std::string& what) : MetricsError(what) {}
};

class IncompleteTimeline : public MetricsError {
 public:
  explicit IncompleteTimeline(const std::string& what) : MetricsError(what) {}
};

// ---------------------------------------------------------------------------
// Hashing / deterministic randomness
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return splitmix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

inline std::uint64_t hash_string(std::string_view s) {
  // FNV-1a, 64 bit.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic RNG used by the trace generator and failure injection. All
// distributions are implemented explicitly on top of mt19937_64 raw draws so
// that results do not depend on the standard library's distribution
// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

  double normal() {
    // Box-Muller, one output per pair of draws.
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double lognormal(double log_median, double sigma) {
    return std::exp(log_median + sigma * normal());
  }

  // Geometric on {1, 2, ...} with success probability p, clamped to max_value.
  std::int64_t truncated_geometric(double p, std::int64_t max_value) {
    double u = uniform01();
    auto k = static_cast<std::int64_t>(1 + std::floor(std::log1p(-u) / std::log1p(-p)));
    if (k < 1) k = 1;
    return std::min(k, max_value);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace agentsim
