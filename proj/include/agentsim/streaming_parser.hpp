// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "agentsim/common.hpp"

namespace agentsim {

// A complete tool-call object extracted from the decode stream.
struct ToolInvocation {
  std::string tool_name;
  std::map<std::string, std::string> parameters;
  std::int64_t close_token_index{0};

  friend bool operator==(const ToolInvocation&, const ToolInvocation&) = default;
};

enum class StreamVerdict { kComplete, kIncomplete, kMalformed };
const char* to_string(StreamVerdict verdict);

// Incremental parser over the decode text stream. Accepts a flat JSON array
// of tool-call objects and emits each invocation the moment its closing
// brace arrives. Values may be strings, numbers, booleans, null, or one
// level of nested objects/arrays captured as raw text. Text outside the
// top-level array is ignored. On malformed input the parser enters a sink
// state and emits nothing further.
class StreamingToolParser {
 public:
  // Chunks must arrive in order; token_index stamps any invocation whose
  // closing brace lies within this chunk.
  std::vector<ToolInvocation> feed(std::string_view chunk, std::int64_t token_index);

  StreamVerdict finish() const;

  bool malformed() const { return phase_ == Phase::kSink; }
  int depth() const { return depth_; }
  bool in_string() const { return in_string_; }
  bool escape_pending() const { return escape_; }
  std::size_t emitted_count() const { return emitted_; }

 private:
  enum class Phase {
    kBeforeArray,
    kArrayExpectFirst,   // '{' or ']'
    kArrayExpectObject,  // '{' only (after a comma)
    kArrayAfterValue,    // ',' or ']'
    kObjExpectFirstKey,  // '"' or '}'
    kObjExpectKey,       // '"' only (after a comma)
    kObjKey,
    kObjExpectColon,
    kObjExpectValue,
    kObjValueString,
    kObjValueRaw,
    kObjValueNested,
    kObjAfterValue,  // ',' or '}'
    kAfterArray,
    kSink,
  };

  // Returns false if the character must be re-processed in the new phase.
  bool consume(char c, std::int64_t token_index, std::vector<ToolInvocation>& out);
  void fail();
  void finish_value();
  bool close_object(std::int64_t token_index, std::vector<ToolInvocation>& out);

  Phase phase_{Phase::kBeforeArray};
  int depth_{0};         // array + object + nested nesting depth
  bool in_string_{false};
  bool escape_{false};
  std::string key_;
  std::string value_;
  int nested_depth_{0};
  bool nested_in_string_{false};
  bool nested_escape_{false};
  std::map<std::string, std::string> params_;
  std::size_t emitted_{0};
  std::int64_t last_close_index_{-1};
};

// One-shot convenience used by the batch (non-streaming) dispatch path.
struct BatchParseResult {
  std::vector<ToolInvocation> invocations;
  StreamVerdict verdict{StreamVerdict::kIncomplete};
};
BatchParseResult batch_parse_tool_calls(std::string_view text);

}  // namespace agentsim
