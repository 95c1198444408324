// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "agentsim/streaming_parser.hpp"

#include <cctype>

namespace agentsim {

const char* to_string(StreamVerdict verdict) {
  switch (verdict) {
    case StreamVerdict::kComplete: return "complete";
    case StreamVerdict::kIncomplete: return "incomplete";
    case StreamVerdict::kMalformed: return "malformed";
  }
  return "unknown";
}

namespace {

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Appends the character an unescaped string would contain for escape `c`.
void append_escape(std::string& out, char c) {
  switch (c) {
    case '"': out.push_back('"'); break;
    case '\\': out.push_back('\\'); break;
    case '/': out.push_back('/'); break;
    case 'b': out.push_back('\b'); break;
    case 'f': out.push_back('\f'); break;
    case 'n': out.push_back('\n'); break;
    case 'r': out.push_back('\r'); break;
    case 't': out.push_back('\t'); break;
    case 'u':
      // Unicode escapes pass through verbatim; the hex digits follow as
      // ordinary characters.
      out.push_back('\\');
      out.push_back('u');
      break;
    default:
      out.push_back('\\');
      out.push_back(c);
      break;
  }
}

}  // namespace

void StreamingToolParser::fail() {
  phase_ = Phase::kSink;
  in_string_ = false;
  escape_ = false;
}

void StreamingToolParser::finish_value() {
  params_[key_] = value_;
  key_.clear();
  value_.clear();
}

bool StreamingToolParser::close_object(std::int64_t token_index,
                                       std::vector<ToolInvocation>& out) {
  depth_ -= 1;
  auto it = params_.find("tool");
  if (it == params_.end() || it->second.empty()) {
    fail();
    return false;
  }
  ToolInvocation inv;
  inv.tool_name = it->second;
  params_.erase(it);
  inv.parameters = std::move(params_);
  params_.clear();
  inv.close_token_index = token_index;
  last_close_index_ = token_index;
  emitted_ += 1;
  out.push_back(std::move(inv));
  phase_ = Phase::kArrayAfterValue;
  return true;
}

std::vector<ToolInvocation> StreamingToolParser::feed(std::string_view chunk,
                                                      std::int64_t token_index) {
  std::vector<ToolInvocation> out;
  if (phase_ == Phase::kSink) return out;
  for (char c : chunk) {
    // A character may need re-processing after an implicit value end.
    while (!consume(c, token_index, out)) {
      if (phase_ == Phase::kSink) break;
    }
    if (phase_ == Phase::kSink) break;
  }
  return out;
}

bool StreamingToolParser::consume(char c, std::int64_t token_index,
                                  std::vector<ToolInvocation>& out) {
  switch (phase_) {
    case Phase::kBeforeArray:
      if (c == '[') {
        phase_ = Phase::kArrayExpectFirst;
        depth_ = 1;
      }
      return true;  // prose before the array is ignored

    case Phase::kArrayExpectFirst:
    case Phase::kArrayExpectObject:
      if (is_ws(c)) return true;
      if (c == '{') {
        depth_ += 1;
        params_.clear();
        phase_ = Phase::kObjExpectFirstKey;
        return true;
      }
      if (c == ']' && phase_ == Phase::kArrayExpectFirst) {
        depth_ -= 1;
        phase_ = Phase::kAfterArray;
        return true;
      }
      fail();
      return true;

    case Phase::kArrayAfterValue:
      if (is_ws(c)) return true;
      if (c == ',') {
        phase_ = Phase::kArrayExpectObject;
        return true;
      }
      if (c == ']') {
        depth_ -= 1;
        phase_ = Phase::kAfterArray;
        return true;
      }
      fail();
      return true;

    case Phase::kObjExpectFirstKey:
    case Phase::kObjExpectKey:
      if (is_ws(c)) return true;
      if (c == '"') {
        in_string_ = true;
        key_.clear();
        phase_ = Phase::kObjKey;
        return true;
      }
      if (c == '}' && phase_ == Phase::kObjExpectFirstKey) {
        // An empty object has no tool name.
        close_object(token_index, out);
        return true;
      }
      fail();
      return true;

    case Phase::kObjKey:
      if (escape_) {
        append_escape(key_, c);
        escape_ = false;
        return true;
      }
      if (c == '\\') {
        escape_ = true;
        return true;
      }
      if (c == '"') {
        in_string_ = false;
        phase_ = Phase::kObjExpectColon;
        return true;
      }
      key_.push_back(c);
      return true;

    case Phase::kObjExpectColon:
      if (is_ws(c)) return true;
      if (c == ':') {
        phase_ = Phase::kObjExpectValue;
        return true;
      }
      fail();
      return true;

    case Phase::kObjExpectValue:
      if (is_ws(c)) return true;
      if (c == '"') {
        in_string_ = true;
        value_.clear();
        phase_ = Phase::kObjValueString;
        return true;
      }
      if (c == '{' || c == '[') {
        value_.clear();
        value_.push_back(c);
        nested_depth_ = 1;
        nested_in_string_ = false;
        nested_escape_ = false;
        depth_ += 1;
        phase_ = Phase::kObjValueNested;
        return true;
      }
      if (c == '}' || c == ']' || c == ',') {
        fail();
        return true;
      }
      value_.clear();
      value_.push_back(c);
      phase_ = Phase::kObjValueRaw;
      return true;

    case Phase::kObjValueString:
      if (escape_) {
        append_escape(value_, c);
        escape_ = false;
        return true;
      }
      if (c == '\\') {
        escape_ = true;
        return true;
      }
      if (c == '"') {
        in_string_ = false;
        finish_value();
        phase_ = Phase::kObjAfterValue;
        return true;
      }
      value_.push_back(c);
      return true;

    case Phase::kObjValueRaw:
      if (is_ws(c) || c == ',' || c == '}') {
        finish_value();
        phase_ = Phase::kObjAfterValue;
        // ',' and '}' belong to the enclosing object.
        return is_ws(c);
      }
      if (c == ']' || c == '{' || c == '[') {
        fail();
        return true;
      }
      value_.push_back(c);
      return true;

    case Phase::kObjValueNested:
      value_.push_back(c);
      if (nested_in_string_) {
        if (nested_escape_) {
          nested_escape_ = false;
        } else if (c == '\\') {
          nested_escape_ = true;
        } else if (c == '"') {
          nested_in_string_ = false;
        }
        return true;
      }
      if (c == '"') {
        nested_in_string_ = true;
        return true;
      }
      if (c == '{' || c == '[') {
        nested_depth_ += 1;
        depth_ += 1;
        return true;
      }
      if (c == '}' || c == ']') {
        nested_depth_ -= 1;
        depth_ -= 1;
        if (nested_depth_ == 0) {
          finish_value();
          phase_ = Phase::kObjAfterValue;
        }
        return true;
      }
      return true;

    case Phase::kObjAfterValue:
      if (is_ws(c)) return true;
      if (c == ',') {
        phase_ = Phase::kObjExpectKey;
        return true;
      }
      if (c == '}') {
        close_object(token_index, out);
        return true;
      }
      fail();
      return true;

    case Phase::kAfterArray:
      return true;  // trailing prose is ignored

    case Phase::kSink:
      return true;
  }
  return true;
}

StreamVerdict StreamingToolParser::finish() const {
  if (phase_ == Phase::kSink) return StreamVerdict::kMalformed;
  if (phase_ == Phase::kAfterArray) return StreamVerdict::kComplete;
  return StreamVerdict::kIncomplete;
}

BatchParseResult batch_parse_tool_calls(std::string_view text) {
  StreamingToolParser parser;
  BatchParseResult result;
  result.invocations = parser.feed(text, 0);
  result.verdict = parser.finish();
  return result;
}

}  // namespace agentsim
