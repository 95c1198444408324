// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "agentsim/common.hpp"

namespace agentsim {

// Semantic tag carried by each cached block. The eviction tier is derived
// from the tag: blocks are evicted in ascending tier order, LRU within a
// tier.
enum class KvTag {
  kResponse,
  kToolOutput,
  kUserQuery,
  kSystemPrompt,
  kPartialPrefill,
  kHistory,
};

const char* to_string(KvTag tag);

// Eviction order (evicted first -> last):
// RESPONSE < TOOL_OUTPUT < USER_QUERY (= HISTORY) < SYSTEM_PROMPT < PARTIAL_PREFILL.
int eviction_tier(KvTag tag);

enum class EvictionPolicy { kLru, kTiered };

struct CacheConfig {
  std::int64_t block_size{16};
  std::int64_t capacity_blocks{4096};
  EvictionPolicy policy{EvictionPolicy::kLru};
};

// Half-open token range [begin, end) with a semantic tag.
struct TagRange {
  std::int64_t begin{0};
  std::int64_t end{0};
  KvTag tag{KvTag::kResponse};
};

struct KvBlock {
  std::int32_t block_id{0};
  std::uint64_t chain_hash{0};   // hash of all tokens up to and including this block
  std::uint64_t parent_hash{0};  // chain hash of the previous block (root constant at depth 0)
  KvTag tag{KvTag::kResponse};
  int tier{0};
  int ref_count{0};
  SimTime last_used{0};
  bool pinned{false};
  std::vector<TokenId> tokens;
};

struct PriorityUpdate {
  std::optional<bool> pinned;
  std::optional<KvTag> tier_override;  // sets both tag and tier
};

// Paged, prefix-indexed KV cache model. Mutated only from the simulation
// loop; no locking.
class KvCache {
 public:
  explicit KvCache(const CacheConfig& config);

  const CacheConfig& config() const { return config_; }

  // Largest multiple of block_size whose chain hashes are all resident.
  // Touches last_used on every hit block.
  std::int64_t lookup_prefix(std::span<const TokenId> tokens, SimTime now);

  // Inserts the full chain for `tokens`; shared prefixes are deduplicated
  // (ref_count incremented), new blocks allocated for the remainder. Each new
  // block takes the tag of its first token's range. Returns the full chain of
  // block ids, every one of which holds one reference for the caller.
  // Throws CacheFull when eviction cannot free enough blocks.
  std::vector<std::int32_t> insert(std::span<const TokenId> tokens,
                                   std::span<const TagRange> tags, SimTime now);

  // Frees up to `needed` unpinned, ref-zero blocks. Tiered policy orders by
  // (tier, last_used, block_id); LRU by (last_used, block_id). A short return
  // signals shortfall.
  std::vector<std::int32_t> evict(std::size_t needed);

  void set_reuse_priority(std::span<const std::int32_t> ids, const PriorityUpdate& update);
  void set_tag(std::int32_t id, KvTag tag);

  // Decrements ref_count; blocks stay cached until evicted.
  void release(std::span<const std::int32_t> ids);

  void touch(std::span<const std::int32_t> ids, SimTime now);

  std::size_t resident_blocks() const { return blocks_.size(); }
  std::size_t capacity_blocks() const { return static_cast<std::size_t>(config_.capacity_blocks); }
  std::size_t free_blocks() const { return capacity_blocks() - resident_blocks(); }
  std::uint64_t total_evicted() const { return total_evicted_; }

  bool contains(std::int32_t id) const { return blocks_.count(id) > 0; }
  const KvBlock& block(std::int32_t id) const;

  // Structural self-check; throws CacheError on violation.
  void audit() const;

  // Per-block audit dump: id, tag, tier, ref_count, pinned, last_used.
  std::string dump() const;

 private:
  KvBlock& block_mut(std::int32_t id);
  std::int32_t alloc_block_id();
  // Finds a resident block matching (chain_hash, parent_hash, tokens).
  std::int32_t find_chain_block(std::uint64_t chain_hash, std::uint64_t parent_hash,
                                std::span<const TokenId> tokens) const;
  void remove_block(std::int32_t id);

  CacheConfig config_;
  std::unordered_map<std::int32_t, KvBlock> blocks_;
  std::unordered_map<std::uint64_t, std::vector<std::int32_t>> by_hash_;
  std::set<std::int32_t> free_ids_;
  std::uint64_t total_evicted_{0};
};

// Chain hash helpers (exposed for tests).
std::uint64_t kv_root_hash();
std::uint64_t kv_chain_hash(std::uint64_t parent_hash, std::span<const TokenId> block_tokens);

}  // namespace agentsim
