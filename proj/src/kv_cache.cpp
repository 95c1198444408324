// Copyright 2026 The agentsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "agentsim/kv_cache.hpp"

#include <algorithm>
#include <sstream>

namespace agentsim {

const char* to_string(KvTag tag) {
  switch (tag) {
    case KvTag::kResponse: return "response";
    case KvTag::kToolOutput: return "tool_output";
    case KvTag::kUserQuery: return "user_query";
    case KvTag::kSystemPrompt: return "system_prompt";
    case KvTag::kPartialPrefill: return "partial_prefill";
    case KvTag::kHistory: return "history";
  }
  return "unknown";
}

int eviction_tier(KvTag tag) {
  switch (tag) {
    case KvTag::kResponse: return 0;
    case KvTag::kToolOutput: return 1;
    case KvTag::kUserQuery: return 2;
    case KvTag::kHistory: return 2;  // no separate tier for history
    case KvTag::kSystemPrompt: return 3;
    case KvTag::kPartialPrefill: return 4;
  }
  return 0;
}

std::uint64_t kv_root_hash() { return 0x6b76726f6f740001ULL; }

std::uint64_t kv_chain_hash(std::uint64_t parent_hash, std::span<const TokenId> block_tokens) {
  std::uint64_t h = parent_hash;
  for (TokenId t : block_tokens) h = hash_combine(h, t);
  return h;
}

KvCache::KvCache(const CacheConfig& config) : config_(config) {
  if (config_.block_size < 1) throw ConfigError("cache block_size must be >= 1");
  if (config_.capacity_blocks < 1) throw ConfigError("cache capacity_blocks must be >= 1");
  for (std::int64_t i = 0; i < config_.capacity_blocks; ++i) {
    free_ids_.insert(static_cast<std::int32_t>(i));
  }
}

const KvBlock& KvCache::block(std::int32_t id) const {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw UnknownBlock("block " + std::to_string(id) + " not resident");
  return it->second;
}

KvBlock& KvCache::block_mut(std::int32_t id) {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw UnknownBlock("block " + std::to_string(id) + " not resident");
  return it->second;
}

std::int32_t KvCache::alloc_block_id() {
  auto it = free_ids_.begin();
  std::int32_t id = *it;
  free_ids_.erase(it);
  return id;
}

std::int32_t KvCache::find_chain_block(std::uint64_t chain_hash, std::uint64_t parent_hash,
                                       std::span<const TokenId> tokens) const {
  auto it = by_hash_.find(chain_hash);
  if (it == by_hash_.end()) return -1;
  for (std::int32_t id : it->second) {
    const KvBlock& b = blocks_.at(id);
    // Full-token compare on hash match.
    if (b.parent_hash == parent_hash && b.tokens.size() == tokens.size() &&
        std::equal(b.tokens.begin(), b.tokens.end(), tokens.begin())) {
      return id;
    }
  }
  return -1;
}

std::int64_t KvCache::lookup_prefix(std::span<const TokenId> tokens, SimTime now) {
  const auto bs = static_cast<std::size_t>(config_.block_size);
  std::uint64_t parent = kv_root_hash();
  std::int64_t hit_tokens = 0;
  std::vector<std::int32_t> hits;
  for (std::size_t pos = 0; pos + bs <= tokens.size(); pos += bs) {
    auto span = tokens.subspan(pos, bs);
    std::uint64_t h = kv_chain_hash(parent, span);
    std::int32_t id = find_chain_block(h, parent, span);
    if (id < 0) break;
    hits.push_back(id);
    parent = h;
    hit_tokens += config_.block_size;
  }
  for (std::int32_t id : hits) blocks_.at(id).last_used = now;
  return hit_tokens;
}

std::vector<std::int32_t> KvCache::insert(std::span<const TokenId> tokens,
                                          std::span<const TagRange> tags, SimTime now) {
  // Tags must cover [0, len) without gaps or overlap.
  std::int64_t covered = 0;
  for (const TagRange& r : tags) {
    if (r.begin != covered || r.end < r.begin) {
      throw CacheError("insert: tag ranges must cover the token range without gaps");
    }
    covered = r.end;
  }
  if (covered != static_cast<std::int64_t>(tokens.size())) {
    throw CacheError("insert: tag ranges must cover the full token range");
  }
  if (tokens.empty()) return {};

  auto tag_at = [&](std::int64_t pos) {
    for (const TagRange& r : tags) {
      if (pos >= r.begin && pos < r.end) return r.tag;
    }
    return tags.empty() ? KvTag::kResponse : tags.back().tag;
  };

  const auto bs = static_cast<std::size_t>(config_.block_size);
  std::vector<std::int32_t> chain;
  std::vector<std::int32_t> new_blocks;
  std::uint64_t parent = kv_root_hash();

  auto rollback = [&]() {
    for (std::int32_t id : chain) {
      KvBlock& b = blocks_.at(id);
      b.ref_count -= 1;
    }
    for (std::int32_t id : new_blocks) remove_block(id);
  };

  for (std::size_t pos = 0; pos < tokens.size(); pos += bs) {
    const std::size_t len = std::min(bs, tokens.size() - pos);
    auto span = tokens.subspan(pos, len);
    std::uint64_t h = kv_chain_hash(parent, span);
    std::int32_t id = find_chain_block(h, parent, span);
    if (id >= 0) {
      KvBlock& b = blocks_.at(id);
      b.ref_count += 1;
      b.last_used = now;
    } else {
      if (free_ids_.empty()) {
        evict(1);
        if (free_ids_.empty()) {
          rollback();
          throw CacheFull("insert: cannot free a block (" + std::to_string(resident_blocks()) +
                          " resident, all pinned or referenced)");
        }
      }
      id = alloc_block_id();
      KvBlock b;
      b.block_id = id;
      b.chain_hash = h;
      b.parent_hash = parent;
      b.tag = tag_at(static_cast<std::int64_t>(pos));
      b.tier = eviction_tier(b.tag);
      b.ref_count = 1;
      b.last_used = now;
      b.pinned = false;
      b.tokens.assign(span.begin(), span.end());
      blocks_.emplace(id, std::move(b));
      by_hash_[h].push_back(id);
      new_blocks.push_back(id);
    }
    chain.push_back(id);
    parent = h;
  }
  return chain;
}

std::vector<std::int32_t> KvCache::evict(std::size_t needed) {
  std::vector<const KvBlock*> candidates;
  candidates.reserve(blocks_.size());
  for (const auto& [id, b] : blocks_) {
    if (!b.pinned && b.ref_count == 0) candidates.push_back(&b);
  }
  const bool tiered = config_.policy == EvictionPolicy::kTiered;
  std::sort(candidates.begin(), candidates.end(), [&](const KvBlock* a, const KvBlock* b) {
    if (tiered && a->tier != b->tier) return a->tier < b->tier;
    if (a->last_used != b->last_used) return a->last_used < b->last_used;
    return a->block_id < b->block_id;
  });
  std::vector<std::int32_t> evicted;
  for (const KvBlock* b : candidates) {
    if (evicted.size() >= needed) break;
    evicted.push_back(b->block_id);
  }
  for (std::int32_t id : evicted) remove_block(id);
  total_evicted_ += evicted.size();
  return evicted;
}

void KvCache::remove_block(std::int32_t id) {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) return;
  auto& bucket = by_hash_[it->second.chain_hash];
  bucket.erase(std::remove(bucket.begin(), bucket.end(), id), bucket.end());
  if (bucket.empty()) by_hash_.erase(it->second.chain_hash);
  blocks_.erase(it);
  free_ids_.insert(id);
}

void KvCache::set_reuse_priority(std::span<const std::int32_t> ids, const PriorityUpdate& update) {
  // Validate residency first so the update is all-or-nothing.
  for (std::int32_t id : ids) block(id);
  for (std::int32_t id : ids) {
    KvBlock& b = block_mut(id);
    if (update.pinned) b.pinned = *update.pinned;
    if (update.tier_override) {
      b.tag = *update.tier_override;
      b.tier = eviction_tier(b.tag);
    }
  }
}

void KvCache::set_tag(std::int32_t id, KvTag tag) {
  KvBlock& b = block_mut(id);
  b.tag = tag;
  b.tier = eviction_tier(tag);
}

void KvCache::release(std::span<const std::int32_t> ids) {
  for (std::int32_t id : ids) {
    const KvBlock& b = block(id);
    if (b.ref_count < 1) {
      throw ZeroRefRelease("release of block " + std::to_string(id) + " with ref_count 0");
    }
  }
  for (std::int32_t id : ids) block_mut(id).ref_count -= 1;
}

void KvCache::touch(std::span<const std::int32_t> ids, SimTime now) {
  for (std::int32_t id : ids) block_mut(id).last_used = now;
}

void KvCache::audit() const {
  if (blocks_.size() > capacity_blocks()) {
    throw CacheError("audit: resident blocks exceed capacity");
  }
  if (blocks_.size() + free_ids_.size() != capacity_blocks()) {
    throw CacheError("audit: block accounting mismatch");
  }
  std::size_t indexed = 0;
  for (const auto& [hash, bucket] : by_hash_) {
    for (std::int32_t id : bucket) {
      const auto it = blocks_.find(id);
      if (it == blocks_.end() || it->second.chain_hash != hash) {
        throw CacheError("audit: hash index out of sync");
      }
      ++indexed;
    }
  }
  if (indexed != blocks_.size()) throw CacheError("audit: hash index size mismatch");
  for (const auto& [id, b] : blocks_) {
    if (b.ref_count < 0) throw CacheError("audit: negative ref_count");
    if (b.tokens.empty() || b.tokens.size() > static_cast<std::size_t>(config_.block_size)) {
      throw CacheError("audit: bad block token count");
    }
  }
}

std::string KvCache::dump() const {
  std::vector<std::int32_t> ids;
  ids.reserve(blocks_.size());
  for (const auto& [id, b] : blocks_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  std::ostringstream out;
  for (std::int32_t id : ids) {
    const KvBlock& b = blocks_.at(id);
    out << "block=" << id << " tag=" << to_string(b.tag) << " tier=" << b.tier
        << " ref=" << b.ref_count << " pinned=" << (b.pinned ? 1 : 0)
        << " last_used=" << b.last_used << " tokens=" << b.tokens.size() << '\n';
  }
  return out.str();
}

}  // namespace agentsim
