// Copyright 2026 The Thunderbolt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "thunderbolt/dag.hpp"

#include <algorithm>
#include <sstream>

namespace thunderbolt {

std::string_view to_string(BlockKind k) {
  switch (k) {
    case BlockKind::kNormal: return "Normal";
    case BlockKind::kSkip: return "Skip";
    case BlockKind::kShift: return "Shift";
    case BlockKind::kCrossOnly: return "CrossOnly";
  }
  return "?";
}

void Block::seal() {
  uint64_t h = stable_hash("block");
  h = hash_combine(h, proposer);
  h = hash_combine(h, author);
  h = hash_combine(h, round);
  h = hash_combine(h, dag);
  h = hash_combine(h, static_cast<uint64_t>(kind));
  for (Digest p : parents) h = hash_combine(h, p);
  if (single_payload) {
    for (const auto& fx : single_payload->schedule) {
      h = hash_combine(h, fx.tx->id.value);
      for (const auto& r : fx.reads) {
        h = hash_combine(h, stable_hash(r.key));
        h = hash_combine(h, static_cast<uint64_t>(r.value));
        h = hash_combine(h, r.source ? r.source->value : 0);
      }
      for (const auto& [k, v] : fx.writes) {
        h = hash_combine(h, stable_hash(k));
        h = hash_combine(h, static_cast<uint64_t>(v));
      }
      h = hash_combine(h, static_cast<uint64_t>(fx.result));
    }
  }
  for (const auto& item : cross_payload) {
    h = hash_combine(h, item.tx->id.value);
    h = hash_combine(h, static_cast<uint64_t>(item.converted_by));
  }
  h = hash_combine(h, base_crosses);
  digest = h;
}

size_t Block::tx_count() const {
  return (single_payload ? single_payload->schedule.size() : 0) + cross_payload.size();
}

DagStore::DagStore(DagId dag, uint32_t n, uint32_t f, uint32_t leader_offset)
    : dag_(dag), n_(n), f_(f), offset_(leader_offset) {
  if (n != 3 * f + 1) throw std::invalid_argument("DagStore requires n = 3f + 1");
}

BlockPtr DagStore::get(Digest d) const {
  auto it = blocks_.find(d);
  return it == blocks_.end() ? nullptr : it->second;
}

BlockPtr DagStore::vertex(ShardId proposer, Round round) const {
  auto it = by_slot_.find({round, proposer});
  return it == by_slot_.end() ? nullptr : it->second;
}

std::vector<BlockPtr> DagStore::round_vertices(Round round) const {
  std::vector<BlockPtr> out;
  for (auto it = by_slot_.lower_bound({round, 0}); it != by_slot_.end() && it->first.first == round; ++it) {
    out.push_back(it->second);
  }
  return out;
}

InsertResult DagStore::insert(BlockPtr block, std::vector<BlockPtr>* inserted) {
  if (blocks_.count(block->digest)) return InsertResult::kDuplicate;
  for (const auto& p : pending_) {
    if (p->digest == block->digest) return InsertResult::kDuplicate;
  }
  InsertResult why = InsertResult::kInserted;
  if (!try_insert(block, &why)) {
    if (why == InsertResult::kBuffered) pending_.push_back(block);
    return why;
  }
  if (inserted) inserted->push_back(block);
  // Drain the buffer until nothing more becomes insertable.
  bool progress = true;
  while (progress) {
    progress = false;
    for (size_t i = 0; i < pending_.size(); ++i) {
      InsertResult r = InsertResult::kInserted;
      BlockPtr b = pending_[i];
      const bool stored = try_insert(b, &r);
      if (stored && inserted) inserted->push_back(b);
      if (stored || r == InsertResult::kRejected || r == InsertResult::kDuplicate) {
        pending_.erase(pending_.begin() + static_cast<std::ptrdiff_t>(i));
        progress = true;
        break;
      }
    }
  }
  return InsertResult::kInserted;
}

bool DagStore::try_insert(const BlockPtr& b, InsertResult* why) {
  if (b->dag != dag_ || b->proposer >= n_) {
    *why = InsertResult::kRejected;
    return false;
  }
  if (auto existing = vertex(b->proposer, b->round)) {
    *why = existing->digest == b->digest ? InsertResult::kDuplicate : InsertResult::kRejected;
    return false;
  }
  if (b->round == 0) {
    if (!b->parents.empty()) {
      *why = InsertResult::kRejected;
      return false;
    }
  } else {
    std::set<Digest> distinct(b->parents.begin(), b->parents.end());
    if (distinct.size() != b->parents.size() || distinct.size() < quorum()) {
      *why = InsertResult::kRejected;
      return false;
    }
    for (Digest p : b->parents) {
      auto parent = get(p);
      if (!parent) {
        *why = InsertResult::kBuffered;
        return false;
      }
      if (parent->round + 1 != b->round) {
        *why = InsertResult::kRejected;
        return false;
      }
    }
    auto own = vertex(b->proposer, b->round - 1);
    if (!own || !distinct.count(own->digest)) {
      *why = InsertResult::kRejected;
      return false;
    }
    // A referenced vertex has a certificate by construction.
    for (Digest p : b->parents) certified_.insert(p);
  }
  blocks_.emplace(b->digest, b);
  by_slot_.emplace(std::make_pair(b->round, b->proposer), b);
  highest_round_ = std::max(highest_round_, b->round);
  *why = InsertResult::kInserted;
  return true;
}

std::optional<Certificate> DagStore::add_vote(Digest block, ReplicaId voter) {
  auto b = get(block);
  if (!b) return std::nullopt;
  auto& voters = votes_[block];
  if (!voters.insert(voter).second) return std::nullopt;
  if (voters.size() != quorum()) return std::nullopt;
  certified_.insert(block);
  return Certificate{block, b->round, b->proposer, dag_, voters};
}

void DagStore::add_certificate(const Certificate& cert) {
  if (cert.dag != dag_ || cert.voters.size() < quorum()) return;
  certified_.insert(cert.block);
}

std::vector<Digest> DagStore::certified_in_round(Round round) const {
  std::vector<Digest> out;
  for (const auto& b : round_vertices(round)) {
    if (certified(b->digest)) out.push_back(b->digest);
  }
  return out;
}

std::optional<std::vector<Digest>> DagStore::parents_for(ShardId proposer, Round round) const {
  if (round == 0) return std::vector<Digest>{};
  auto own = vertex(proposer, round - 1);
  if (!own || !certified(own->digest)) return std::nullopt;
  auto certs = certified_in_round(round - 1);
  if (certs.size() < quorum()) return std::nullopt;
  std::sort(certs.begin(), certs.end());
  return certs;
}

ShardId DagStore::leader_of(Round round) const {
  if (!is_leader_round(round)) {
    throw ProtocolMisuse("round " + std::to_string(round) + " has no leader");
  }
  return static_cast<ShardId>((offset_ + (round - 1) / 2) % n_);
}

bool DagStore::leader_committable(Round round) const {
  if (!is_leader_round(round)) return false;
  auto leader = vertex(leader_of(round), round);
  if (!leader) return false;
  // Only certified vertices count: an uncertified one may never be referenced.
  uint32_t seen = 0, refs = 0;
  for (const auto& v : round_vertices(round + 1)) {
    if (!certified(v->digest)) continue;
    ++seen;
    refs += std::binary_search(v->parents.begin(), v->parents.end(), leader->digest) ? 1 : 0;
  }
  if (seen < quorum()) return false;
  return refs >= f_ + 1;
}

bool DagStore::in_history(Digest ancestor, Digest of) const {
  auto target = get(ancestor);
  auto start = get(of);
  if (!target || !start) return false;
  std::vector<BlockPtr> stack{start};
  std::unordered_set<Digest> seen{of};
  while (!stack.empty()) {
    auto cur = stack.back();
    stack.pop_back();
    if (cur->digest == ancestor) return true;
    if (cur->round <= target->round) continue;
    for (Digest p : cur->parents) {
      if (seen.insert(p).second) stack.push_back(get(p));
    }
  }
  return false;
}

std::vector<BlockPtr> DagStore::causal_history(Digest of) const {
  std::vector<BlockPtr> out;
  auto start = get(of);
  if (!start) return out;
  std::vector<BlockPtr> stack{start};
  std::unordered_set<Digest> seen{of};
  while (!stack.empty()) {
    auto cur = stack.back();
    stack.pop_back();
    out.push_back(cur);
    for (Digest p : cur->parents) {
      if (seen.insert(p).second) stack.push_back(get(p));
    }
  }
  std::sort(out.begin(), out.end(), [](const BlockPtr& a, const BlockPtr& b) {
    return std::tie(a->round, a->proposer) < std::tie(b->round, b->proposer);
  });
  return out;
}

std::vector<BlockPtr> DagStore::uncommitted_history(Digest of) const {
  std::vector<BlockPtr> out;
  auto start = get(of);
  if (!start || committed_.count(of)) return out;
  std::vector<BlockPtr> stack{start};
  std::unordered_set<Digest> seen{of};
  while (!stack.empty()) {
    auto cur = stack.back();
    stack.pop_back();
    out.push_back(cur);
    for (Digest p : cur->parents) {
      if (!committed_.count(p) && seen.insert(p).second) stack.push_back(get(p));
    }
  }
  std::sort(out.begin(), out.end(), [](const BlockPtr& a, const BlockPtr& b) {
    return std::tie(a->round, a->proposer) < std::tie(b->round, b->proposer);
  });
  return out;
}

std::vector<BlockPtr> DagStore::order_history(const BlockPtr& leader) {
  std::vector<BlockPtr> out;
  std::vector<BlockPtr> stack{leader};
  std::unordered_set<Digest> seen{leader->digest};
  while (!stack.empty()) {
    auto cur = stack.back();
    stack.pop_back();
    if (committed_.count(cur->digest)) continue;
    out.push_back(cur);
    for (Digest p : cur->parents) {
      if (seen.insert(p).second) stack.push_back(get(p));
    }
  }
  std::sort(out.begin(), out.end(), [](const BlockPtr& a, const BlockPtr& b) {
    return std::tie(a->round, a->proposer) < std::tie(b->round, b->proposer);
  });
  for (const auto& b : out) {
    committed_.insert(b->digest);
    order_.push_back(b);
  }
  return out;
}

std::vector<CommittedLeader> DagStore::try_commit() {
  std::vector<CommittedLeader> out;
  Round r = last_committed_ ? *last_committed_ + 2 : 1;
  for (; r + 1 <= highest_round_; r += 2) {
    if (!leader_committable(r)) continue;
    // Walk back through earlier leaders reachable from this one.
    std::vector<BlockPtr> chain{vertex(leader_of(r), r)};
    const Round floor = last_committed_ ? *last_committed_ : 0;
    for (Round q = r; q >= 3 && q - 2 > floor; q -= 2) {
      auto earlier = vertex(leader_of(q - 2), q - 2);
      if (earlier && !committed_leaders_.count(q - 2) && in_history(earlier->digest, chain.back()->digest)) {
        chain.push_back(earlier);
      }
    }
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      CommittedLeader cl;
      cl.leader = *it;
      cl.blocks = order_history(*it);
      committed_leaders_.insert((*it)->round);
      out.push_back(std::move(cl));
    }
    last_committed_ = r;
  }
  return out;
}

std::string DagStore::dump() const {
  std::ostringstream os;
  for (const auto& [slot, b] : by_slot_) {
    os << b->round << " " << b->proposer << " " << to_string(b->kind);
    std::vector<std::string> parents;
    for (Digest p : b->parents) {
      auto pb = get(p);
      parents.push_back(std::to_string(pb->round) + ":" + std::to_string(pb->proposer));
    }
    std::sort(parents.begin(), parents.end());
    for (const auto& p : parents) os << " " << p;
    os << "\n";
  }
  return os.str();
}

}  // namespace thunderbolt
