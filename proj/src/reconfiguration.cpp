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

#include "thunderbolt/reconfiguration.hpp"

#include <algorithm>

namespace thunderbolt {

ShardAssignment ShardAssignment::identity(uint32_t n, DagId dag) {
  ShardAssignment a;
  a.dag = dag;
  for (uint32_t i = 0; i < n; ++i) a.proposer_of.push_back(i);
  return a;
}

ShardId ShardAssignment::shard_of(ReplicaId r) const {
  for (ShardId s = 0; s < proposer_of.size(); ++s) {
    if (proposer_of[s] == r) return s;
  }
  throw ProtocolMisuse("replica " + std::to_string(r) + " holds no shard");
}

bool ShardAssignment::is_bijection() const {
  std::vector<ReplicaId> sorted = proposer_of;
  std::sort(sorted.begin(), sorted.end());
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] != i) return false;
  }
  return true;
}

std::string ShardAssignment::to_string() const {
  std::string out;
  for (size_t s = 0; s < proposer_of.size(); ++s) {
    if (s) out += ",";
    out += std::to_string(proposer_of[s]);
  }
  return out;
}

ShardAssignment next_assignment(const ShardAssignment& current) {
  ShardAssignment next = current;
  const auto n = static_cast<ReplicaId>(current.proposer_of.size());
  for (auto& r : next.proposer_of) r = (r + 1) % n;
  next.dag = current.dag + 1;
  return next;
}

std::string_view to_string(ShiftReason r) {
  switch (r) {
    case ShiftReason::kSilentShard: return "silent";
    case ShiftReason::kRotationPeriod: return "period";
    case ShiftReason::kPeerShifts: return "peers";
  }
  return "?";
}

ShiftState::ShiftState(uint32_t n, uint32_t f, Round k, Round k_rotate, ShardId own_shard)
    : n_(n), f_(f), k_(k), k_rotate_(k_rotate), own_(own_shard) {}

void ShiftState::on_proposal(ShardId shard, Round round) { proposals_[shard].insert(round); }

void ShiftState::on_shift(ReplicaId author, Round round) { shifts_[round].insert(author); }

std::optional<ShiftDecision> ShiftState::maybe_emit_shift(Round r) {
  if (sent_) return std::nullopt;
  std::optional<ShiftDecision> out;
  if (r >= 1) {
    auto it = shifts_.find(r - 1);
    if (it != shifts_.end() && it->second.size() >= f_ + 1) out = ShiftDecision{ShiftReason::kPeerShifts, std::nullopt};
  }
  if (!out && k_ > 0 && r >= k_) {
    for (ShardId s = 0; s < n_ && !out; ++s) {
      if (s == own_) continue;
      auto it = proposals_.find(s);
      bool heard = false;
      if (it != proposals_.end()) {
        auto lo = it->second.lower_bound(r - k_);
        heard = lo != it->second.end() && *lo <= r - 1;
      }
      if (!heard) out = ShiftDecision{ShiftReason::kSilentShard, s};
    }
  }
  if (!out && r >= k_rotate_) out = ShiftDecision{ShiftReason::kRotationPeriod, std::nullopt};
  if (out) sent_ = true;
  return out;
}

std::optional<Round> ShiftState::detect_ending_round(const CommittedLeader& batch) {
  if (ending_) return std::nullopt;
  for (const auto& b : batch.blocks) {
    if (b->kind == BlockKind::kShift) committed_shift_authors_.insert(b->author);
  }
  if (committed_shift_authors_.size() >= 2 * f_ + 1) {
    ending_ = batch.leader->round;
    return ending_;
  }
  return std::nullopt;
}

}  // namespace thunderbolt
