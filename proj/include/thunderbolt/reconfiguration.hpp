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

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "thunderbolt/core.hpp"
#include "thunderbolt/dag.hpp"

namespace thunderbolt {

// Shard -> replica map of one DAG instance.
struct ShardAssignment {
  DagId dag = 1;
  std::vector<ReplicaId> proposer_of;

  static ShardAssignment identity(uint32_t n, DagId dag = 1);
  ShardId shard_of(ReplicaId r) const;
  bool is_bijection() const;
  std::string to_string() const;  // "r0,r1,..." indexed by shard
  bool operator==(const ShardAssignment&) const = default;
};

// Every shard moves to the next replica (mod n) and the DAG id increments.
ShardAssignment next_assignment(const ShardAssignment& current);

enum class ShiftReason { kSilentShard, kRotationPeriod, kPeerShifts };

std::string_view to_string(ShiftReason r);

struct ShiftDecision {
  ShiftReason reason;
  std::optional<ShardId> silent_shard;
};

// Per-replica Shift bookkeeping for the current DAG.
class ShiftState {
 public:
  ShiftState(uint32_t n, uint32_t f, Round k, Round k_rotate, ShardId own_shard);

  // A proposal message (not a certificate) from `shard` for `round` arrived.
  void on_proposal(ShardId shard, Round round);
  // A Shift vertex authored by `author` at `round` is known.
  void on_shift(ReplicaId author, Round round);

  // Whether to make the round-r proposal a Shift block. At most one Shift is
  // sent per DAG; a positive decision marks it sent.
  std::optional<ShiftDecision> maybe_emit_shift(Round r);
  bool shift_sent() const { return sent_; }

  // Folds one committed leader batch in. Returns the leader round the first
  // time the committed Shift authors reach 2f+1.
  std::optional<Round> detect_ending_round(const CommittedLeader& batch);
  std::optional<Round> ending_round() const { return ending_; }

 private:
  uint32_t n_, f_;
  Round k_, k_rotate_;
  ShardId own_;
  bool sent_ = false;
  std::map<ShardId, std::set<Round>> proposals_;
  std::map<Round, std::set<ReplicaId>> shifts_;
  std::set<ReplicaId> committed_shift_authors_;
  std::optional<Round> ending_;
};

}  // namespace thunderbolt
