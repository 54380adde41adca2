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
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "thunderbolt/core.hpp"
#include "thunderbolt/procedure.hpp"

namespace thunderbolt {

enum class BlockKind { kNormal, kSkip, kShift, kCrossOnly };

std::string_view to_string(BlockKind k);

struct Block {
  ShardId proposer = 0;   // shard the block is proposed for
  ReplicaId author = 0;   // replica holding that shard in this DAG
  Round round = 0;
  DagId dag = 0;
  BlockKind kind = BlockKind::kNormal;
  std::optional<PreplayResult> single_payload;  // kNormal only
  std::vector<CrossItem> cross_payload;
  std::vector<Digest> parents;  // sorted
  // Number of cross-shard transactions touching `proposer` that were
  // applied in the preplay base.
  uint64_t base_crosses = 0;
  Digest digest = 0;

  // Recomputes `digest` from the header and payload.
  void seal();
  size_t tx_count() const;
};

using BlockPtr = std::shared_ptr<const Block>;

struct Certificate {
  Digest block = 0;
  Round round = 0;
  ShardId proposer = 0;
  DagId dag = 0;
  std::set<ReplicaId> voters;
};

// A leader commit: the leader vertex and its newly ordered causal history
// (leader last).
struct CommittedLeader {
  BlockPtr leader;
  std::vector<BlockPtr> blocks;
};

enum class InsertResult { kInserted, kBuffered, kDuplicate, kRejected };

// One replica's view of one DAG instance. Not thread-safe; the owning
// replica's event handler serializes all calls.
class DagStore {
 public:
  DagStore(DagId dag, uint32_t n, uint32_t f, uint32_t leader_offset = 0);

  DagId dag() const { return dag_; }
  uint32_t quorum() const { return 2 * f_ + 1; }

  // Stores a vertex once all parents are stored; earlier arrivals wait in a
  // pending buffer. Rejects malformed vertices (wrong DAG, too few parents,
  // parents from another round, a second vertex for a (proposer, round)).
  // `inserted`, when given, receives every vertex stored by this call,
  // including buffered ones released by it.
  InsertResult insert(BlockPtr block, std::vector<BlockPtr>* inserted = nullptr);

  bool has(Digest d) const { return blocks_.count(d) > 0; }
  BlockPtr get(Digest d) const;
  BlockPtr vertex(ShardId proposer, Round round) const;
  std::vector<BlockPtr> round_vertices(Round round) const;

  // Records a vote; returns the certificate the first time the quorum of
  // distinct voters is reached. Duplicate voters are ignored.
  std::optional<Certificate> add_vote(Digest block, ReplicaId voter);
  void add_certificate(const Certificate& cert);
  bool certified(Digest d) const { return certified_.count(d) > 0; }
  // Digests of certified vertices of a round, sorted by proposer.
  std::vector<Digest> certified_in_round(Round round) const;

  // Parents for a new vertex of `proposer` at `round`, or nullopt when fewer
  // than 2f+1 round-1 certificates are known or the proposer's own previous
  // vertex is not certified.
  std::optional<std::vector<Digest>> parents_for(ShardId proposer, Round round) const;

  // Throws ProtocolMisuse on a round without leader (even rounds).
  ShardId leader_of(Round round) const;
  static bool is_leader_round(Round round) { return round % 2 == 1; }

  // Commits every leader that became committable, together with earlier
  // uncommitted leaders it reaches, and returns them in commit order.
  std::vector<CommittedLeader> try_commit();
  // Direct commit rule for the leader of `round`.
  bool leader_committable(Round round) const;
  bool leader_committed(Round round) const { return committed_leaders_.count(round) > 0; }
  std::optional<Round> last_committed_leader() const { return last_committed_; }

  bool in_history(Digest ancestor, Digest of) const;
  std::vector<BlockPtr> causal_history(Digest of) const;
  // Causal history without the committed part, sorted by (round, proposer).
  std::vector<BlockPtr> uncommitted_history(Digest of) const;
  bool committed(Digest d) const { return committed_.count(d) > 0; }

  const std::vector<BlockPtr>& total_order() const { return order_; }
  Round highest_round() const { return highest_round_; }
  size_t pending_count() const { return pending_.size(); }

  // "round proposer kind parents..." per vertex, sorted by (round, proposer).
  std::string dump() const;

 private:
  bool try_insert(const BlockPtr& block, InsertResult* why);
  std::vector<BlockPtr> order_history(const BlockPtr& leader);

  DagId dag_;
  uint32_t n_, f_, offset_;
  std::unordered_map<Digest, BlockPtr> blocks_;
  std::map<std::pair<Round, ShardId>, BlockPtr> by_slot_;
  std::unordered_map<Digest, std::set<ReplicaId>> votes_;
  std::unordered_set<Digest> certified_;
  std::vector<BlockPtr> pending_;
  std::unordered_set<Digest> committed_;
  std::set<Round> committed_leaders_;
  std::optional<Round> last_committed_;
  std::vector<BlockPtr> order_;
  Round highest_round_ = 0;
};

}  // namespace thunderbolt
