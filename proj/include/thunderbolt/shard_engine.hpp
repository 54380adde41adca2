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

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "thunderbolt/core.hpp"
#include "thunderbolt/dag.hpp"
#include "thunderbolt/executor.hpp"
#include "thunderbolt/procedure.hpp"

namespace thunderbolt {

// What a proposer does with queued single-shard transactions when an
// unfinalized cross-shard transaction on its shard is pending.
enum class ConflictPolicy {
  kSkip,     // propose Skip blocks until the blocking leaders are finalized
  kConvert,  // convert the queued transactions to cross-shard ones
};

struct EngineOptions {
  uint32_t n = 4;
  uint32_t f = 1;
  uint32_t batch = 300;
  ConflictPolicy policy = ConflictPolicy::kConvert;
  // Every transaction is ordered first and executed serially after commit.
  bool serial = false;
  uint32_t apply_workers = 1;
};

struct ValidationResult {
  bool valid = true;
  std::string reason;
  uint64_t levels = 0;  // critical path of the per-key dependency levels
};

// Re-executes a Normal block's declared schedule against `state` and checks
// every recorded read (value and source), write and result.
ValidationResult validate_block(const Block& block, const StateView& state, uint32_t n_shards,
                                uint32_t workers = 1);

struct CrossExecution {
  std::vector<TxEffects> effects;  // in input order
  uint64_t levels = 0;
};

// Executes cross-shard transactions level by level over their SIDs. The
// resulting state equals serial execution in input order.
CrossExecution execute_cross_batch(std::span<const TxPtr> txs, KvState& state, uint32_t workers = 1);

// An unfinalized cross-shard transaction that touches the local shard.
struct PendingCross {
  TxPtr tx;
  std::optional<Round> leader_round;  // nullopt: deferred by an earlier commit
};

struct Proposal {
  Block block;  // header and payload; parents and digest are filled by the caller
  uint64_t executions = 0;
  uint64_t reexecutions = 0;
  std::vector<std::string> log;
};

struct ApplyReport {
  std::vector<std::string> log;
  std::vector<TxPtr> applied;  // in application order
  uint64_t validation_levels = 0;
  uint64_t cross_levels = 0;
  uint64_t serial_executions = 0;
  uint64_t invalid_blocks = 0;
  uint64_t deferred = 0;
  uint64_t audit_mismatches = 0;
};

class ShardEngine {
 public:
  ShardEngine(EngineOptions options, ReplicaId self, ShardId shard, KvState genesis,
              ExecutorOptions executor);

  // Queues a client transaction. Returns false for transactions already
  // queued, in flight or applied.
  bool enqueue(TxPtr tx);
  size_t queued() const { return queue_.size(); }
  bool has_queued_singles() const;
  ShardId shard() const { return shard_; }

  // Starts a new DAG instance for `shard`. Queued, in-flight and deferred
  // transactions are dropped; clients retransmit them.
  void start_dag(ShardId shard);

  // Leader round whose vertex a round-r proposal depends on.
  static std::optional<Round> guiding_leader_round(Round r);

  // Cross-shard transactions on this shard that are committed-but-deferred
  // or sit in the uncommitted history of a known leader up to the guiding
  // leader round of `r`.
  std::vector<PendingCross> conflict_set(const DagStore& dag, Round r) const;

  // True when the round-r proposal has singles to preplay and the guiding
  // leader's vertex, proposed by another shard, is still missing.
  bool must_wait_for_leader(const DagStore& dag, Round r) const;

  // True when every leader that blocks preplay at round r is finalized: 2f+1
  // vertices of the next round are known and f+1 of them reference it.
  bool recover_preplay(const DagStore& dag, Round r) const;

  // Builds this replica's round-r block. `leader_timed_out` applies the
  // timeout conversion; `shift` yields an empty Shift block.
  Proposal build_proposal(const DagStore& dag, Round r, bool leader_timed_out, bool shift);

  // Applies one committed leader batch: validated single-shard blocks first,
  // then cross-shard transactions that are not deferred.
  ApplyReport commit_apply(const DagStore& dag, const CommittedLeader& batch);

  const KvState& state() const { return state_; }
  bool applied(TxId id) const { return applied_.count(id) > 0; }
  size_t applied_count() const { return applied_.size(); }
  std::vector<TxId> deferred_ids() const;
  const ConcurrentExecutor& executor() const { return executor_; }

 private:
  struct OwnBlock {
    std::map<Key, Value> writes;
    std::vector<TxId> txs;
  };

  std::vector<TxPtr> take_batch(TxClass cls, size_t limit);
  void release_in_flight(const Block& block);

  EngineOptions options_;
  ReplicaId self_;
  ShardId shard_;
  ConcurrentExecutor executor_;
  KvState state_;
  std::deque<TxPtr> queue_;
  std::unordered_set<TxId, TxIdHash> queued_ids_;
  std::unordered_set<TxId, TxIdHash> in_flight_;
  std::unordered_set<TxId, TxIdHash> applied_;
  std::map<Round, OwnBlock> own_blocks_;
  // Deferred cross-shard transactions with the leader round that deferred them.
  std::vector<std::pair<TxPtr, Round>> deferred_;
  // Applied cross-shard transactions per shard.
  std::vector<uint64_t> cross_count_;
  uint64_t next_batch_id_ = 0;
};

}  // namespace thunderbolt
