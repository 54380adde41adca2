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

#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "thunderbolt/core.hpp"
#include "thunderbolt/dependency_graph.hpp"
#include "thunderbolt/procedure.hpp"

namespace thunderbolt {

enum class ExecutorDriver {
  // W OS threads against the shared graph.
  kThreaded,
  // W logical executors stepped one operation at a time on the calling
  // thread. The step order comes from `script`, then from a seeded RNG.
  kInterleaved,
};

struct ExecutorOptions {
  uint32_t workers = 1;
  ExecutorDriver driver = ExecutorDriver::kInterleaved;
  uint64_t seed = 0;
  // Executor index per step for the interleaved driver.
  std::vector<uint32_t> script;
  // An attempt that has been aborted this many times runs alone.
  uint32_t exclusive_after = 10;
  // Threaded driver only: sleep before every operation to model contract cost.
  std::chrono::microseconds op_delay{0};
  // When set, every touched key must map to `shard` under `n_shards`.
  std::optional<ShardId> shard;
  uint32_t n_shards = 1;
  DependencyGraphOptions graph;
};

// One step of the interleaved driver, for tracing.
struct ExecutorStep {
  uint32_t executor = 0;
  TxId tx;
  enum class Kind { kRead, kWrite, kFinalize, kAbortNoticed } kind = Kind::kRead;
  Key key;
  std::optional<Value> value;  // read result or written value
  FinalizeOutcome::Kind outcome = FinalizeOutcome::Kind::kPending;
};

class ConcurrentExecutor {
 public:
  explicit ConcurrentExecutor(ExecutorOptions options);

  // Runs every transaction to commit and returns the serial schedule.
  // Throws MisroutedTransaction when a transaction is not single-shard for
  // the configured shard or touches a foreign key.
  PreplayResult preplay_batch(std::span<const TxPtr> txs, const StateView& snapshot,
                              uint64_t batch_id);

  // Total aborted attempts of a finished batch. Throws ProtocolMisuse for an
  // unknown batch id.
  uint64_t reexecution_count(uint64_t batch_id) const;

  // Steps taken by the last interleaved batch.
  const std::vector<ExecutorStep>& trace() const { return trace_; }
  // Abort sets reported by the graph during the last batch.
  const std::vector<std::vector<TxId>>& last_abort_log() const { return last_abort_log_; }

  const ExecutorOptions& options() const { return options_; }
  // Retargets the routing check after a shard reassignment.
  void set_shard(std::optional<ShardId> shard) { options_.shard = shard; }

 private:
  void check_routing(const Transaction& tx) const;
  void run_interleaved(std::span<const TxPtr> txs, DependencyGraph& graph);
  void run_threaded(std::span<const TxPtr> txs, DependencyGraph& graph);

  ExecutorOptions options_;
  std::vector<ExecutorStep> trace_;
  std::vector<std::vector<TxId>> last_abort_log_;
  mutable std::mutex registry_mu_;
  std::map<uint64_t, uint64_t> reexecutions_;
};

}  // namespace thunderbolt
