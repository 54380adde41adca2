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

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "thunderbolt/core.hpp"
#include "thunderbolt/procedure.hpp"

namespace thunderbolt {

enum class NodeStatus { kExecuting, kReadyToCommit, kCommitted, kAborted };

std::string_view to_string(NodeStatus s);

// (from, to, key). `from` is nullopt for the root node.
struct GraphEdge {
  std::optional<TxId> from;
  TxId to;
  Key key;
  auto operator<=>(const GraphEdge&) const = default;
};

struct FinalizeOutcome {
  enum class Kind { kCommitted, kPending, kAborted };
  Kind kind = Kind::kPending;
  uint64_t order_index = 0;  // valid for kCommitted
};

struct DependencyGraphOptions {
  // Fault-injection hook: when false, a read does not force the other write
  // nodes on the key to be ordered around the chosen source. Only the fuzzer's
  // mutation test turns this off.
  bool enforce_read_paths = true;
};

// The concurrency controller's dependency graph for one batch.
//
// Nodes are transaction attempts; an edge (u, v, k) orders u before v because
// of key k. Uncommitted values are served straight out of writer nodes, so a
// transaction can read another's write before either commits. Every public
// call is atomic under one mutex.
//
// Invariants maintained after every call:
//  * the graph over live and committed nodes is acyclic;
//  * if v read k from u, every other live writer of k reaches u or is
//    reached from v;
//  * committed nodes never gain incoming edges from live nodes, so
//    committed_order is a topological order.
class DependencyGraph {
 public:
  explicit DependencyGraph(const StateView& snapshot, DependencyGraphOptions options = {});

  DependencyGraph(const DependencyGraph&) = delete;
  DependencyGraph& operator=(const DependencyGraph&) = delete;

  // Starts a new attempt. Throws ProtocolMisuse if the transaction has a
  // live or committed node.
  void begin(TxPtr tx);

  // nullopt means the attempt is aborted and must be re-executed.
  std::optional<Value> read(TxId tx, const Key& key);
  bool write(TxId tx, const Key& key, Value value);

  // Marks the attempt finished. Commits happen as soon as every predecessor
  // has committed, possibly during a later call on another transaction.
  FinalizeOutcome finalize(TxId tx, Value result);

  // Attempts that were aborted after they finalized. Executing attempts
  // learn about their abort from the next read/write/finalize instead.
  std::vector<TxId> take_aborted_waiting();

  // Called under the graph lock whenever a finalized attempt is aborted.
  void set_abort_listener(std::function<void(TxId)> listener);

  // Requires every begun transaction to be committed.
  PreplayResult extract_schedule() const;

  NodeStatus status(TxId tx) const;
  std::vector<TxId> committed_order() const;
  // Edges among live and committed nodes, plus the implicit root edges.
  std::vector<GraphEdge> edges() const;
  // One "(from, to, key)" line per edge, sorted; root prints as "R".
  std::string dump_edges(const std::function<std::string(TxId)>& name = {}) const;
  std::vector<std::vector<TxId>> abort_log() const;
  uint64_t abort_count() const;
  size_t live_count() const;
  size_t committed_count() const;

 private:
  static constexpr uint64_t kRoot = ~uint64_t{0};

  struct KeyRecord {
    std::optional<Value> first_read;
    uint64_t read_source = kRoot;     // node seq, or kRoot
    std::optional<TxId> source_tx;    // writer as reported in the schedule
    std::optional<Value> last_write;
  };

  struct Node {
    TxPtr tx;
    uint64_t seq = 0;
    NodeStatus status = NodeStatus::kExecuting;
    std::map<Key, KeyRecord> records;
    std::map<uint64_t, std::set<Key>> out;
    std::map<uint64_t, std::set<Key>> in;
    Value result = 0;
    uint64_t order_index = 0;
  };

  struct UndoEdge {
    uint64_t from, to;
    Key key;
  };

  Node* live_node(TxId tx);
  bool is_live(uint64_t seq) const;
  bool reaches(uint64_t from, uint64_t to) const;
  std::set<uint64_t> reachable_from(const std::set<uint64_t>& starts) const;
  void add_edge(uint64_t from, uint64_t to, const Key& key, std::vector<UndoEdge>* undo);
  void remove_edge(uint64_t from, uint64_t to, const Key& key);
  bool try_read_from(uint64_t reader, const Key& key, uint64_t source,
                     const std::set<uint64_t>& writers, std::vector<UndoEdge>& undo);
  std::vector<uint64_t> read_candidates(const std::set<uint64_t>& writers) const;
  Value value_at(uint64_t source, const Key& key) const;
  void abort_conflicted(uint64_t seq, const Key& key);
  void abort_set(std::set<uint64_t> victims);
  void try_commit();

  const StateView& snapshot_;
  DependencyGraphOptions options_;
  mutable std::mutex mu_;
  uint64_t next_seq_ = 0;
  std::map<uint64_t, Node> nodes_;  // live and committed
  std::unordered_map<TxId, uint64_t, TxIdHash> current_;
  std::unordered_set<TxId, TxIdHash> aborted_;
  std::unordered_map<Key, std::set<uint64_t>> writers_;  // live only
  std::unordered_map<Key, std::set<uint64_t>> readers_;  // live only
  // writer seq -> key -> live readers that took the value from it
  std::unordered_map<uint64_t, std::map<Key, std::set<uint64_t>>> served_;
  std::unordered_map<Key, std::pair<Value, TxId>> committed_values_;
  std::set<uint64_t> ready_;
  std::vector<uint64_t> committed_order_;
  std::vector<std::vector<TxId>> abort_log_;
  std::vector<TxId> aborted_waiting_;
  std::function<void(TxId)> abort_listener_;
  uint64_t abort_count_ = 0;
};

}  // namespace thunderbolt
