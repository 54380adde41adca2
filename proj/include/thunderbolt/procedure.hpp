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
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "thunderbolt/core.hpp"

namespace thunderbolt {

// Callbacks a procedure runs against. Implementations may throw to stop the
// procedure early (e.g. TxAborted from the concurrency controller).
class TxContext {
 public:
  virtual ~TxContext() = default;
  virtual Value read(const Key& key) = 0;
  virtual void write(const Key& key, Value value) = 0;
};

// Thrown through a procedure when its attempt has been aborted.
struct TxAborted {};

// Runs the procedure to completion and returns its result value.
Value run_procedure(const Procedure& proc, TxContext& ctx);

class StateView {
 public:
  virtual ~StateView() = default;
  virtual Value get(const Key& key) const = 0;
};

// In-memory key/value store. Missing keys read as `default_value`.
class KvState : public StateView {
 public:
  explicit KvState(Value default_value = 0) : default_value_(default_value) {}

  Value get(const Key& key) const override;
  void put(const Key& key, Value v) { data_[key] = v; }
  Value default_value() const { return default_value_; }
  size_t size() const { return data_.size(); }

  // Order-independent content hash over explicitly stored keys.
  Digest digest() const;
  std::map<Key, Value> sorted() const { return {data_.begin(), data_.end()}; }
  bool operator==(const KvState& o) const {
    return default_value_ == o.default_value_ && data_ == o.data_;
  }

 private:
  Value default_value_;
  std::unordered_map<Key, Value> data_;
};

// A value observed by a transaction. `source` is the transaction that wrote
// it; nullopt means the batch snapshot.
struct ReadRecord {
  Key key;
  Value value = 0;
  std::optional<TxId> source;
  bool operator==(const ReadRecord&) const = default;
};

struct TxEffects {
  TxPtr tx;
  std::vector<ReadRecord> reads;   // first read per key, sorted by key
  std::map<Key, Value> writes;     // last write per key
  Value result = 0;
};

struct PreplayResult {
  uint64_t batch_id = 0;
  uint64_t snapshot_version = 0;
  std::vector<TxEffects> schedule;  // serial order
  uint64_t reexecutions = 0;

  std::vector<TxId> order() const;
};

// Executes `proc` against `base` with local buffering and records the
// first-read / last-write effects. Reads of keys the transaction already
// wrote are served from the buffer and not recorded.
class RecordingContext : public TxContext {
 public:
  explicit RecordingContext(const StateView& base) : base_(base) {}

  Value read(const Key& key) override;
  void write(const Key& key, Value value) override;

  const std::map<Key, Value>& first_reads() const { return reads_; }
  const std::map<Key, Value>& writes() const { return writes_; }

 private:
  const StateView& base_;
  std::map<Key, Value> reads_;
  std::map<Key, Value> writes_;
};

// Outcome of serially executing an order against a state.
struct SerialOutcome {
  std::vector<TxEffects> effects;
  KvState final_state;
};

// Serial execution in the given order; sources of reads are filled in with
// the last writer in the order (or nullopt for the starting state).
SerialOutcome serial_execute(std::span<const TxPtr> order, const KvState& start);

// First mismatch between a recorded schedule and its serial replay, or
// nullopt when the schedule is Read-Complete and Write-Complete.
std::optional<std::string> check_serial_replay(const PreplayResult& recorded, const KvState& start);

}  // namespace thunderbolt
