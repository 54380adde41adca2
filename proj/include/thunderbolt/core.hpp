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

#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace thunderbolt {

using ReplicaId = uint32_t;
using ShardId = uint32_t;
using Round = uint64_t;
using DagId = uint32_t;
using Key = std::string;
using Value = int64_t;
using Digest = uint64_t;
// Simulated time in microseconds.
using SimTime = int64_t;

// Transaction digest. Ordering is only used for deterministic containers.
struct TxId {
  uint64_t value = 0;
  auto operator<=>(const TxId&) const = default;
};

struct TxIdHash {
  size_t operator()(const TxId& id) const noexcept { return std::hash<uint64_t>{}(id.value); }
};

std::string to_string(TxId id);

class ProtocolMisuse : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class MalformedTransaction : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class MisroutedTransaction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a followed by the murmur3 fmix64 finalizer. The finalizer
// spreads FNV's weak low bits so `hash % n` is usable for small n.
uint64_t stable_hash(std::string_view bytes, uint64_t seed = 0);
uint64_t hash_combine(uint64_t h, uint64_t v);

// Shard of an account / key: stable_hash(key) mod n.
ShardId assign_shard(std::string_view key, uint32_t n);

// Storage keys are "<account>:<field>"; the SID is derived from the account
// part so both fields of an account land in the same shard. Keys without a
// ':' are hashed whole.
ShardId shard_of_key(std::string_view storage_key, uint32_t n);

enum class OpKind { kRead, kWrite };

struct Operation {
  OpKind kind = OpKind::kRead;
  Key key;
  std::optional<Value> value;  // present iff kWrite

  static Operation read(Key k) { return {OpKind::kRead, std::move(k), std::nullopt}; }
  static Operation write(Key k, Value v) { return {OpKind::kWrite, std::move(k), v}; }
  bool well_formed() const { return (kind == OpKind::kWrite) == value.has_value(); }
};

enum class ProcKind { kGetBalance, kSendPayment, kScript };

// One step of a scripted procedure. A write stores `delta` when `relative`
// is false, otherwise the sum of all values read so far plus `delta`.
struct ScriptStep {
  OpKind kind = OpKind::kRead;
  Key key;
  Value delta = 0;
  bool relative = false;
};

struct Procedure {
  ProcKind kind = ProcKind::kScript;
  std::vector<std::string> accounts;  // SmallBank parameters
  Value amount = 0;
  std::vector<ScriptStep> script;

  static Procedure get_balance(std::string account);
  static Procedure send_payment(std::string from, std::string to, Value amount);
  static Procedure scripted(std::vector<ScriptStep> steps);

  // Storage keys the procedure can touch, used only to derive SIDs.
  std::vector<Key> declared_keys() const;
  std::string encode() const;
};

enum class TxClass { kSingleShard, kCrossShard };

struct Transaction {
  TxId id;
  uint64_t client = 0;
  uint64_t client_seq = 0;
  Procedure procedure;
  std::vector<ShardId> sids;  // sorted, unique
  ShardId sender = 0;         // SID of the first declared key; clients route here
  TxClass cls = TxClass::kSingleShard;
  SimTime submit_time = 0;
  std::string tag;  // optional display name for logs; not part of the id

  ShardId home_shard() const { return sender; }
  bool touches(ShardId s) const;
};

using TxPtr = std::shared_ptr<const Transaction>;

// Builds a transaction with id = hash(client, seq, procedure) and SIDs taken
// from the procedure's declared keys.
TxPtr make_transaction(uint64_t client, uint64_t seq, Procedure proc, uint32_t n_shards,
                       SimTime submit_time = 0);

// Copy of `tx` that prints as `tag` in logs.
TxPtr with_tag(const TxPtr& tx, std::string tag);

// `tag` when set, otherwise the hex id.
std::string tx_label(const Transaction& tx);

// Throws MalformedTransaction when sids is empty.
TxClass classify(const Transaction& tx);

// Why a transaction ended up on the order-execute path.
enum class ConversionRule { kNone, kP3LeaderConflict, kP4PriorLeaderConflict, kP6LeaderTimeout };

std::string_view to_string(ConversionRule rule);

// Cross-shard payload entry. Converted single-shard transactions are wrapped
// rather than mutated so the log keeps the original identity.
struct CrossItem {
  TxPtr tx;
  ConversionRule converted_by = ConversionRule::kNone;

  TxClass effective_class() const { return TxClass::kCrossShard; }
  bool converted() const { return converted_by != ConversionRule::kNone; }
};

}  // namespace thunderbolt
