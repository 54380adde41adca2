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

#include "thunderbolt/core.hpp"

#include <algorithm>
#include <cstdio>

namespace thunderbolt {

namespace {

constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr uint64_t kFnvPrime = 0x100000001b3ULL;

uint64_t fmix64(uint64_t k) {
  k ^= k >> 33;
  k *= 0xff51afd7ed558ccdULL;
  k ^= k >> 33;
  k *= 0xc4ceb9fe1a85ec53ULL;
  k ^= k >> 33;
  return k;
}

}  // namespace

std::string to_string(TxId id) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(id.value));
  return buf;
}

uint64_t stable_hash(std::string_view bytes, uint64_t seed) {
  uint64_t h = kFnvOffset ^ seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return fmix64(h);
}

uint64_t hash_combine(uint64_t h, uint64_t v) {
  return fmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

ShardId assign_shard(std::string_view key, uint32_t n) {
  if (n == 0) throw std::invalid_argument("assign_shard: n must be >= 1");
  return static_cast<ShardId>(stable_hash(key) % n);
}

ShardId shard_of_key(std::string_view storage_key, uint32_t n) {
  auto colon = storage_key.find(':');
  return assign_shard(storage_key.substr(0, colon), n);
}

Procedure Procedure::get_balance(std::string account) {
  Procedure p;
  p.kind = ProcKind::kGetBalance;
  p.accounts = {std::move(account)};
  return p;
}

Procedure Procedure::send_payment(std::string from, std::string to, Value amount) {
  Procedure p;
  p.kind = ProcKind::kSendPayment;
  p.accounts = {std::move(from), std::move(to)};
  p.amount = amount;
  return p;
}

Procedure Procedure::scripted(std::vector<ScriptStep> steps) {
  Procedure p;
  p.kind = ProcKind::kScript;
  p.script = std::move(steps);
  return p;
}

std::vector<Key> Procedure::declared_keys() const {
  std::vector<Key> keys;
  switch (kind) {
    case ProcKind::kGetBalance:
    case ProcKind::kSendPayment:
      for (const auto& a : accounts) keys.push_back(a + ":chk");
      break;
    case ProcKind::kScript:
      for (const auto& s : script) keys.push_back(s.key);
      break;
  }
  return keys;
}

std::string Procedure::encode() const {
  std::string out;
  switch (kind) {
    case ProcKind::kGetBalance:
      out = "GetBalance " + accounts.at(0);
      break;
    case ProcKind::kSendPayment:
      out = "SendPayment " + accounts.at(0) + " " + accounts.at(1) + " " + std::to_string(amount);
      break;
    case ProcKind::kScript:
      out = "Script";
      for (const auto& s : script) {
        out += s.kind == OpKind::kRead ? " R:" : (s.relative ? " W+:" : " W:");
        out += s.key;
        if (s.kind == OpKind::kWrite) out += "=" + std::to_string(s.delta);
      }
      break;
  }
  return out;
}

bool Transaction::touches(ShardId s) const {
  return std::binary_search(sids.begin(), sids.end(), s);
}

TxPtr make_transaction(uint64_t client, uint64_t seq, Procedure proc, uint32_t n_shards,
                       SimTime submit_time) {
  auto tx = std::make_shared<Transaction>();
  tx->client = client;
  tx->client_seq = seq;
  uint64_t h = hash_combine(stable_hash(proc.encode()), client);
  tx->id = TxId{hash_combine(h, seq)};
  for (const auto& k : proc.declared_keys()) tx->sids.push_back(shard_of_key(k, n_shards));
  if (!tx->sids.empty()) tx->sender = tx->sids.front();
  std::sort(tx->sids.begin(), tx->sids.end());
  tx->sids.erase(std::unique(tx->sids.begin(), tx->sids.end()), tx->sids.end());
  tx->procedure = std::move(proc);
  tx->submit_time = submit_time;
  tx->cls = classify(*tx);
  return tx;
}

TxPtr with_tag(const TxPtr& tx, std::string tag) {
  auto copy = std::make_shared<Transaction>(*tx);
  copy->tag = std::move(tag);
  return copy;
}

std::string tx_label(const Transaction& tx) { return tx.tag.empty() ? to_string(tx.id) : tx.tag; }

TxClass classify(const Transaction& tx) {
  if (tx.sids.empty()) throw MalformedTransaction("transaction " + to_string(tx.id) + " has no SIDs");
  return tx.sids.size() == 1 ? TxClass::kSingleShard : TxClass::kCrossShard;
}

std::string_view to_string(ConversionRule rule) {
  switch (rule) {
    case ConversionRule::kNone: return "none";
    case ConversionRule::kP3LeaderConflict: return "P3";
    case ConversionRule::kP4PriorLeaderConflict: return "P4";
    case ConversionRule::kP6LeaderTimeout: return "P6";
  }
  return "?";
}

}  // namespace thunderbolt
