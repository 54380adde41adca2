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

#include "thunderbolt/procedure.hpp"

#include <algorithm>

namespace thunderbolt {

Value run_procedure(const Procedure& proc, TxContext& ctx) {
  switch (proc.kind) {
    case ProcKind::kGetBalance: {
      const auto& a = proc.accounts.at(0);
      return ctx.read(a + ":chk") + ctx.read(a + ":sav");
    }
    case ProcKind::kSendPayment: {
      const Key from = proc.accounts.at(0) + ":chk";
      const Key to = proc.accounts.at(1) + ":chk";
      Value from_bal = ctx.read(from);
      Value to_bal = ctx.read(to);
      ctx.write(from, from_bal - proc.amount);
      // from == to degenerates to a no-op transfer
      if (to != from) ctx.write(to, to_bal + proc.amount);
      else ctx.write(to, from_bal);
      return from_bal - proc.amount;
    }
    case ProcKind::kScript: {
      Value acc = 0;
      for (const auto& step : proc.script) {
        if (step.kind == OpKind::kRead) {
          acc += ctx.read(step.key);
        } else {
          ctx.write(step.key, step.relative ? acc + step.delta : step.delta);
        }
      }
      return acc;
    }
  }
  return 0;
}

Value KvState::get(const Key& key) const {
  auto it = data_.find(key);
  return it == data_.end() ? default_value_ : it->second;
}

Digest KvState::digest() const {
  // XOR of per-entry hashes keeps this independent of iteration order.
  Digest d = hash_combine(0x5eed, static_cast<uint64_t>(default_value_));
  for (const auto& [k, v] : data_) d ^= hash_combine(stable_hash(k), static_cast<uint64_t>(v));
  return d;
}

std::vector<TxId> PreplayResult::order() const {
  std::vector<TxId> ids;
  ids.reserve(schedule.size());
  for (const auto& e : schedule) ids.push_back(e.tx->id);
  return ids;
}

Value RecordingContext::read(const Key& key) {
  if (auto w = writes_.find(key); w != writes_.end()) return w->second;
  if (auto r = reads_.find(key); r != reads_.end()) return r->second;
  Value v = base_.get(key);
  reads_.emplace(key, v);
  return v;
}

void RecordingContext::write(const Key& key, Value value) { writes_[key] = value; }

SerialOutcome serial_execute(std::span<const TxPtr> order, const KvState& start) {
  SerialOutcome out{{}, start};
  std::unordered_map<Key, TxId> last_writer;
  for (const auto& tx : order) {
    RecordingContext ctx(out.final_state);
    TxEffects fx;
    fx.tx = tx;
    fx.result = run_procedure(tx->procedure, ctx);
    for (const auto& [k, v] : ctx.first_reads()) {
      std::optional<TxId> src;
      if (auto it = last_writer.find(k); it != last_writer.end()) src = it->second;
      fx.reads.push_back({k, v, src});
    }
    fx.writes = ctx.writes();
    for (const auto& [k, v] : fx.writes) {
      out.final_state.put(k, v);
      last_writer[k] = tx->id;
    }
    out.effects.push_back(std::move(fx));
  }
  return out;
}

std::optional<std::string> check_serial_replay(const PreplayResult& recorded, const KvState& start) {
  std::vector<TxPtr> order;
  for (const auto& e : recorded.schedule) order.push_back(e.tx);
  auto replay = serial_execute(order, start);
  for (size_t i = 0; i < order.size(); ++i) {
    const auto& want = recorded.schedule[i];
    const auto& got = replay.effects[i];
    const std::string who = "tx#" + std::to_string(i) + " " + to_string(want.tx->id);
    if (want.reads.size() != got.reads.size()) return who + ": read-set size differs";
    for (size_t j = 0; j < want.reads.size(); ++j) {
      const auto& a = want.reads[j];
      const auto& b = got.reads[j];
      if (a.key != b.key || a.value != b.value) {
        return who + ": read " + a.key + "=" + std::to_string(a.value) + " but replay reads " +
               b.key + "=" + std::to_string(b.value);
      }
      if (a.source != b.source) return who + ": read " + a.key + " has a different source";
    }
    if (want.writes != got.writes) return who + ": write set differs";
    if (want.result != got.result) return who + ": result differs";
  }
  return std::nullopt;
}

}  // namespace thunderbolt
