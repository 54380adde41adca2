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

#include <string>
#include <vector>

#include "thunderbolt/core.hpp"
#include "thunderbolt/dag.hpp"
#include "thunderbolt/shard_engine.hpp"
#include "thunderbolt/workload.hpp"

namespace fixtures {

using namespace thunderbolt;

// The first `count` account names whose keys live in `shard`.
inline std::vector<std::string> accounts_in(ShardId shard, size_t count, uint32_t n = 4) {
  std::vector<std::string> out;
  for (uint32_t i = 0; out.size() < count; ++i) {
    if (shard_of_key(account_name(i) + ":chk", n) == shard) out.push_back(account_name(i));
  }
  return out;
}

// Payment between two accounts of `shard`, tagged for logs.
inline TxPtr single(ShardId shard, const std::string& tag, uint64_t seq, Value amount = 10, uint32_t n = 4) {
  auto a = accounts_in(shard, 2, n);
  return with_tag(make_transaction(7, seq, Procedure::send_payment(a[0], a[1], amount), n), tag);
}

// Payment from an account of `from` to one of `to`.
inline TxPtr cross(ShardId from, ShardId to, const std::string& tag, uint64_t seq, Value amount = 10,
                   uint32_t n = 4) {
  auto a = accounts_in(from, 1, n);
  auto b = accounts_in(to, 1, n);
  return with_tag(make_transaction(8, seq, Procedure::send_payment(a[0], b[0], amount), n), tag);
}

inline ShardEngine make_engine(ShardId shard, ConflictPolicy policy = ConflictPolicy::kConvert, uint32_t n = 4) {
  EngineOptions eo;
  eo.n = n;
  eo.f = (n - 1) / 3;
  eo.policy = policy;
  ExecutorOptions xo;
  xo.workers = 2;
  xo.shard = shard;
  xo.n_shards = n;
  return ShardEngine(eo, shard, shard, smallbank_genesis(), xo);
}

}  // namespace fixtures
