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

#include "dag_builder.hpp"
#include "fixtures.hpp"

namespace rule_scenarios {

using namespace thunderbolt;

// Scripted four-shard DAG seen from shard 2's proposer. Leaders: round 1
// shard 0, round 3 shard 1, round 5 shard 2 (the observed proposer), round 7
// shard 3.
//
//   round 2  shard 3 carries C1 (shards 3, 2)
//   round 3  S10 is queued on shard 2; the round-3 leader references C1
//   round 4  S13, S14 queued; shard 0 stays silent; shard 3 carries C2
//            (shards 3, 0) and C3 (shards 3, 1)
//   round 5  shard 2 leads; S17 is queued when preplay is expected back
//   round 6  S22 queued; leader 5 commits with shard 0's round-4 vertex missing
//   round 7  S24 queued; the round-7 leader never arrives, the wait times out
struct Outcome {
  std::vector<std::string> log;  // PROPOSE, CONVERT, SKIP, DEFER, EXEC, APPLY
  bool recovered_before_round5 = false;
};

inline Outcome run(ConflictPolicy policy) {
  using fixtures::cross;
  using fixtures::single;
  testing_dag::Builder b;
  auto e = fixtures::make_engine(2, policy);
  Outcome out;
  auto note = [&](const std::vector<std::string>& lines) {
    for (const auto& l : lines) {
      for (const char* p : {"PROPOSE ", "CONVERT ", "SKIP ", "DEFER ", "EXEC ", "APPLY ", "INVALID "}) {
        if (l.rfind(p, 0) == 0) out.log.push_back(l);
      }
    }
  };
  auto propose = [&](Round r, bool timed_out) {
    auto p = e.build_proposal(b.store, r, timed_out, false);
    note(p.log);
    Block blk = std::move(p.block);
    for (ShardId s = 0; s < 4; ++s) {
      auto v = b.store.vertex(s, r - 1);
      if (v && b.store.certified(v->digest)) blk.parents.push_back(v->digest);
    }
    std::sort(blk.parents.begin(), blk.parents.end());
    blk.seal();
    b.certify(b.add_block(std::move(blk)));
  };
  auto commit = [&] {
    for (const auto& c : b.store.try_commit()) note(e.commit_apply(b.store, c).log);
  };
  auto plain = [&](ShardId s, Round r, const std::vector<ShardId>& parents, std::vector<TxPtr> crosses = {}) {
    Block blk = b.make(s, r, parents, crosses.empty() ? BlockKind::kNormal : BlockKind::kCrossOnly);
    for (auto& tx : crosses) blk.cross_payload.push_back({tx});
    blk.seal();
    b.certify(b.add_block(std::move(blk)));
  };

  b.full_rounds(0, 1);
  for (ShardId s : {0u, 1u, 2u}) plain(s, 2, {0, 1, 2, 3});
  plain(3, 2, {0, 1, 2, 3}, {cross(3, 2, "C1", 1)});

  e.enqueue(single(2, "S10", 10));
  plain(1, 3, {0, 1, 2, 3});
  propose(3, false);
  plain(0, 3, {0, 1, 2, 3});
  plain(3, 3, {0, 1, 2, 3});

  e.enqueue(single(2, "S13", 13, 11));
  e.enqueue(single(2, "S14", 14, 12));
  propose(4, false);
  plain(1, 4, {0, 1, 2, 3});
  plain(3, 4, {0, 1, 2, 3}, {cross(3, 0, "C2", 2), cross(3, 1, "C3", 3)});
  commit();

  if (policy == ConflictPolicy::kSkip) e.enqueue(single(2, "S17", 17, 13));
  out.recovered_before_round5 = e.recover_preplay(b.store, 5);
  propose(5, false);
  plain(1, 5, {1, 2, 3});
  plain(3, 5, {1, 2, 3});

  e.enqueue(single(2, "S22", 22, 14));
  plain(1, 6, {1, 2, 3});
  plain(3, 6, {1, 2, 3});
  propose(6, false);
  commit();

  e.enqueue(single(2, "S24", 24, 15));
  if (e.must_wait_for_leader(b.store, 7)) propose(7, true);
  return out;
}

inline std::vector<std::string> expected(ConflictPolicy policy) {
  if (policy == ConflictPolicy::kConvert) {
    return {
        "CONVERT round=3 shard=2 tx=S10 rule=P3 blocking=C1",
        "PROPOSE dag=1 round=3 shard=2 kind=CrossOnly singles=0 crosses=1",
        "CONVERT round=4 shard=2 tx=S13 rule=P4 blocking=C1",
        "CONVERT round=4 shard=2 tx=S14 rule=P4 blocking=C1",
        "PROPOSE dag=1 round=4 shard=2 kind=CrossOnly singles=0 crosses=2",
        "EXEC tx=C1",
        "PROPOSE dag=1 round=5 shard=2 kind=Normal singles=0 crosses=0",
        "CONVERT round=6 shard=2 tx=S22 rule=P4 blocking=S10,S13,S14",
        "PROPOSE dag=1 round=6 shard=2 kind=CrossOnly singles=0 crosses=1",
        "DEFER tx=C2 rule=P5 missing=4:0",
        "DEFER tx=C3 rule=P5 after=3",
        "EXEC tx=S10",
        "EXEC tx=S13",
        "EXEC tx=S14",
        "CONVERT round=7 shard=2 tx=S24 rule=P6",
        "PROPOSE dag=1 round=7 shard=2 kind=CrossOnly singles=0 crosses=1",
    };
  }
  return {
      "SKIP round=3 shard=2 blocking=C1",
      "PROPOSE dag=1 round=3 shard=2 kind=Skip singles=0 crosses=0",
      "SKIP round=4 shard=2 blocking=C1",
      "PROPOSE dag=1 round=4 shard=2 kind=Skip singles=0 crosses=0",
      "EXEC tx=C1",
      "PROPOSE dag=1 round=5 shard=2 kind=Normal singles=4 crosses=0",
      "PROPOSE dag=1 round=6 shard=2 kind=Normal singles=1 crosses=0",
      "APPLY block=5:2 txs=4",
      "DEFER tx=C2 rule=P5 missing=4:0",
      "DEFER tx=C3 rule=P5 after=3",
      "CONVERT round=7 shard=2 tx=S24 rule=P6",
      "PROPOSE dag=1 round=7 shard=2 kind=CrossOnly singles=0 crosses=1",
  };
}

}  // namespace rule_scenarios
