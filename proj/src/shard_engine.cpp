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

#include "thunderbolt/shard_engine.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <sstream>

namespace thunderbolt {

namespace {

// Applied state plus the writes of this proposer's own uncommitted blocks.
class OverlayView : public StateView {
 public:
  explicit OverlayView(const StateView& base) : base_(base) {}
  Value get(const Key& key) const override {
    auto it = over_.find(key);
    return it == over_.end() ? base_.get(key) : it->second;
  }
  void put(const Key& key, Value v) { over_[key] = v; }

 private:
  const StateView& base_;
  std::unordered_map<Key, Value> over_;
};

std::string slot(const Block& b) { return std::to_string(b.round) + ":" + std::to_string(b.proposer); }

// Runs fn(i) for i in [0, count), on up to `workers` threads.
template <typename Fn>
void parallel_for(size_t count, uint32_t workers, Fn fn) {
  if (workers <= 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::future<void>> parts;
  const size_t lanes = std::min<size_t>(workers, count);
  for (size_t lane = 0; lane < lanes; ++lane) {
    parts.push_back(std::async(std::launch::async, [&, lane] {
      for (size_t i = lane; i < count; i += lanes) fn(i);
    }));
  }
  for (auto& p : parts) p.get();
}

// Groups items into levels: an item goes one level above the latest earlier
// item sharing any resource with it.
template <typename Resource>
std::vector<std::vector<size_t>> dependency_levels(const std::vector<std::vector<Resource>>& uses) {
  std::map<Resource, size_t> last;
  std::vector<std::vector<size_t>> levels;
  for (size_t i = 0; i < uses.size(); ++i) {
    size_t level = 0;
    for (const auto& r : uses[i]) {
      if (auto it = last.find(r); it != last.end()) level = std::max(level, it->second + 1);
    }
    for (const auto& r : uses[i]) last[r] = level;
    if (levels.size() <= level) levels.resize(level + 1);
    levels[level].push_back(i);
  }
  return levels;
}

}  // namespace

ValidationResult validate_block(const Block& block, const StateView& state, uint32_t n_shards,
                                uint32_t workers) {
  ValidationResult out;
  if (block.kind != BlockKind::kNormal || !block.single_payload) return out;
  const auto& schedule = block.single_payload->schedule;
  std::set<TxId> seen;
  std::vector<std::vector<Key>> uses;
  for (const auto& fx : schedule) {
    const Transaction& tx = *fx.tx;
    if (tx.sids.size() != 1 || tx.sids.front() != block.proposer) {
      return {false, "transaction " + tx_label(tx) + " is not single-shard for the proposer", 0};
    }
    for (const auto& k : tx.procedure.declared_keys()) {
      if (shard_of_key(k, n_shards) != block.proposer) {
        return {false, "transaction " + tx_label(tx) + " declares a foreign key", 0};
      }
    }
    if (!seen.insert(tx.id).second) return {false, "duplicate transaction " + tx_label(tx), 0};
    std::vector<Key> keys;
    for (const auto& r : fx.reads) keys.push_back(r.key);
    for (const auto& [k, v] : fx.writes) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    uses.push_back(std::move(keys));
  }

  const auto levels = dependency_levels(uses);
  out.levels = levels.size();
  OverlayView view(state);
  std::map<Key, TxId> last_writer;
  for (const auto& level : levels) {
    std::vector<RecordingContext> contexts;
    contexts.reserve(level.size());
    for (size_t i = 0; i < level.size(); ++i) contexts.emplace_back(view);
    std::vector<Value> results(level.size());
    parallel_for(level.size(), workers, [&](size_t i) {
      results[i] = run_procedure(schedule[level[i]].tx->procedure, contexts[i]);
    });
    for (size_t i = 0; i < level.size(); ++i) {
      const auto& fx = schedule[level[i]];
      const std::string who = tx_label(*fx.tx);
      const auto& reads = contexts[i].first_reads();
      if (reads.size() != fx.reads.size()) return {false, who + ": read set differs", out.levels};
      size_t j = 0;
      for (const auto& [k, v] : reads) {
        const auto& rec = fx.reads[j++];
        if (rec.key != k || rec.value != v) return {false, who + ": read " + k + " differs", out.levels};
        std::optional<TxId> source;
        if (auto it = last_writer.find(k); it != last_writer.end()) source = it->second;
        if (rec.source != source) return {false, who + ": read " + k + " source differs", out.levels};
      }
      if (contexts[i].writes() != fx.writes) return {false, who + ": write set differs", out.levels};
      if (results[i] != fx.result) return {false, who + ": result differs", out.levels};
    }
    // Publish the level in declared order.
    for (size_t i = 0; i < level.size(); ++i) {
      for (const auto& [k, v] : contexts[i].writes()) {
        view.put(k, v);
        last_writer[k] = schedule[level[i]].tx->id;
      }
    }
  }
  return out;
}

CrossExecution execute_cross_batch(std::span<const TxPtr> txs, KvState& state, uint32_t workers) {
  CrossExecution out;
  std::vector<std::vector<ShardId>> uses;
  for (const auto& tx : txs) uses.push_back(tx->sids);
  const auto levels = dependency_levels(uses);
  out.levels = levels.size();
  out.effects.resize(txs.size());
  for (const auto& level : levels) {
    std::vector<RecordingContext> contexts;
    contexts.reserve(level.size());
    for (size_t i = 0; i < level.size(); ++i) contexts.emplace_back(state);
    std::vector<Value> results(level.size());
    parallel_for(level.size(), workers, [&](size_t i) {
      results[i] = run_procedure(txs[level[i]]->procedure, contexts[i]);
    });
    for (size_t i = 0; i < level.size(); ++i) {
      TxEffects& fx = out.effects[level[i]];
      fx.tx = txs[level[i]];
      fx.result = results[i];
      for (const auto& [k, v] : contexts[i].first_reads()) fx.reads.push_back({k, v, std::nullopt});
      fx.writes = contexts[i].writes();
    }
    // Transactions of one level touch disjoint shards, hence disjoint keys.
    for (size_t i = 0; i < level.size(); ++i) {
      for (const auto& [k, v] : contexts[i].writes()) state.put(k, v);
    }
  }
  return out;
}

ShardEngine::ShardEngine(EngineOptions options, ReplicaId self, ShardId shard, KvState genesis,
                         ExecutorOptions executor)
    : options_(options),
      self_(self),
      shard_(shard),
      executor_(std::move(executor)),
      state_(std::move(genesis)),
      cross_count_(options.n, 0) {}

bool ShardEngine::enqueue(TxPtr tx) {
  if (applied_.count(tx->id) || in_flight_.count(tx->id) || queued_ids_.count(tx->id)) return false;
  if (tx->home_shard() != shard_) return false;
  queued_ids_.insert(tx->id);
  queue_.push_back(std::move(tx));
  return true;
}

bool ShardEngine::has_queued_singles() const {
  if (options_.serial) return false;
  return std::any_of(queue_.begin(), queue_.end(),
                     [](const TxPtr& tx) { return tx->cls == TxClass::kSingleShard; });
}

void ShardEngine::start_dag(ShardId shard) {
  shard_ = shard;
  if (executor_.options().shard) executor_.set_shard(shard);
  queue_.clear();
  queued_ids_.clear();
  in_flight_.clear();
  own_blocks_.clear();
  deferred_.clear();
}

std::optional<Round> ShardEngine::guiding_leader_round(Round r) {
  if (DagStore::is_leader_round(r)) return r;
  if (r == 0) return std::nullopt;
  return r - 1;
}

std::vector<PendingCross> ShardEngine::conflict_set(const DagStore& dag, Round r) const {
  std::vector<PendingCross> out;
  std::unordered_set<TxId, TxIdHash> seen;
  for (const auto& [tx, since] : deferred_) {
    if (tx->touches(shard_) && seen.insert(tx->id).second) out.push_back({tx, std::nullopt});
  }
  auto guide = guiding_leader_round(r);
  if (!guide) return out;
  const auto last = dag.last_committed_leader();
  for (Round q = last ? *last + 2 : 1; q <= *guide; q += 2) {
    auto leader = dag.vertex(dag.leader_of(q), q);
    if (!leader) continue;
    for (const auto& b : dag.uncommitted_history(leader->digest)) {
      for (const auto& item : b->cross_payload) {
        if (item.tx->touches(shard_) && !applied_.count(item.tx->id) && seen.insert(item.tx->id).second) {
          out.push_back({item.tx, q});
        }
      }
    }
  }
  return out;
}

bool ShardEngine::must_wait_for_leader(const DagStore& dag, Round r) const {
  auto guide = guiding_leader_round(r);
  if (!guide || !has_queued_singles()) return false;
  const ShardId leader = dag.leader_of(*guide);
  return leader != shard_ && dag.vertex(leader, *guide) == nullptr;
}

bool ShardEngine::recover_preplay(const DagStore& dag, Round r) const {
  for (const auto& pc : conflict_set(dag, r)) {
    if (!pc.leader_round) return false;
    if (!dag.leader_committed(*pc.leader_round) && !dag.leader_committable(*pc.leader_round)) return false;
  }
  return true;
}

std::vector<TxPtr> ShardEngine::take_batch(TxClass cls, size_t limit) {
  std::vector<TxPtr> out;
  for (auto it = queue_.begin(); it != queue_.end() && out.size() < limit;) {
    const TxPtr& tx = *it;
    if (applied_.count(tx->id)) {
      queued_ids_.erase(tx->id);
      it = queue_.erase(it);
      continue;
    }
    if (options_.serial || tx->cls == cls) {
      out.push_back(tx);
      queued_ids_.erase(tx->id);
      in_flight_.insert(tx->id);
      it = queue_.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

Proposal ShardEngine::build_proposal(const DagStore& dag, Round r, bool leader_timed_out, bool shift) {
  Proposal p;
  Block& b = p.block;
  b.proposer = shard_;
  b.author = self_;
  b.round = r;
  b.dag = dag.dag();
  b.base_crosses = cross_count_[shard_];
  const std::string where = "round=" + std::to_string(r) + " shard=" + std::to_string(shard_);
  auto finish = [&] {
    OwnBlock own;
    if (b.single_payload) {
      for (const auto& fx : b.single_payload->schedule) {
        own.txs.push_back(fx.tx->id);
        for (const auto& [k, v] : fx.writes) own.writes[k] = v;
      }
    }
    for (const auto& item : b.cross_payload) own.txs.push_back(item.tx->id);
    own_blocks_[r] = std::move(own);
    p.log.push_back("PROPOSE dag=" + std::to_string(b.dag) + " " + where + " kind=" +
                    std::string(to_string(b.kind)) + " singles=" +
                    std::to_string(b.single_payload ? b.single_payload->schedule.size() : 0) +
                    " crosses=" + std::to_string(b.cross_payload.size()));
  };

  if (shift) {
    b.kind = BlockKind::kShift;
    finish();
    return p;
  }
  if (options_.serial) {
    b.kind = BlockKind::kCrossOnly;
    for (auto& tx : take_batch(TxClass::kCrossShard, options_.batch)) b.cross_payload.push_back({tx});
    finish();
    return p;
  }

  const bool singles = has_queued_singles();
  if (singles && leader_timed_out) {
    b.kind = BlockKind::kCrossOnly;
    auto converted = take_batch(TxClass::kSingleShard, options_.batch);
    for (auto& tx : take_batch(TxClass::kCrossShard, options_.batch)) b.cross_payload.push_back({tx});
    for (auto& tx : converted) {
      p.log.push_back("CONVERT " + where + " tx=" + tx_label(*tx) + " rule=P6");
      b.cross_payload.push_back({tx, ConversionRule::kP6LeaderTimeout});
    }
    finish();
    return p;
  }

  const auto conflicts = singles ? conflict_set(dag, r) : std::vector<PendingCross>{};
  if (!conflicts.empty()) {
    // The log names the first few blocking transactions and counts the rest.
    constexpr size_t kNamed = 4;
    std::string blocking;
    bool current_leader = false;
    for (size_t i = 0; i < conflicts.size(); ++i) {
      const auto& c = conflicts[i];
      if (i < kNamed) blocking += (blocking.empty() ? "" : ",") + tx_label(*c.tx);
      current_leader |= DagStore::is_leader_round(r) && c.leader_round == r;
    }
    if (conflicts.size() > kNamed) blocking += ",+" + std::to_string(conflicts.size() - kNamed);
    if (options_.policy == ConflictPolicy::kSkip) {
      b.kind = BlockKind::kSkip;
      p.log.push_back("SKIP " + where + " blocking=" + blocking);
      finish();
      return p;
    }
    const ConversionRule rule =
        current_leader ? ConversionRule::kP3LeaderConflict : ConversionRule::kP4PriorLeaderConflict;
    b.kind = BlockKind::kCrossOnly;
    auto converted = take_batch(TxClass::kSingleShard, options_.batch);
    for (auto& tx : take_batch(TxClass::kCrossShard, options_.batch)) b.cross_payload.push_back({tx});
    for (auto& tx : converted) {
      p.log.push_back("CONVERT " + where + " tx=" + tx_label(*tx) + " rule=" + std::string(to_string(rule)) +
                      " blocking=" + blocking);
      b.cross_payload.push_back({tx, rule});
    }
    finish();
    return p;
  }

  b.kind = BlockKind::kNormal;
  auto batch = take_batch(TxClass::kSingleShard, options_.batch);
  for (auto& tx : take_batch(TxClass::kCrossShard, options_.batch)) b.cross_payload.push_back({tx});
  if (!batch.empty()) {
    OverlayView base(state_);
    for (const auto& [round, own] : own_blocks_) {
      for (const auto& [k, v] : own.writes) base.put(k, v);
    }
    b.single_payload = executor_.preplay_batch(batch, base, next_batch_id_++);
    p.executions = b.single_payload->schedule.size() + b.single_payload->reexecutions;
    p.reexecutions = b.single_payload->reexecutions;
  }
  finish();
  return p;
}

void ShardEngine::release_in_flight(const Block& block) {
  if (block.author != self_) return;
  auto it = own_blocks_.find(block.round);
  if (it == own_blocks_.end()) return;
  for (TxId id : it->second.txs) in_flight_.erase(id);
  own_blocks_.erase(it);
}

ApplyReport ShardEngine::commit_apply(const DagStore& dag, const CommittedLeader& batch) {
  ApplyReport rep;
  const Round j = batch.leader->round;
  rep.log.push_back("COMMIT dag=" + std::to_string(dag.dag()) + " leader=" + slot(*batch.leader) +
                    " blocks=" + std::to_string(batch.blocks.size()));

  auto mark_applied = [&](const TxPtr& tx) {
    applied_.insert(tx->id);
    rep.applied.push_back(tx);
  };

  // Single-shard results first.
  for (const auto& b : batch.blocks) {
    release_in_flight(*b);
    if (b->kind != BlockKind::kNormal || !b->single_payload || b->single_payload->schedule.empty()) continue;
    const auto& schedule = b->single_payload->schedule;
    std::string dup;
    for (const auto& fx : schedule) {
      if (applied_.count(fx.tx->id)) dup = tx_label(*fx.tx);
    }
    if (!dup.empty()) {
      ++rep.invalid_blocks;
      rep.log.push_back("INVALID block=" + slot(*b) + " reason=already applied " + dup);
      continue;
    }
    if (b->proposer < cross_count_.size() && b->base_crosses != cross_count_[b->proposer]) {
      ++rep.audit_mismatches;
    }
    auto verdict = validate_block(*b, state_, options_.n, options_.apply_workers);
    rep.validation_levels += verdict.levels;
    if (!verdict.valid) {
      ++rep.invalid_blocks;
      rep.log.push_back("INVALID block=" + slot(*b) + " reason=" + verdict.reason);
      continue;
    }
    for (const auto& fx : schedule) {
      for (const auto& [k, v] : fx.writes) state_.put(k, v);
      mark_applied(fx.tx);
    }
    rep.log.push_back("APPLY block=" + slot(*b) + " txs=" + std::to_string(schedule.size()));
  }

  // Then cross-shard transactions: earlier deferrals first, then this batch.
  // Each candidate carries the leader round that first deferred it.
  std::vector<std::pair<TxPtr, Round>> candidates = deferred_;
  for (const auto& b : batch.blocks) {
    for (const auto& item : b->cross_payload) candidates.emplace_back(item.tx, j);
  }
  std::vector<TxPtr> ready;
  std::vector<std::pair<TxPtr, Round>> still_deferred;
  std::unordered_set<TxId, TxIdHash> taken;
  std::set<ShardId> blocked;
  // Carried-over deferrals are logged when first deferred only.
  const size_t carried = deferred_.size();
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto& [tx, since] = candidates[i];
    if (applied_.count(tx->id) || !taken.insert(tx->id).second) {
      rep.log.push_back("DEDUP tx=" + tx_label(*tx));
      continue;
    }
    if (options_.serial) {
      ready.push_back(tx);
      continue;
    }
    std::string reason;
    for (ShardId s : tx->sids) {
      if (blocked.count(s)) {
        reason = "after=" + std::to_string(s);
        break;
      }
      // Shard s is caught up once one of its vertices from round since-1 on
      // is committed.
      bool caught_up = false;
      for (Round q = since - 1; q <= j - 1 && !caught_up; ++q) {
        auto v = dag.vertex(s, q);
        caught_up = v && dag.committed(v->digest);
      }
      if (!caught_up) {
        reason = "missing=" + std::to_string(since - 1) + ":" + std::to_string(s);
        break;
      }
    }
    if (!reason.empty()) {
      blocked.insert(tx->sids.begin(), tx->sids.end());
      still_deferred.emplace_back(tx, since);
      ++rep.deferred;
      if (i >= carried) rep.log.push_back("DEFER tx=" + tx_label(*tx) + " rule=P5 " + reason);
      continue;
    }
    ready.push_back(tx);
  }
  deferred_ = std::move(still_deferred);

  if (options_.serial) {
    KvState& st = state_;
    for (const auto& tx : ready) {
      RecordingContext ctx(st);
      run_procedure(tx->procedure, ctx);
      for (const auto& [k, v] : ctx.writes()) st.put(k, v);
    }
    rep.serial_executions = ready.size();
  } else {
    auto exec = execute_cross_batch(ready, state_, options_.apply_workers);
    rep.cross_levels = exec.levels;
  }
  for (const auto& tx : ready) {
    mark_applied(tx);
    for (ShardId s : tx->sids) ++cross_count_[s];
    rep.log.push_back("EXEC tx=" + tx_label(*tx));
  }
  std::ostringstream digest;
  digest << std::hex << state_.digest();
  rep.log.push_back("STATE leader=" + slot(*batch.leader) + " applied=" + std::to_string(applied_.size()) +
                    " digest=" + digest.str());
  return rep;
}

std::vector<TxId> ShardEngine::deferred_ids() const {
  std::vector<TxId> out;
  for (const auto& [tx, since] : deferred_) out.push_back(tx->id);
  return out;
}

}  // namespace thunderbolt
