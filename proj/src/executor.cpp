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

#include "thunderbolt/executor.hpp"

#include <condition_variable>
#include <deque>
#include <limits>
#include <random>
#include <shared_mutex>
#include <thread>
#include <unordered_map>

namespace thunderbolt {

namespace {

// Signals that an interleaved attempt performed its one new operation.
struct Yield {};

class GraphContext : public TxContext {
 public:
  GraphContext(DependencyGraph& graph, TxId tx, std::chrono::microseconds delay,
               std::function<void(const Key&)> check)
      : graph_(graph), tx_(tx), delay_(delay), check_(std::move(check)) {}

  Value read(const Key& key) override {
    check_(key);
    pause();
    auto v = graph_.read(tx_, key);
    if (!v) throw TxAborted{};
    return *v;
  }

  void write(const Key& key, Value value) override {
    check_(key);
    pause();
    if (!graph_.write(tx_, key, value)) throw TxAborted{};
  }

 private:
  void pause() const {
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
  }

  DependencyGraph& graph_;
  TxId tx_;
  std::chrono::microseconds delay_;
  std::function<void(const Key&)> check_;
};

// Re-runs a procedure from the start, answering already-performed operations
// from the log and performing exactly one new operation against the graph.
class ReplayContext : public TxContext {
 public:
  ReplayContext(DependencyGraph& graph, TxId tx, std::vector<Value>& log,
                std::function<void(const Key&)> check, ExecutorStep& step)
      : graph_(graph), tx_(tx), log_(log), check_(std::move(check)), step_(step) {}

  Value read(const Key& key) override {
    if (pos_ < log_.size()) return log_[pos_++];
    begin_new_op();
    step_.kind = ExecutorStep::Kind::kRead;
    step_.key = key;
    auto v = graph_.read(tx_, key);
    if (!v) throw TxAborted{};
    step_.value = *v;
    log_.push_back(*v);
    ++pos_;
    return *v;
  }

  void write(const Key& key, Value value) override {
    if (pos_ < log_.size()) {
      ++pos_;
      return;
    }
    begin_new_op();
    step_.kind = ExecutorStep::Kind::kWrite;
    step_.key = key;
    step_.value = value;
    if (!graph_.write(tx_, key, value)) throw TxAborted{};
    log_.push_back(value);
    ++pos_;
  }

  bool performed() const { return performed_; }

 private:
  void begin_new_op() {
    if (performed_) throw Yield{};
    performed_ = true;
  }

  DependencyGraph& graph_;
  TxId tx_;
  std::vector<Value>& log_;
  std::function<void(const Key&)> check_;
  ExecutorStep& step_;
  size_t pos_ = 0;
  bool performed_ = false;
};

}  // namespace

ConcurrentExecutor::ConcurrentExecutor(ExecutorOptions options) : options_(std::move(options)) {
  if (options_.workers == 0) throw std::invalid_argument("executor count must be >= 1");
}

void ConcurrentExecutor::check_routing(const Transaction& tx) const {
  if (!options_.shard) return;
  if (tx.sids.size() != 1 || tx.sids.front() != *options_.shard) {
    throw MisroutedTransaction("transaction " + to_string(tx.id) + " is not single-shard for shard " +
                               std::to_string(*options_.shard));
  }
}

PreplayResult ConcurrentExecutor::preplay_batch(std::span<const TxPtr> txs, const StateView& snapshot,
                                                uint64_t batch_id) {
  for (const auto& tx : txs) check_routing(*tx);
  DependencyGraph graph(snapshot, options_.graph);
  trace_.clear();
  if (options_.driver == ExecutorDriver::kInterleaved) {
    run_interleaved(txs, graph);
  } else {
    run_threaded(txs, graph);
  }
  PreplayResult out = graph.extract_schedule();
  out.batch_id = batch_id;
  last_abort_log_ = graph.abort_log();
  {
    std::lock_guard lock(registry_mu_);
    reexecutions_[batch_id] = out.reexecutions;
  }
  return out;
}

uint64_t ConcurrentExecutor::reexecution_count(uint64_t batch_id) const {
  std::lock_guard lock(registry_mu_);
  auto it = reexecutions_.find(batch_id);
  if (it == reexecutions_.end()) throw ProtocolMisuse("unknown batch " + std::to_string(batch_id));
  return it->second;
}

void ConcurrentExecutor::run_interleaved(std::span<const TxPtr> txs, DependencyGraph& graph) {
  struct Attempt {
    TxPtr tx;
    std::vector<Value> log;
    bool finished = false;
    Value result = 0;
  };
  const uint32_t w = options_.workers;
  std::deque<TxPtr> queue(txs.begin(), txs.end());
  std::unordered_map<TxId, TxPtr, TxIdHash> by_id;
  for (const auto& tx : txs) by_id[tx->id] = tx;
  std::unordered_map<TxId, uint32_t, TxIdHash> aborts;
  std::vector<std::optional<Attempt>> slots(w);
  constexpr uint32_t kNobody = std::numeric_limits<uint32_t>::max();
  uint32_t exclusive = kNobody;  // executor running a transaction alone
  std::mt19937_64 rng(options_.seed);
  size_t script_pos = 0;

  auto checker = [this](const Key& key) {
    if (options_.shard && shard_of_key(key, options_.n_shards) != *options_.shard) {
      throw MisroutedTransaction("key " + key + " is outside shard " + std::to_string(*options_.shard));
    }
  };
  auto requeue = [&](TxId id) {
    ++aborts[id];
    queue.push_back(by_id.at(id));
  };
  auto eligible = [&](uint32_t e) {
    if (exclusive != kNobody) {
      if (e == exclusive) {
        for (uint32_t o = 0; o < w; ++o)
          if (o != e && slots[o]) return false;
        return true;
      }
      return slots[e].has_value();
    }
    return slots[e].has_value() || !queue.empty();
  };

  while (graph.committed_count() < txs.size()) {
    std::vector<uint32_t> ready;
    for (uint32_t e = 0; e < w; ++e)
      if (eligible(e)) ready.push_back(e);
    if (ready.empty()) throw std::logic_error("interleaved executor stalled");

    uint32_t e;
    if (script_pos < options_.script.size()) {
      e = options_.script[script_pos++];
      if (e >= w || !eligible(e)) throw ProtocolMisuse("script picks ineligible executor");
    } else {
      e = ready[rng() % ready.size()];
    }

    auto& slot = slots[e];
    if (!slot) {
      TxPtr tx = queue.front();
      queue.pop_front();
      graph.begin(tx);
      slot = Attempt{tx, {}, false, 0};
      if (aborts[tx->id] >= options_.exclusive_after) {
        exclusive = e;
        bool others = false;
        for (uint32_t o = 0; o < w; ++o) others |= (o != e && slots[o].has_value());
        if (others) continue;  // wait for the in-flight attempts to drain
      }
    }

    ExecutorStep step;
    step.executor = e;
    step.tx = slot->tx->id;
    bool aborted = false;
    if (slot->finished) {
      step.kind = ExecutorStep::Kind::kFinalize;
      auto outcome = graph.finalize(slot->tx->id, slot->result);
      step.outcome = outcome.kind;
      aborted = outcome.kind == FinalizeOutcome::Kind::kAborted;
      if (!aborted) slot.reset();
    } else {
      ReplayContext ctx(graph, slot->tx->id, slot->log, checker, step);
      try {
        Value result = run_procedure(slot->tx->procedure, ctx);
        slot->result = result;
        slot->finished = true;
        if (!ctx.performed()) {
          // The procedure needs no further operation; finalize in this step.
          step.kind = ExecutorStep::Kind::kFinalize;
          auto outcome = graph.finalize(slot->tx->id, result);
          step.outcome = outcome.kind;
          aborted = outcome.kind == FinalizeOutcome::Kind::kAborted;
          if (!aborted) slot.reset();
        }
      } catch (const Yield&) {
      } catch (const TxAborted&) {
        aborted = true;
      }
    }
    if (aborted) {
      if (step.kind != ExecutorStep::Kind::kFinalize) step.outcome = FinalizeOutcome::Kind::kAborted;
      TxId id = slot->tx->id;
      slot.reset();
      requeue(id);
    }
    if (exclusive == e && !slots[e]) exclusive = kNobody;
    for (TxId id : graph.take_aborted_waiting()) requeue(id);
    trace_.push_back(std::move(step));
  }
}

void ConcurrentExecutor::run_threaded(std::span<const TxPtr> txs, DependencyGraph& graph) {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<TxPtr> queue(txs.begin(), txs.end());
  std::unordered_map<TxId, TxPtr, TxIdHash> by_id;
  std::unordered_map<TxId, uint32_t, TxIdHash> aborts;
  for (const auto& tx : txs) by_id[tx->id] = tx;
  std::shared_mutex gate;
  const size_t total = txs.size();

  auto requeue = [&](TxId id) {
    {
      std::lock_guard lock(mu);
      ++aborts[id];
      queue.push_back(by_id.at(id));
    }
    cv.notify_one();
  };
  // Runs under the graph lock; only touches the queue.
  graph.set_abort_listener(requeue);

  auto checker = [this](const Key& key) {
    if (options_.shard && shard_of_key(key, options_.n_shards) != *options_.shard) {
      throw MisroutedTransaction("key " + key + " is outside shard " + std::to_string(*options_.shard));
    }
  };

  std::exception_ptr failure;
  auto worker = [&] {
    try {
      while (true) {
        TxPtr tx;
        uint32_t prior = 0;
        {
          std::unique_lock lock(mu);
          while (queue.empty()) {
            if (failure) return;
            // The abort listener takes `mu` under the graph lock, so the graph
            // is never queried while `mu` is held.
            lock.unlock();
            const bool done = graph.committed_count() >= total;
            lock.lock();
            if (done && queue.empty()) {
              cv.notify_all();
              return;
            }
            if (queue.empty()) cv.wait_for(lock, std::chrono::milliseconds(1));
          }
          tx = queue.front();
          queue.pop_front();
          prior = aborts[tx->id];
        }
        bool aborted = false;
        auto attempt = [&] {
          graph.begin(tx);
          GraphContext ctx(graph, tx->id, options_.op_delay, checker);
          try {
            Value result = run_procedure(tx->procedure, ctx);
            aborted = graph.finalize(tx->id, result).kind == FinalizeOutcome::Kind::kAborted;
          } catch (const TxAborted&) {
            aborted = true;
          }
        };
        if (prior >= options_.exclusive_after) {
          std::unique_lock excl(gate);
          attempt();
        } else {
          std::shared_lock shared(gate);
          attempt();
        }
        if (aborted) requeue(tx->id);
        if (graph.committed_count() >= total) cv.notify_all();
      }
    } catch (...) {
      std::lock_guard lock(mu);
      if (!failure) failure = std::current_exception();
      cv.notify_all();
    }
  };

  std::vector<std::thread> threads;
  for (uint32_t i = 0; i < options_.workers; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  graph.set_abort_listener({});
  if (failure) std::rethrow_exception(failure);
}

}  // namespace thunderbolt
