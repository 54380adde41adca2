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

#include "thunderbolt/baselines.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <thread>
#include <unordered_map>

namespace thunderbolt {

namespace {

void pause(std::chrono::microseconds d) {
  if (d.count() > 0) std::this_thread::sleep_for(d);
}

// Shared store of committed values with per-key versions and writers.
struct VersionedStore {
  struct Cell {
    Value value = 0;
    uint64_t version = 0;
    std::optional<TxId> writer;
  };

  explicit VersionedStore(const KvState& base) : base(base), final_state(base) {}

  Cell get(const Key& key) const {
    auto it = cells.find(key);
    if (it != cells.end()) return it->second;
    return Cell{base.get(key), 0, std::nullopt};
  }

  void put(const Key& key, Value v, TxId writer) {
    auto& c = cells[key];
    c.value = v;
    ++c.version;
    c.writer = writer;
    final_state.put(key, v);
  }

  const KvState& base;
  KvState final_state;
  std::unordered_map<Key, Cell> cells;
};

// Buffers writes, records first reads with their versions and writers.
class BufferedContext : public TxContext {
 public:
  using Reader = std::function<VersionedStore::Cell(const Key&)>;

  BufferedContext(Reader reader, std::function<void(const Key&)> before_write, std::chrono::microseconds delay)
      : reader_(std::move(reader)), before_write_(std::move(before_write)), delay_(delay) {}

  Value read(const Key& key) override {
    pause(delay_);
    if (auto w = writes_.find(key); w != writes_.end()) return w->second;
    if (auto r = reads_.find(key); r != reads_.end()) return r->second.value;
    auto cell = reader_(key);
    reads_.emplace(key, cell);
    return cell.value;
  }

  void write(const Key& key, Value value) override {
    pause(delay_);
    if (before_write_) before_write_(key);
    writes_[key] = value;
  }

  const std::map<Key, VersionedStore::Cell>& reads() const { return reads_; }
  const std::map<Key, Value>& writes() const { return writes_; }

 private:
  Reader reader_;
  std::function<void(const Key&)> before_write_;
  std::chrono::microseconds delay_;
  std::map<Key, VersionedStore::Cell> reads_;
  std::map<Key, Value> writes_;
};

TxEffects make_effects(const TxPtr& tx, const BufferedContext& ctx, Value result) {
  TxEffects fx;
  fx.tx = tx;
  fx.result = result;
  for (const auto& [k, cell] : ctx.reads()) fx.reads.push_back({k, cell.value, cell.writer});
  fx.writes = ctx.writes();
  return fx;
}

// Work distribution shared by both baselines: workers pull transactions by
// index and run `attempt` until it reports success.
template <typename Attempt>
void run_pool(size_t count, uint32_t workers, Attempt attempt) {
  std::atomic<size_t> next{0};
  auto body = [&](uint32_t worker) {
    for (size_t i = next++; i < count; i = next++) {
      while (!attempt(worker, i)) {
      }
    }
  };
  if (workers <= 1) {
    body(0);
    return;
  }
  std::vector<std::thread> threads;
  for (uint32_t w = 0; w < workers; ++w) threads.emplace_back(body, w);
  for (auto& t : threads) t.join();
}

}  // namespace

BaselineResult occ_execute(std::span<const TxPtr> batch, const KvState& state, const BaselineOptions& options) {
  VersionedStore store(state);
  std::mutex verifier;
  BaselineResult out;
  std::atomic<uint64_t> rejections{0};

  run_pool(batch.size(), options.workers, [&](uint32_t, size_t i) {
    const TxPtr& tx = batch[i];
    BufferedContext ctx(
        [&](const Key& k) {
          std::lock_guard lock(verifier);
          return store.get(k);
        },
        {}, options.op_delay);
    Value result = run_procedure(tx->procedure, ctx);
    std::lock_guard lock(verifier);
    for (const auto& [k, seen] : ctx.reads()) {
      if (store.get(k).version != seen.version) {
        ++rejections;
        return false;
      }
    }
    for (const auto& [k, v] : ctx.writes()) store.put(k, v, tx->id);
    out.schedule.schedule.push_back(make_effects(tx, ctx, result));
    return true;
  });

  out.final_state = store.final_state;
  out.reexecutions = rejections;
  out.schedule.reexecutions = rejections;
  return out;
}

BaselineResult tpl_nowait_execute(std::span<const TxPtr> batch, const KvState& state,
                                  const BaselineOptions& options) {
  VersionedStore store(state);
  std::mutex table_mu;
  // key -> holders; a writer is the sole holder with `exclusive` set.
  struct Lock {
    std::set<size_t> holders;
    bool exclusive = false;
  };
  std::unordered_map<Key, Lock> table;
  BaselineResult out;
  std::atomic<uint64_t> retries{0};
  std::vector<std::mt19937_64> rngs;
  for (uint32_t w = 0; w < std::max<uint32_t>(1, options.workers); ++w) rngs.emplace_back(options.seed * 1315423911ULL + w);

  struct Conflict {};

  run_pool(batch.size(), options.workers, [&](uint32_t worker, size_t i) {
    const TxPtr& tx = batch[i];
    std::vector<Key> held;
    auto acquire = [&](const Key& k, bool exclusive) {
      std::lock_guard lock(table_mu);
      Lock& l = table[k];
      const bool mine = l.holders.count(i) > 0;
      if (exclusive) {
        if (l.holders.size() > (mine ? 1u : 0u)) throw Conflict{};
        l.exclusive = true;
      } else if (l.exclusive && !mine) {
        throw Conflict{};
      }
      if (!mine) {
        l.holders.insert(i);
        held.push_back(k);
      }
    };
    auto release_all = [&] {
      std::lock_guard lock(table_mu);
      for (const auto& k : held) {
        Lock& l = table[k];
        l.holders.erase(i);
        if (l.holders.empty()) l.exclusive = false;
      }
      held.clear();
    };

    BufferedContext ctx(
        [&](const Key& k) {
          acquire(k, false);
          std::lock_guard lock(table_mu);
          return store.get(k);
        },
        [&](const Key& k) { acquire(k, true); }, options.op_delay);
    try {
      Value result = run_procedure(tx->procedure, ctx);
      {
        std::lock_guard lock(table_mu);
        for (const auto& [k, v] : ctx.writes()) store.put(k, v, tx->id);
        out.schedule.schedule.push_back(make_effects(tx, ctx, result));
      }
      release_all();
      return true;
    } catch (const Conflict&) {
      release_all();
      ++retries;
      const auto span = static_cast<uint64_t>(options.max_backoff.count());
      if (span > 0) {
        uint64_t wait;
        {
          std::lock_guard lock(table_mu);
          wait = rngs[worker]() % (span + 1);
        }
        std::this_thread::sleep_for(std::chrono::microseconds(wait));
      }
      return false;
    }
  });

  out.final_state = store.final_state;
  out.reexecutions = retries;
  out.schedule.reexecutions = retries;
  return out;
}

SerialOutcome serial_oracle(std::span<const TxPtr> order, const KvState& state) {
  return serial_execute(order, state);
}

}  // namespace thunderbolt
