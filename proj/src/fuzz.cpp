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

#include "thunderbolt/fuzz.hpp"

#include <random>
#include <sstream>

namespace thunderbolt {

FuzzCase make_fuzz_case(const FuzzOptions& options, uint64_t index) {
  std::mt19937_64 rng(hash_combine(options.seed, index));
  FuzzCase c;
  c.index = index;
  c.workers = options.workers.empty() ? 1 : options.workers[index % options.workers.size()];
  c.executor_seed = rng();
  const uint32_t keys = std::max<uint32_t>(1, options.max_keys);
  const uint64_t count = 1 + rng() % std::max<uint32_t>(1, options.max_txs);
  for (uint64_t t = 0; t < count; ++t) {
    std::vector<ScriptStep> steps;
    const uint64_t ops = 1 + rng() % 4;
    for (uint64_t o = 0; o < ops; ++o) {
      ScriptStep s;
      s.key = "k" + std::to_string(rng() % keys);
      if (rng() % 2 == 0) {
        s.kind = OpKind::kRead;
      } else {
        s.kind = OpKind::kWrite;
        s.relative = rng() % 2 == 0;
        s.delta = static_cast<Value>(rng() % 21) - 10;
      }
      steps.push_back(std::move(s));
    }
    c.txs.push_back(make_transaction(index, t, Procedure::scripted(std::move(steps)), 1));
  }
  for (uint32_t k = 0; k < keys; ++k) {
    if (rng() % 2) c.start.put("k" + std::to_string(k), static_cast<Value>(rng() % 100));
  }
  return c;
}

std::optional<std::string> check_fuzz_case(const FuzzOptions& options, const FuzzCase& c, PreplayResult* schedule) {
  ExecutorOptions xo;
  xo.workers = c.workers;
  xo.driver = options.driver;
  xo.seed = c.executor_seed;
  xo.graph.enforce_read_paths = !options.skip_read_paths;
  ConcurrentExecutor ce(xo);
  PreplayResult out = ce.preplay_batch(c.txs, c.start, c.index);
  if (out.schedule.size() != c.txs.size()) return "schedule lost transactions";
  auto verdict = check_serial_replay(out, c.start);
  if (schedule) *schedule = std::move(out);
  return verdict;
}

namespace {

std::string dump_case(const FuzzOptions& options, const FuzzCase& c, const std::string& reason) {
  std::ostringstream os;
  os << "case " << c.index << " seed " << options.seed << " workers " << c.workers << " executor_seed "
     << c.executor_seed << "\n";
  os << "reason: " << reason << "\n";
  os << "start:";
  for (const auto& [k, v] : c.start.sorted()) os << " " << k << "=" << v;
  os << "\n";
  for (const auto& tx : c.txs) os << "tx " << to_string(tx->id) << " " << tx->procedure.encode() << "\n";
  PreplayResult sched;
  check_fuzz_case(options, c, &sched);
  for (const auto& fx : sched.schedule) {
    os << "order " << to_string(fx.tx->id) << " reads";
    for (const auto& r : fx.reads) {
      os << " " << r.key << "=" << r.value << "@" << (r.source ? to_string(*r.source) : "snapshot");
    }
    os << " writes";
    for (const auto& [k, v] : fx.writes) os << " " << k << "=" << v;
    os << "\n";
  }
  return os.str();
}

}  // namespace

std::optional<FuzzFailure> run_fuzz(const FuzzOptions& options) {
  for (uint64_t i = 0; i < options.cases; ++i) {
    FuzzCase c = make_fuzz_case(options, i);
    auto reason = check_fuzz_case(options, c);
    if (!reason) continue;
    // Drop transactions one at a time while the failure persists.
    bool shrunk = true;
    while (shrunk && c.txs.size() > 1) {
      shrunk = false;
      for (size_t drop = 0; drop < c.txs.size(); ++drop) {
        FuzzCase smaller = c;
        smaller.txs.erase(smaller.txs.begin() + static_cast<std::ptrdiff_t>(drop));
        if (auto r = check_fuzz_case(options, smaller)) {
          c = std::move(smaller);
          reason = r;
          shrunk = true;
          break;
        }
      }
    }
    FuzzFailure f{c, *reason, dump_case(options, c, *reason)};
    return f;
  }
  return std::nullopt;
}

}  // namespace thunderbolt
