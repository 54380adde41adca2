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

#include "thunderbolt/workload.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace thunderbolt {

namespace {

// Uniform double in [0, 1) from raw bits so results do not depend on the
// standard library's distribution implementations.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

KvState smallbank_genesis() { return KvState(kInitialBalance); }

std::string account_name(uint32_t index) { return "acct_" + std::to_string(index); }

ZipfSampler::ZipfSampler(uint32_t n, double theta) {
  if (n == 0) throw std::invalid_argument("zipf: n must be >= 1");
  cdf_.resize(n);
  double sum = 0;
  for (uint32_t i = 0; i < n; ++i) {
    sum += 1.0 / std::pow(static_cast<double>(i + 1), theta);
    cdf_[i] = sum;
  }
  for (auto& c : cdf_) c /= sum;
}

uint32_t ZipfSampler::operator()(std::mt19937_64& rng) const {
  const double u = unit(rng);
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<uint32_t>(it - cdf_.begin());
}

std::vector<TxPtr> generate(const SmallBankSpec& spec) {
  if (spec.pr < 0 || spec.pr > 1) throw std::invalid_argument("pr must be in [0, 1]");
  if (spec.cross_pct < 0 || spec.cross_pct > 100) throw std::invalid_argument("cross_pct must be in [0, 100]");
  if (spec.theta < 0) throw std::invalid_argument("theta must be >= 0");
  if (spec.n_accounts < 2) throw std::invalid_argument("need at least two accounts");
  if (spec.n_shards == 0) throw std::invalid_argument("n_shards must be >= 1");

  std::mt19937_64 rng(spec.seed);
  ZipfSampler zipf(spec.n_accounts, spec.theta);
  std::vector<std::vector<uint32_t>> by_shard(spec.n_shards);
  std::vector<ShardId> shard_of(spec.n_accounts);
  for (uint32_t i = 0; i < spec.n_accounts; ++i) {
    shard_of[i] = assign_shard(account_name(i), spec.n_shards);
    by_shard[shard_of[i]].push_back(i);
  }

  // Draws a Zipfian account satisfying `ok`, falling back to a uniform pick
  // among accounts that satisfy it.
  auto pick = [&](auto ok) -> std::optional<uint32_t> {
    for (int attempt = 0; attempt < 64; ++attempt) {
      uint32_t a = zipf(rng);
      if (ok(a)) return a;
    }
    std::vector<uint32_t> pool;
    for (uint32_t i = 0; i < spec.n_accounts; ++i)
      if (ok(i)) pool.push_back(i);
    if (pool.empty()) return std::nullopt;
    return pool[rng() % pool.size()];
  };

  std::vector<TxPtr> out;
  out.reserve(spec.count);
  for (uint32_t seq = 0; seq < spec.count; ++seq) {
    const uint32_t from = zipf(rng);
    Procedure proc;
    if (unit(rng) < spec.pr) {
      proc = Procedure::get_balance(account_name(from));
    } else {
      const bool cross = spec.n_shards > 1 && unit(rng) * 100.0 < spec.cross_pct;
      auto to = pick([&](uint32_t a) {
        return a != from && (cross ? shard_of[a] != shard_of[from] : shard_of[a] == shard_of[from]);
      });
      if (!to) to = pick([&](uint32_t a) { return a != from; });
      const Value amount = 1 + static_cast<Value>(rng() % static_cast<uint64_t>(spec.max_amount));
      proc = Procedure::send_payment(account_name(from), account_name(*to), amount);
    }
    out.push_back(make_transaction(spec.client, seq, std::move(proc), spec.n_shards));
  }
  return out;
}

std::string dump_workload(std::span<const TxPtr> txs) {
  std::ostringstream os;
  for (const auto& tx : txs) {
    os << tx->client << " " << tx->client_seq << " " << tx->submit_time << " " << tx->procedure.encode() << "\n";
  }
  return os.str();
}

std::vector<TxPtr> load_workload(const std::string& text, uint32_t n_shards) {
  std::vector<TxPtr> out;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    uint64_t client = 0, seq = 0;
    SimTime submit = 0;
    std::string kind;
    if (!(ls >> client >> seq >> submit >> kind)) {
      throw std::invalid_argument("workload line " + std::to_string(lineno) + ": bad header");
    }
    Procedure proc;
    if (kind == "GetBalance") {
      std::string a;
      ls >> a;
      proc = Procedure::get_balance(a);
    } else if (kind == "SendPayment") {
      std::string a, b;
      Value amt = 0;
      ls >> a >> b >> amt;
      proc = Procedure::send_payment(a, b, amt);
    } else if (kind == "Script") {
      std::vector<ScriptStep> steps;
      std::string tok;
      while (ls >> tok) {
        ScriptStep st;
        if (tok.rfind("R:", 0) == 0) {
          st.kind = OpKind::kRead;
          st.key = tok.substr(2);
        } else {
          const bool rel = tok.rfind("W+:", 0) == 0;
          const size_t skip = rel ? 3 : 2;
          const auto eq = tok.rfind('=');
          if (eq == std::string::npos || tok.rfind("W", 0) != 0) {
            throw std::invalid_argument("workload line " + std::to_string(lineno) + ": bad step " + tok);
          }
          st.kind = OpKind::kWrite;
          st.relative = rel;
          st.key = tok.substr(skip, eq - skip);
          st.delta = std::stoll(tok.substr(eq + 1));
        }
        steps.push_back(std::move(st));
      }
      proc = Procedure::scripted(std::move(steps));
    } else {
      throw std::invalid_argument("workload line " + std::to_string(lineno) + ": unknown procedure " + kind);
    }
    // A script consumes the stream to its end; other kinds must parse fully.
    if (kind != "Script" && ls.fail()) throw std::invalid_argument("workload line " + std::to_string(lineno) + ": bad arguments");
    out.push_back(make_transaction(client, seq, std::move(proc), n_shards, submit));
  }
  return out;
}

}  // namespace thunderbolt
