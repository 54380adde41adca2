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

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "thunderbolt/core.hpp"
#include "thunderbolt/procedure.hpp"

namespace thunderbolt {

inline constexpr Value kInitialBalance = 10000;

// Every account field starts at kInitialBalance.
KvState smallbank_genesis();

std::string account_name(uint32_t index);

struct SmallBankSpec {
  uint32_t n_accounts = 10000;
  double theta = 0.85;     // Zipfian skew
  double pr = 0.5;         // probability of GetBalance
  double cross_pct = 0.0;  // percent of SendPayments spanning two shards
  uint32_t count = 1000;
  uint64_t seed = 1;
  uint32_t n_shards = 4;
  Value max_amount = 100;
  uint64_t client = 0;  // client id stamped on every transaction
};

// Zipfian ranks in [0, n) with P(i) proportional to 1 / (i+1)^theta.
class ZipfSampler {
 public:
  ZipfSampler(uint32_t n, double theta);
  uint32_t operator()(std::mt19937_64& rng) const;

 private:
  std::vector<double> cdf_;
};

// Throws std::invalid_argument on an out-of-range spec.
std::vector<TxPtr> generate(const SmallBankSpec& spec);

// One transaction per line: "<client> <seq> <submit_us> <procedure encoding>".
std::string dump_workload(std::span<const TxPtr> txs);
std::vector<TxPtr> load_workload(const std::string& text, uint32_t n_shards);

}  // namespace thunderbolt
