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

#include <optional>
#include <string>
#include <vector>

#include "thunderbolt/executor.hpp"
#include "thunderbolt/procedure.hpp"

namespace thunderbolt {

struct FuzzOptions {
  uint64_t cases = 1000;
  uint64_t seed = 1;
  uint32_t max_txs = 8;
  uint32_t max_keys = 4;
  std::vector<uint32_t> workers{1, 2, 4};
  ExecutorDriver driver = ExecutorDriver::kInterleaved;
  bool skip_read_paths = false;  // mutation: disables the read-path rule
};

struct FuzzCase {
  uint64_t index = 0;
  uint32_t workers = 1;
  uint64_t executor_seed = 0;
  std::vector<TxPtr> txs;
  KvState start;
};

struct FuzzFailure {
  FuzzCase repro;  // minimized
  std::string reason;
  std::string dump;
};

// Random batch number `index` of a campaign: up to max_txs scripted
// transactions over keys k0..k{max_keys-1}.
FuzzCase make_fuzz_case(const FuzzOptions& options, uint64_t index);

// Preplays the case and returns the serial-replay mismatch, if any.
std::optional<std::string> check_fuzz_case(const FuzzOptions& options, const FuzzCase& c,
                                           PreplayResult* schedule = nullptr);

// Runs the campaign; stops at the first counterexample.
std::optional<FuzzFailure> run_fuzz(const FuzzOptions& options);

}  // namespace thunderbolt
