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

#include <chrono>
#include <span>
#include <vector>

#include "thunderbolt/core.hpp"
#include "thunderbolt/procedure.hpp"

namespace thunderbolt {

struct BaselineOptions {
  uint32_t workers = 1;
  std::chrono::microseconds op_delay{0};
  uint64_t seed = 0;
  // 2PL-No-Wait: retries sleep a seeded uniform time in [0, max_backoff].
  std::chrono::microseconds max_backoff{50};
};

struct BaselineResult {
  PreplayResult schedule;  // commit order with recorded effects
  KvState final_state;
  uint64_t reexecutions = 0;
};

// Optimistic execution with per-transaction backward validation: a central
// verifier commits a transaction only if every version it read is current.
BaselineResult occ_execute(std::span<const TxPtr> batch, const KvState& state, const BaselineOptions& options);

// Two-phase locking without waiting: any lock conflict releases every lock,
// backs off and restarts the transaction.
BaselineResult tpl_nowait_execute(std::span<const TxPtr> batch, const KvState& state,
                                  const BaselineOptions& options);

// Ground truth: strict serial execution in the given order.
SerialOutcome serial_oracle(std::span<const TxPtr> order, const KvState& state);

}  // namespace thunderbolt
