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

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "thunderbolt/core.hpp"
#include "thunderbolt/dag.hpp"
#include "thunderbolt/shard_engine.hpp"
#include "thunderbolt/workload.hpp"

namespace thunderbolt {

enum class Protocol { kThunderbolt, kTuskSerial };
enum class SimMode {
  kProtocol,  // interleaved executor, fixed compute costs; bit-reproducible
  kBench,     // threaded executor; measured preplay wall time is added
};

std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view s);

enum class MessageKind { kProposal, kVote, kCertificate, kClient };

enum class AdversaryKind {
  kCrash,          // stops sending and receiving at `at`
  kDelay,          // every outgoing message takes `extra_delay` longer
  kCensor,         // drops client transactions matching `predicate`
  kHaltProposals,  // stops proposing from `round` on, keeps voting
};

struct AdversarySpec {
  ReplicaId replica = 0;
  AdversaryKind kind = AdversaryKind::kCrash;
  SimTime at = 0;
  SimTime extra_delay = 0;
  Round round = 0;
  // "all", or "mod:k:r" for transactions whose id mod k equals r.
  std::string predicate = "all";
};

// Parses "crash:<replica>@<time_us>", "delay:<replica>:<extra_us>",
// "censor:<replica>[:<predicate>]" or "halt:<replica>@<round>".
AdversarySpec parse_adversary(const std::string& text);

// Extra latency (or a drop) for matching replica-to-replica messages.
struct DelayRule {
  std::optional<ReplicaId> from;
  std::optional<ReplicaId> to;
  std::optional<MessageKind> kind;
  std::optional<DagId> dag;
  Round min_round = 0;
  Round max_round = std::numeric_limits<Round>::max();
  SimTime extra = 0;
  bool drop = false;
};

struct SimConfig {
  Protocol protocol = Protocol::kThunderbolt;
  SimMode mode = SimMode::kProtocol;
  uint32_t n = 4;
  uint32_t f = 1;
  uint64_t seed = 1;
  SimTime link_min_us = 2000;
  SimTime link_max_us = 10000;
  SimTime delta_round_us = 24000;  // leader wait before the timeout rule fires
  Round k = 2;                     // silent-shard rounds before a Shift
  Round k_rotate = 1000000;        // rounds per DAG before a periodic Shift
  uint32_t batch = 300;
  uint32_t executors = 8;
  SimTime exec_cost_us = 50;
  ConflictPolicy policy = ConflictPolicy::kConvert;
  SimTime client_timeout_us = 200000;
  SimTime horizon_us = 20000000;
  Round max_round = std::numeric_limits<Round>::max();  // per DAG
  bool stop_when_done = true;
  std::vector<AdversarySpec> adversaries;
  std::vector<DelayRule> delay_rules;
  SmallBankSpec workload;
  // Called on every Normal block an honest-looking author seals; tests use
  // it to inject invalid results.
  std::function<void(ReplicaId, Block&)> tamper;

  // Throws std::invalid_argument describing the first problem.
  void validate() const;
};

struct ReplicaReport {
  ReplicaId id = 0;
  bool honest = true;
  std::vector<std::string> log;
  // "<dag>:<round>:<shard>:<kind>" per committed block, in order.
  std::vector<std::string> committed_blocks;
  std::vector<TxId> applied;
  Digest state_digest = 0;
  DagId final_dag = 1;
  uint64_t reconfigurations = 0;
  std::vector<Round> ending_rounds;
  SimTime max_idle_us = 0;  // longest eligible-but-not-proposing stretch
};

struct RunReport {
  uint64_t committed = 0;
  uint64_t submitted = 0;
  double tps = 0;
  double avg_latency_s = 0;
  uint64_t reexecutions = 0;
  uint64_t reconfigurations = 0;
  SimTime completion_us = 0;
  uint64_t invalid_blocks = 0;
  uint64_t audit_mismatches = 0;
  uint64_t retransmissions = 0;
  uint64_t events = 0;
  std::vector<ReplicaReport> replicas;
  std::vector<std::string> violations;

  // Canonical text form; equal for equal runs.
  std::string to_text() const;
};

// Overrides fields of `base` from a JSON object. Unknown keys are errors.
SimConfig config_from_json(const std::string& text, SimConfig base = {});

// Named scripted scenarios; "fig5" is a four-replica run in which shard 0's
// round-2 proposal reaches only replica 3 and shard 0 stalls.
SimConfig scenario_config(std::string_view name);

// Runs the event loop. `workload` transactions are submitted by clients at
// their submit_time.
RunReport run(const SimConfig& config, std::span<const TxPtr> workload);

// Generates `config.workload` and runs it.
RunReport run(const SimConfig& config);

// Checks agreement, per-proposer order and duplicate-free application over
// honest replicas; returns one line per violation.
std::vector<std::string> check_safety(const RunReport& report);

}  // namespace thunderbolt
