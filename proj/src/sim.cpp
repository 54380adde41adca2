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

#include "thunderbolt/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <variant>

#include "json.hpp"
#include "thunderbolt/reconfiguration.hpp"

namespace thunderbolt {

std::string_view to_string(Protocol p) {
  return p == Protocol::kThunderbolt ? "thunderbolt" : "tusk-serial";
}

Protocol parse_protocol(std::string_view s) {
  if (s == "thunderbolt") return Protocol::kThunderbolt;
  if (s == "tusk-serial") return Protocol::kTuskSerial;
  throw std::invalid_argument("unknown protocol '" + std::string(s) + "'");
}

namespace {

uint64_t parse_u64(const std::string& s, const std::string& what) {
  size_t used = 0;
  uint64_t v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::invalid_argument("bad " + what + " '" + s + "'");
  return v;
}

// "all" or "mod:k:r".
bool censored(const std::string& predicate, TxId id) {
  if (predicate == "all") return true;
  if (predicate.rfind("mod:", 0) == 0) {
    const auto colon = predicate.find(':', 4);
    const uint64_t k = parse_u64(predicate.substr(4, colon - 4), "censor modulus");
    const uint64_t r = parse_u64(predicate.substr(colon + 1), "censor residue");
    return k > 0 && id.value % k == r;
  }
  throw std::invalid_argument("bad censor predicate '" + predicate + "'");
}

}  // namespace

AdversarySpec parse_adversary(const std::string& text) {
  AdversarySpec a;
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("bad adversary '" + text + "'");
  const std::string kind = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  auto split = [&](char sep) {
    const auto at = rest.find(sep);
    if (at == std::string::npos) throw std::invalid_argument("bad adversary '" + text + "'");
    return std::make_pair(rest.substr(0, at), rest.substr(at + 1));
  };
  if (kind == "crash") {
    auto [r, t] = split('@');
    a.kind = AdversaryKind::kCrash;
    a.replica = static_cast<ReplicaId>(parse_u64(r, "replica"));
    a.at = static_cast<SimTime>(parse_u64(t, "time"));
  } else if (kind == "delay") {
    auto [r, d] = split(':');
    a.kind = AdversaryKind::kDelay;
    a.replica = static_cast<ReplicaId>(parse_u64(r, "replica"));
    a.extra_delay = static_cast<SimTime>(parse_u64(d, "delay"));
  } else if (kind == "censor") {
    a.kind = AdversaryKind::kCensor;
    const auto at = rest.find(':');
    a.replica = static_cast<ReplicaId>(parse_u64(rest.substr(0, at), "replica"));
    if (at != std::string::npos) a.predicate = rest.substr(at + 1);
    censored(a.predicate, TxId{0});  // validates the predicate
  } else if (kind == "halt") {
    auto [r, round] = split('@');
    a.kind = AdversaryKind::kHaltProposals;
    a.replica = static_cast<ReplicaId>(parse_u64(r, "replica"));
    a.round = parse_u64(round, "round");
  } else {
    throw std::invalid_argument("unknown adversary kind '" + kind + "'");
  }
  return a;
}

void SimConfig::validate() const {
  if (n != 3 * f + 1) throw std::invalid_argument("replicas must equal 3 * faults + 1");
  std::set<ReplicaId> faulty;
  for (const auto& a : adversaries) {
    if (a.replica >= n) throw std::invalid_argument("adversary replica out of range");
    faulty.insert(a.replica);
  }
  if (faulty.size() > f) throw std::invalid_argument("more faulty replicas than faults");
  if (link_min_us < 0 || link_max_us < link_min_us) throw std::invalid_argument("bad link delay range");
  if (batch == 0) throw std::invalid_argument("batch must be >= 1");
  if (executors == 0) throw std::invalid_argument("executors must be >= 1");
  if (k_rotate == 0) throw std::invalid_argument("k_rotate must be >= 1");
}

SimConfig config_from_json(const std::string& text, SimConfig base) {
  using nlohmann::json;
  const json j = json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  SimConfig c = std::move(base);
  for (const auto& [key, v] : j.items()) {
    if (key == "protocol") c.protocol = parse_protocol(v.get<std::string>());
    else if (key == "mode") {
      const auto m = v.get<std::string>();
      if (m != "protocol" && m != "bench") throw std::invalid_argument("mode must be protocol or bench");
      c.mode = m == "bench" ? SimMode::kBench : SimMode::kProtocol;
    } else if (key == "replicas") c.n = v.get<uint32_t>();
    else if (key == "faults") c.f = v.get<uint32_t>();
    else if (key == "seed") c.seed = v.get<uint64_t>();
    else if (key == "link_min_us") c.link_min_us = v.get<SimTime>();
    else if (key == "link_max_us") c.link_max_us = v.get<SimTime>();
    else if (key == "delta_round_us") c.delta_round_us = v.get<SimTime>();
    else if (key == "k") c.k = v.get<Round>();
    else if (key == "k_rotate") c.k_rotate = v.get<Round>();
    else if (key == "batch") c.batch = v.get<uint32_t>();
    else if (key == "executors") c.executors = v.get<uint32_t>();
    else if (key == "exec_cost_us") c.exec_cost_us = v.get<SimTime>();
    else if (key == "policy") {
      const auto p = v.get<std::string>();
      if (p != "skip" && p != "convert") throw std::invalid_argument("policy must be skip or convert");
      c.policy = p == "skip" ? ConflictPolicy::kSkip : ConflictPolicy::kConvert;
    } else if (key == "client_timeout_us") c.client_timeout_us = v.get<SimTime>();
    else if (key == "horizon_us") c.horizon_us = v.get<SimTime>();
    else if (key == "max_round") c.max_round = v.get<Round>();
    else if (key == "stop_when_done") c.stop_when_done = v.get<bool>();
    else if (key == "adversaries") {
      c.adversaries.clear();
      for (const auto& a : v) c.adversaries.push_back(parse_adversary(a.get<std::string>()));
    } else if (key == "workload") {
      for (const auto& [wk, wv] : v.items()) {
        if (wk == "accounts") c.workload.n_accounts = wv.get<uint32_t>();
        else if (wk == "theta") c.workload.theta = wv.get<double>();
        else if (wk == "pr") c.workload.pr = wv.get<double>();
        else if (wk == "cross_pct") c.workload.cross_pct = wv.get<double>();
        else if (wk == "count") c.workload.count = wv.get<uint32_t>();
        else if (wk == "seed") c.workload.seed = wv.get<uint64_t>();
        else throw std::invalid_argument("unknown workload key '" + wk + "'");
      }
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
  c.workload.n_shards = c.n;
  return c;
}

SimConfig scenario_config(std::string_view name) {
  if (name != "fig5") throw std::invalid_argument("unknown scenario '" + std::string(name) + "'");
  SimConfig c;
  c.n = 4;
  c.f = 1;
  c.k = 2;
  c.k_rotate = 6;
  c.seed = 5;
  c.workload.count = 0;
  c.workload.n_shards = 4;
  c.stop_when_done = false;
  c.horizon_us = 300000;
  // Shard 0's proposals from round 2 on reach replica 3 only, so its round-2
  // vertex never gathers a certificate and shard 0 stalls.
  for (ReplicaId to : {1u, 2u}) {
    DelayRule rule;
    rule.from = 0;
    rule.to = to;
    rule.kind = MessageKind::kProposal;
    rule.dag = 1;
    rule.min_round = 2;
    rule.drop = true;
    c.delay_rules.push_back(rule);
  }
  return c;
}

namespace {

constexpr ReplicaId kClient = std::numeric_limits<ReplicaId>::max();

struct ProposalMsg {
  BlockPtr block;
};
struct VoteMsg {
  DagId dag;
  Digest block;
  ReplicaId voter;
};
struct CertMsg {
  Certificate cert;
  BlockPtr block;
};
struct ClientMsg {
  TxPtr tx;
};
struct ProposalReady {
  DagId dag;
  BlockPtr block;
};
struct LeaderTimeout {
  DagId dag;
  Round round;
};
struct Kick {};
struct CrashNow {};
struct ClientSubmit {
  size_t index;
};
struct ClientTimer {
  size_t index;
};

using Payload = std::variant<ProposalMsg, VoteMsg, CertMsg, ClientMsg, ProposalReady, LeaderTimeout, Kick, CrashNow,
                             ClientSubmit, ClientTimer>;

struct Event {
  SimTime time;
  uint64_t seq;
  ReplicaId target;
  Payload payload;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    return std::tie(a.time, a.seq) > std::tie(b.time, b.seq);
  }
};

std::string block_key(const Block& b) {
  return std::to_string(b.dag) + ":" + std::to_string(b.round) + ":" + std::to_string(b.proposer) + ":" +
         std::string(to_string(b.kind));
}

class Simulation {
 public:
  Simulation(const SimConfig& config, std::span<const TxPtr> workload) : cfg_(config), net_rng_(config.seed) {
    cfg_.validate();
    for (size_t i = 0; i < workload.size(); ++i) {
      txs_.push_back({workload[i], std::nullopt});
      index_.emplace(workload[i]->id, i);
    }
    for (ReplicaId id = 0; id < cfg_.n; ++id) replicas_.push_back(make_replica(id));
    for (const auto& r : replicas_) {
      if (r.honest) {
        metrics_ = r.id;
        break;
      }
    }
  }

  RunReport run() {
    for (const auto& a : cfg_.adversaries) {
      if (a.kind == AdversaryKind::kCrash) push(a.at, a.replica, CrashNow{});
    }
    for (size_t i = 0; i < txs_.size(); ++i) push(txs_[i].tx->submit_time, kClient, ClientSubmit{i});
    for (auto& r : replicas_) push(0, r.id, Kick{});

    while (!queue_.empty()) {
      Event ev = queue_.top();
      if (ev.time > cfg_.horizon_us) break;
      queue_.pop();
      now_ = ev.time;
      ++events_;
      dispatch(ev);
      if (cfg_.stop_when_done && !txs_.empty() && committed_ == txs_.size()) break;
    }
    return report();
  }

 private:
  struct Instance {
    Instance(DagId dag, const SimConfig& c, ShardId own)
        : store(dag, c.n, c.f), shift(c.n, c.f, c.k, c.k_rotate, own), shard(own) {}
    DagStore store;
    ShiftState shift;
    ShardId shard;
    Round next_round = 0;
    bool busy = false;
    std::set<Round> timers;
    std::optional<Round> timed_out;
    std::optional<SimTime> eligible_since;
    bool passive = false;
    Round passive_limit = 0;
  };

  struct Replica {
    ReplicaId id = 0;
    bool honest = true;
    bool crashed = false;
    SimTime extra_delay = 0;
    std::optional<std::string> censor;
    std::optional<Round> halt_round;
    ShardAssignment assignment;
    std::unique_ptr<ShardEngine> engine;
    std::unique_ptr<Instance> cur;
    std::unique_ptr<Instance> old;
    std::map<DagId, std::vector<Payload>> future;
    SimTime apply_free = 0;
    uint64_t reexecutions = 0;
    uint64_t invalid_blocks = 0;
    uint64_t audit_mismatches = 0;
    ReplicaReport report;
  };

  struct ClientTx {
    TxPtr tx;
    std::optional<SimTime> committed_at;
  };

  Replica make_replica(ReplicaId id) {
    Replica r;
    r.id = id;
    r.report.id = id;
    for (const auto& a : cfg_.adversaries) {
      if (a.replica != id) continue;
      r.honest = false;
      switch (a.kind) {
        case AdversaryKind::kCrash: break;
        case AdversaryKind::kDelay: r.extra_delay += a.extra_delay; break;
        case AdversaryKind::kCensor: r.censor = a.predicate; break;
        case AdversaryKind::kHaltProposals: r.halt_round = a.round; break;
      }
    }
    r.report.honest = r.honest;
    r.assignment = ShardAssignment::identity(cfg_.n, 1);
    const ShardId shard = r.assignment.shard_of(id);
    EngineOptions eo;
    eo.n = cfg_.n;
    eo.f = cfg_.f;
    eo.batch = cfg_.batch;
    eo.policy = cfg_.policy;
    eo.serial = cfg_.protocol == Protocol::kTuskSerial;
    // Apply-lane parallelism is charged through the level count; running it
    // on the event thread keeps thread start-up out of the measured time.
    eo.apply_workers = 1;
    ExecutorOptions xo;
    xo.workers = cfg_.executors;
    xo.driver = cfg_.mode == SimMode::kBench ? ExecutorDriver::kThreaded : ExecutorDriver::kInterleaved;
    xo.seed = hash_combine(cfg_.seed, id);
    xo.shard = shard;
    xo.n_shards = cfg_.n;
    r.engine = std::make_unique<ShardEngine>(eo, id, shard, smallbank_genesis(), xo);
    r.cur = std::make_unique<Instance>(1, cfg_, shard);
    return r;
  }

  void push(SimTime at, ReplicaId target, Payload p) { queue_.push(Event{at, seq_++, target, std::move(p)}); }

  void log(Replica& r, const std::string& line) {
    r.report.log.push_back("t=" + std::to_string(now_) + " " + line);
  }

  SimTime link_delay() {
    const auto span = static_cast<uint64_t>(cfg_.link_max_us - cfg_.link_min_us) + 1;
    return cfg_.link_min_us + static_cast<SimTime>(net_rng_() % span);
  }

  void send(Replica& from, ReplicaId to, MessageKind kind, DagId dag, Round round, Payload p) {
    if (from.crashed) return;
    SimTime delay = link_delay() + from.extra_delay;
    for (const auto& rule : cfg_.delay_rules) {
      if (rule.from && *rule.from != from.id) continue;
      if (rule.to && *rule.to != to) continue;
      if (rule.kind && *rule.kind != kind) continue;
      if (rule.dag && *rule.dag != dag) continue;
      if (round < rule.min_round || round > rule.max_round) continue;
      if (rule.drop) return;
      delay += rule.extra;
    }
    push(now_ + delay, to, std::move(p));
  }

  void broadcast(Replica& from, MessageKind kind, DagId dag, Round round, const Payload& p) {
    for (ReplicaId to = 0; to < cfg_.n; ++to) {
      if (to != from.id) send(from, to, kind, dag, round, p);
    }
  }

  // Instance for `dag`, or nullptr; messages for a later DAG are buffered.
  Instance* instance_for(Replica& r, DagId dag, const Payload& p) {
    if (r.cur->store.dag() == dag) return r.cur.get();
    if (r.old && r.old->store.dag() == dag) return r.old.get();
    if (dag > r.cur->store.dag()) r.future[dag].push_back(p);
    return nullptr;
  }

  void dispatch(const Event& ev) {
    if (ev.target == kClient) {
      std::visit(
          [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ClientSubmit>) client_send(m.index);
            else if constexpr (std::is_same_v<T, ClientTimer>) client_timer(m.index);
          },
          ev.payload);
      return;
    }
    Replica& r = replicas_[ev.target];
    if (r.crashed) return;
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, ProposalMsg>) on_proposal(r, m, ev.payload);
          else if constexpr (std::is_same_v<T, VoteMsg>) on_vote(r, m);
          else if constexpr (std::is_same_v<T, CertMsg>) on_certificate(r, m, ev.payload);
          else if constexpr (std::is_same_v<T, ClientMsg>) on_client(r, m);
          else if constexpr (std::is_same_v<T, ProposalReady>) on_ready(r, m);
          else if constexpr (std::is_same_v<T, LeaderTimeout>) on_timeout(r, m);
          else if constexpr (std::is_same_v<T, Kick>) after_change(r);
          else if constexpr (std::is_same_v<T, CrashNow>) {
            r.crashed = true;
            log(r, "CRASH");
          }
        },
        ev.payload);
  }

  // Stores a vertex and votes for every vertex the insertion released.
  void insert_block(Replica& r, Instance& inst, const BlockPtr& block) {
    std::vector<BlockPtr> inserted;
    inst.store.insert(block, &inserted);
    for (const auto& b : inserted) {
      if (b->kind == BlockKind::kShift) inst.shift.on_shift(b->author, b->round);
      if (b->author == r.id) {
        cast_vote(r, inst, b->digest, r.id);
      } else {
        send(r, b->author, MessageKind::kVote, b->dag, b->round, VoteMsg{b->dag, b->digest, r.id});
      }
    }
  }

  void cast_vote(Replica& r, Instance& inst, Digest block, ReplicaId voter) {
    auto cert = inst.store.add_vote(block, voter);
    if (!cert) return;
    broadcast(r, MessageKind::kCertificate, cert->dag, cert->round, CertMsg{*cert, inst.store.get(block)});
  }

  void on_proposal(Replica& r, const ProposalMsg& m, const Payload& p) {
    Instance* inst = instance_for(r, m.block->dag, p);
    if (!inst) return;
    inst->shift.on_proposal(m.block->proposer, m.block->round);
    insert_block(r, *inst, m.block);
    after_change(r);
  }

  void on_vote(Replica& r, const VoteMsg& m) {
    Instance* inst = nullptr;
    if (r.cur->store.dag() == m.dag) inst = r.cur.get();
    else if (r.old && r.old->store.dag() == m.dag) inst = r.old.get();
    if (!inst) return;
    cast_vote(r, *inst, m.block, m.voter);
    after_change(r);
  }

  void on_certificate(Replica& r, const CertMsg& m, const Payload& p) {
    Instance* inst = instance_for(r, m.cert.dag, p);
    if (!inst) return;
    if (!inst->store.has(m.block->digest)) insert_block(r, *inst, m.block);
    inst->store.add_certificate(m.cert);
    after_change(r);
  }

  void on_client(Replica& r, const ClientMsg& m) {
    if (r.censor && censored(*r.censor, m.tx->id)) {
      log(r, "CENSOR tx=" + tx_label(*m.tx));
      return;
    }
    if (m.tx->home_shard() != r.cur->shard) return;
    r.engine->enqueue(m.tx);
  }

  void on_ready(Replica& r, const ProposalReady& m) {
    Instance* inst = nullptr;
    if (r.cur->store.dag() == m.dag) inst = r.cur.get();
    else if (r.old && r.old->store.dag() == m.dag) inst = r.old.get();
    if (!inst) return;
    inst->busy = false;
    inst->shift.on_proposal(m.block->proposer, m.block->round);
    insert_block(r, *inst, m.block);
    broadcast(r, MessageKind::kProposal, m.dag, m.block->round, ProposalMsg{m.block});
    after_change(r);
  }

  void on_timeout(Replica& r, const LeaderTimeout& m) {
    Instance& inst = *r.cur;
    if (inst.store.dag() != m.dag || inst.busy || inst.next_round != m.round) return;
    inst.timed_out = m.round;
    log(r, "TIMEOUT dag=" + std::to_string(m.dag) + " round=" + std::to_string(m.round));
    after_change(r);
  }

  void after_change(Replica& r) {
    if (r.crashed) return;
    process_commits(r);
    try_propose(r, *r.cur);
    if (r.old) try_propose(r, *r.old);
  }

  void process_commits(Replica& r) {
    Instance& inst = *r.cur;
    for (const auto& cl : inst.store.try_commit()) {
      for (const auto& b : cl.blocks) r.report.committed_blocks.push_back(block_key(*b));
      const auto ending = inst.shift.detect_ending_round(cl);
      const auto started = std::chrono::steady_clock::now();
      ApplyReport ap = r.engine->commit_apply(inst.store, cl);
      for (const auto& line : ap.log) log(r, line);
      SimTime cost = cfg_.protocol == Protocol::kTuskSerial
                         ? static_cast<SimTime>(ap.serial_executions) * cfg_.exec_cost_us
                         : static_cast<SimTime>(ap.validation_levels + ap.cross_levels) * cfg_.exec_cost_us;
      if (cfg_.mode == SimMode::kBench) cost += wall_us(started);
      const SimTime finish = std::max(now_, r.apply_free) + cost;
      r.apply_free = finish;
      r.invalid_blocks += ap.invalid_blocks;
      r.audit_mismatches += ap.audit_mismatches;
      for (const auto& tx : ap.applied) {
        r.report.applied.push_back(tx->id);
        if (r.id != metrics_) continue;
        auto it = index_.find(tx->id);
        if (it != index_.end() && !txs_[it->second].committed_at) {
          txs_[it->second].committed_at = finish;
          ++committed_;
        }
      }
      if (ending) {
        log(r, "ENDING dag=" + std::to_string(inst.store.dag()) + " round=" + std::to_string(*ending));
        transition(r, *ending);
        return;
      }
    }
  }

  void transition(Replica& r, Round ending) {
    r.old = std::move(r.cur);
    r.old->passive = true;
    r.old->passive_limit = ending + 1;
    r.assignment = next_assignment(r.assignment);
    const ShardId shard = r.assignment.shard_of(r.id);
    r.engine->start_dag(shard);
    r.cur = std::make_unique<Instance>(r.assignment.dag, cfg_, shard);
    ++r.report.reconfigurations;
    r.report.ending_rounds.push_back(ending);
    r.report.final_dag = r.assignment.dag;
    log(r, "NEWDAG id=" + std::to_string(r.assignment.dag) + " assignment=" + r.assignment.to_string());
    auto it = r.future.find(r.assignment.dag);
    if (it != r.future.end()) {
      for (auto& p : it->second) push(now_, r.id, std::move(p));
    }
    r.future.erase(r.future.begin(), r.future.upper_bound(r.assignment.dag));
    push(now_, r.id, Kick{});
  }

  static SimTime wall_us(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - since).count();
  }

  void try_propose(Replica& r, Instance& inst) {
    if (inst.busy) return;
    const Round round = inst.next_round;
    if (inst.passive ? round > inst.passive_limit : round > cfg_.max_round) return;
    if (r.halt_round && round >= *r.halt_round) return;
    auto parents = inst.store.parents_for(inst.shard, round);
    if (!parents) return;
    if (!inst.eligible_since) inst.eligible_since = now_;

    Block block;
    SimTime cost = 0;
    if (inst.passive) {
      block.proposer = inst.shard;
      block.author = r.id;
      block.round = round;
      block.dag = inst.store.dag();
      block.kind = BlockKind::kSkip;
      log(r, "PROPOSE dag=" + std::to_string(block.dag) + " round=" + std::to_string(round) +
                 " shard=" + std::to_string(inst.shard) + " kind=Skip singles=0 crosses=0");
    } else {
      const bool timed_out = inst.timed_out == round;
      if (!timed_out && r.engine->must_wait_for_leader(inst.store, round)) {
        if (inst.timers.insert(round).second) {
          push(now_ + cfg_.delta_round_us, r.id, LeaderTimeout{inst.store.dag(), round});
        }
        return;
      }
      auto decision = inst.shift.maybe_emit_shift(round);
      if (decision) {
        std::string line = "SHIFT dag=" + std::to_string(inst.store.dag()) + " round=" + std::to_string(round) +
                           " reason=" + std::string(to_string(decision->reason));
        if (decision->silent_shard) line += " silent=" + std::to_string(*decision->silent_shard);
        log(r, line);
      }
      const auto started = std::chrono::steady_clock::now();
      Proposal p = r.engine->build_proposal(inst.store, round, timed_out, decision.has_value());
      for (const auto& line : p.log) log(r, line);
      r.reexecutions += p.reexecutions;
      const uint64_t w = cfg_.executors;
      cost = static_cast<SimTime>((p.executions + w - 1) / w) * cfg_.exec_cost_us;
      if (cfg_.mode == SimMode::kBench) cost += wall_us(started);
      block = std::move(p.block);
    }
    block.parents = std::move(*parents);
    if (cfg_.tamper && block.kind == BlockKind::kNormal) cfg_.tamper(r.id, block);
    block.seal();

    r.report.max_idle_us = std::max(r.report.max_idle_us, now_ - *inst.eligible_since);
    inst.eligible_since.reset();
    inst.busy = true;
    inst.next_round = round + 1;
    push(now_ + cost, r.id, ProposalReady{block.dag, std::make_shared<const Block>(std::move(block))});
  }

  // Clients route by the most advanced assignment among live honest replicas.
  ReplicaId route(const Transaction& tx) const {
    const ShardAssignment* best = nullptr;
    for (const auto& r : replicas_) {
      if (r.honest && !r.crashed && (!best || r.assignment.dag > best->dag)) best = &r.assignment;
    }
    if (!best) best = &replicas_.front().assignment;
    return best->proposer_of[tx.home_shard()];
  }

  void client_send(size_t index) {
    const TxPtr& tx = txs_[index].tx;
    if (txs_[index].committed_at) return;
    push(now_ + link_delay(), route(*tx), ClientMsg{tx});
    push(now_ + cfg_.client_timeout_us, kClient, ClientTimer{index});
  }

  void client_timer(size_t index) {
    if (txs_[index].committed_at) return;
    ++retransmissions_;
    client_send(index);
  }

  RunReport report() {
    RunReport out;
    out.submitted = txs_.size();
    out.committed = committed_;
    out.events = events_;
    out.retransmissions = retransmissions_;
    SimTime last = 0;
    double latency = 0;
    for (const auto& t : txs_) {
      if (!t.committed_at) continue;
      last = std::max(last, *t.committed_at);
      latency += static_cast<double>(*t.committed_at - t.tx->submit_time) / 1e6;
    }
    out.completion_us = last;
    out.tps = last > 0 ? static_cast<double>(committed_) / (static_cast<double>(last) / 1e6) : 0.0;
    out.avg_latency_s = committed_ > 0 ? latency / static_cast<double>(committed_) : 0.0;
    for (auto& r : replicas_) {
      if (r.honest) out.reexecutions += r.reexecutions;
      r.report.state_digest = r.engine->state().digest();
      r.report.final_dag = r.assignment.dag;
      if (r.id == metrics_) {
        out.reconfigurations = r.report.reconfigurations;
        out.invalid_blocks = r.invalid_blocks;
        out.audit_mismatches = r.audit_mismatches;
      }
      out.replicas.push_back(std::move(r.report));
    }
    out.violations = check_safety(out);
    return out;
  }

  SimConfig cfg_;
  std::mt19937_64 net_rng_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  uint64_t seq_ = 0;
  SimTime now_ = 0;
  uint64_t events_ = 0;
  std::vector<Replica> replicas_;
  std::vector<ClientTx> txs_;
  std::unordered_map<TxId, size_t, TxIdHash> index_;
  ReplicaId metrics_ = 0;
  uint64_t committed_ = 0;
  uint64_t retransmissions_ = 0;
};

template <typename T>
bool is_prefix(const std::vector<T>& a, const std::vector<T>& b) {
  const auto& shorter = a.size() <= b.size() ? a : b;
  const auto& longer = a.size() <= b.size() ? b : a;
  return std::equal(shorter.begin(), shorter.end(), longer.begin());
}

}  // namespace

std::vector<std::string> check_safety(const RunReport& report) {
  std::vector<std::string> out;
  std::vector<const ReplicaReport*> honest;
  for (const auto& r : report.replicas) {
    if (r.honest) honest.push_back(&r);
  }
  for (size_t i = 0; i < honest.size(); ++i) {
    const auto& a = *honest[i];
    for (size_t j = i + 1; j < honest.size(); ++j) {
      const auto& b = *honest[j];
      if (!is_prefix(a.committed_blocks, b.committed_blocks)) {
        out.push_back("committed blocks diverge between replicas " + std::to_string(a.id) + " and " +
                      std::to_string(b.id));
      }
      if (!is_prefix(a.applied, b.applied)) {
        out.push_back("applied order diverges between replicas " + std::to_string(a.id) + " and " +
                      std::to_string(b.id));
      }
    }
    std::set<TxId> seen;
    for (TxId id : a.applied) {
      if (!seen.insert(id).second) out.push_back("replica " + std::to_string(a.id) + " applied " + to_string(id) + " twice");
    }
    // Rounds of each (dag, shard) appear in increasing order.
    std::map<std::pair<std::string, std::string>, uint64_t> last;
    for (const auto& key : a.committed_blocks) {
      std::istringstream is(key);
      std::string dag, round, shard;
      std::getline(is, dag, ':');
      std::getline(is, round, ':');
      std::getline(is, shard, ':');
      const uint64_t rn = std::stoull(round);
      auto [it, fresh] = last.try_emplace({dag, shard}, rn);
      if (!fresh) {
        if (rn <= it->second) {
          out.push_back("replica " + std::to_string(a.id) + " committed shard " + shard + " round " + round +
                        " out of order in dag " + dag);
        }
        it->second = rn;
      }
    }
  }
  return out;
}

std::string RunReport::to_text() const {
  std::ostringstream os;
  char buf[64];
  os << "committed " << committed << "\nsubmitted " << submitted << "\n";
  std::snprintf(buf, sizeof buf, "%.9g", tps);
  os << "tps " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.9g", avg_latency_s);
  os << "avg_latency_s " << buf << "\n";
  os << "reexec " << reexecutions << "\nreconfigs " << reconfigurations << "\ncompletion_us " << completion_us
     << "\ninvalid_blocks " << invalid_blocks << "\naudit_mismatches " << audit_mismatches << "\nretransmissions "
     << retransmissions << "\nevents " << events << "\n";
  for (const auto& v : violations) os << "violation " << v << "\n";
  for (const auto& r : replicas) {
    os << "replica " << r.id << (r.honest ? " honest" : " faulty") << " dag " << r.final_dag << " reconfigs "
       << r.reconfigurations << " digest " << std::hex << r.state_digest << std::dec << " max_idle_us "
       << r.max_idle_us << "\n";
    for (const auto& b : r.committed_blocks) os << "  block " << b << "\n";
    for (TxId id : r.applied) os << "  applied " << to_string(id) << "\n";
    for (const auto& line : r.log) os << "  log " << line << "\n";
  }
  return os.str();
}

RunReport run(const SimConfig& config, std::span<const TxPtr> workload) {
  Simulation sim(config, workload);
  return sim.run();
}

RunReport run(const SimConfig& config) {
  SmallBankSpec spec = config.workload;
  spec.n_shards = config.n;
  const auto txs = spec.count > 0 ? generate(spec) : std::vector<TxPtr>{};
  return run(config, txs);
}

}  // namespace thunderbolt
