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

// Command-line entry point: `run` executes one simulation and writes a
// metrics row plus per-replica logs; `fuzz` runs the serializability fuzzer.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "thunderbolt/fuzz.hpp"
#include "thunderbolt/report.hpp"
#include "thunderbolt/sim.hpp"

namespace fs = std::filesystem;
using namespace thunderbolt;

namespace {

constexpr int kUsageError = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct RunFlags {
  std::string protocol = "thunderbolt";
  std::string mode = "protocol";
  uint32_t replicas = 4;
  uint32_t faults = 1;
  uint32_t batch = 300;
  uint32_t executors = 8;
  double theta = 0.85;
  double pr = 0.5;
  double cross_pct = 0;
  Round k = 2;
  Round k_rotate = 1000000;
  uint64_t seed = 1;
  uint32_t txs = 1000;
  uint32_t accounts = 10000;
  std::string policy = "convert";
  std::vector<std::string> adversaries;
  std::string scenario;
  std::string config;
  std::string out = "out";
  std::string format = "csv";
};

int cmd_run(const RunFlags& fl, const CLI::App& app) {
  SimConfig c;
  if (!fl.scenario.empty()) c = scenario_config(fl.scenario);
  if (!fl.config.empty()) c = config_from_json(read_file(fl.config), c);
  auto given = [&](const char* name) { return app.count(name) > 0; };
  // Explicit flags override the scenario and the config file.
  if (given("--protocol")) c.protocol = parse_protocol(fl.protocol);
  if (given("--mode")) c.mode = fl.mode == "bench" ? SimMode::kBench : SimMode::kProtocol;
  if (given("--replicas") || fl.scenario.empty()) c.n = fl.replicas;
  if (given("--faults") || fl.scenario.empty()) c.f = fl.faults;
  if (given("--batch")) c.batch = fl.batch;
  if (given("--executors")) c.executors = fl.executors;
  if (given("--theta")) c.workload.theta = fl.theta;
  if (given("--pr")) c.workload.pr = fl.pr;
  if (given("--cross-pct")) c.workload.cross_pct = fl.cross_pct;
  if (given("--k")) c.k = fl.k;
  if (given("--k-rotate")) c.k_rotate = fl.k_rotate;
  if (given("--seed")) {
    c.seed = fl.seed;
    c.workload.seed = fl.seed;
  }
  if (given("--txs")) c.workload.count = fl.txs;
  if (given("--accounts")) c.workload.n_accounts = fl.accounts;
  if (given("--policy")) c.policy = fl.policy == "skip" ? ConflictPolicy::kSkip : ConflictPolicy::kConvert;
  for (const auto& a : fl.adversaries) c.adversaries.push_back(parse_adversary(a));
  c.workload.n_shards = c.n;
  c.validate();

  RunReport rep = run(c);

  fs::create_directories(fl.out);
  const bool csv = fl.format == "csv";
  {
    std::ofstream m(fs::path(fl.out) / (csv ? "metrics.csv" : "metrics.jsonl"));
    if (csv) m << kCsvHeader << "\n" << csv_row(c, rep) << "\n";
    else m << jsonl_row(c, rep) << "\n";
  }
  for (const auto& r : rep.replicas) {
    std::ofstream l(fs::path(fl.out) / ("replica_" + std::to_string(r.id) + ".log"));
    for (const auto& line : r.log) l << line << "\n";
  }
  {
    std::ofstream t(fs::path(fl.out) / "report.txt");
    t << rep.to_text();
  }
  if (csv) std::cout << kCsvHeader << "\n" << csv_row(c, rep) << "\n";
  else std::cout << jsonl_row(c, rep) << "\n";
  for (const auto& v : rep.violations) std::cerr << "violation: " << v << "\n";
  return rep.violations.empty() ? 0 : 1;
}

int cmd_fuzz(uint64_t n, uint64_t seed, const std::string& inject, bool threaded) {
  FuzzOptions o;
  o.cases = n;
  o.seed = seed;
  o.skip_read_paths = inject == "skip-path-rule";
  o.driver = threaded ? ExecutorDriver::kThreaded : ExecutorDriver::kInterleaved;
  auto failure = run_fuzz(o);
  if (!failure) {
    std::cout << "fuzz: " << n << " cases passed (seed " << seed << ")\n";
    return 0;
  }
  std::cout << "fuzz: counterexample\n" << failure->dump;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sharded DAG consensus simulator with concurrent preplay"};
  app.require_subcommand(1);

  RunFlags fl;
  auto* run_cmd = app.add_subcommand("run", "run one simulation");
  run_cmd->add_option("--protocol", fl.protocol)->check(CLI::IsMember({"thunderbolt", "tusk-serial"}));
  run_cmd->add_option("--mode", fl.mode, "protocol (deterministic) or bench (real threads)")
      ->check(CLI::IsMember({"protocol", "bench"}));
  run_cmd->add_option("--replicas", fl.replicas)->check(CLI::PositiveNumber);
  run_cmd->add_option("--faults", fl.faults);
  run_cmd->add_option("--batch", fl.batch)->check(CLI::PositiveNumber);
  run_cmd->add_option("--executors", fl.executors)->check(CLI::PositiveNumber);
  run_cmd->add_option("--theta", fl.theta)->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--pr", fl.pr)->check(CLI::Range(0.0, 1.0));
  run_cmd->add_option("--cross-pct", fl.cross_pct)->check(CLI::Range(0.0, 100.0));
  run_cmd->add_option("--k", fl.k);
  run_cmd->add_option("--k-rotate", fl.k_rotate)->check(CLI::PositiveNumber);
  run_cmd->add_option("--seed", fl.seed);
  run_cmd->add_option("--txs", fl.txs, "number of client transactions");
  run_cmd->add_option("--accounts", fl.accounts)->check(CLI::Range(2u, 100000000u));
  run_cmd->add_option("--policy", fl.policy)->check(CLI::IsMember({"skip", "convert"}));
  run_cmd->add_option("--adversary", fl.adversaries,
                      "crash:R@T | delay:R:US | censor:R[:all|mod:K:V] | halt:R@ROUND");
  run_cmd->add_option("--scenario", fl.scenario)->check(CLI::IsMember({"fig5"}));
  run_cmd->add_option("--config", fl.config, "JSON config file")->check(CLI::ExistingFile);
  run_cmd->add_option("--out", fl.out, "output directory");
  run_cmd->add_option("--format", fl.format)->check(CLI::IsMember({"csv", "jsonl"}));

  uint64_t fuzz_n = 1000, fuzz_seed = 1;
  std::string inject;
  bool threaded = false;
  auto* fuzz_cmd = app.add_subcommand("fuzz", "serializability fuzzing of the concurrent executor");
  fuzz_cmd->add_option("--n", fuzz_n, "number of random batches");
  fuzz_cmd->add_option("--seed", fuzz_seed);
  fuzz_cmd->add_option("--inject-bug", inject)->check(CLI::IsMember({"skip-path-rule"}));
  fuzz_cmd->add_flag("--threaded", threaded, "use OS threads instead of the seeded interleaver");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return cmd_run(fl, *run_cmd);
    return cmd_fuzz(fuzz_n, fuzz_seed, inject, threaded);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
