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

#include "thunderbolt/report.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace thunderbolt {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", std::isfinite(v) ? v : 0.0);
  return buf;
}

}  // namespace

std::string csv_row(const SimConfig& c, const RunReport& r) {
  std::string out;
  auto add = [&](const std::string& s) {
    if (!out.empty()) out += ",";
    out += s;
  };
  add(std::string(to_string(c.protocol)));
  add(std::to_string(c.n));
  add(std::to_string(c.f));
  add(std::to_string(c.executors));
  add(std::to_string(c.batch));
  add(num(c.workload.theta));
  add(num(c.workload.pr));
  add(num(c.workload.cross_pct));
  add(std::to_string(c.k));
  add(std::to_string(c.k_rotate));
  add(std::to_string(c.seed));
  add(std::to_string(r.committed));
  add(num(r.tps));
  add(num(r.avg_latency_s));
  add(std::to_string(r.reexecutions));
  add(std::to_string(r.reconfigurations));
  return out;
}

std::string jsonl_row(const SimConfig& c, const RunReport& r) {
  nlohmann::ordered_json j;
  j["protocol"] = std::string(to_string(c.protocol));
  j["replicas"] = c.n;
  j["f"] = c.f;
  j["executors"] = c.executors;
  j["batch"] = c.batch;
  j["theta"] = c.workload.theta;
  j["pr"] = c.workload.pr;
  j["cross_pct"] = c.workload.cross_pct;
  j["k"] = c.k;
  j["k_rotate"] = c.k_rotate;
  j["seed"] = c.seed;
  j["committed"] = r.committed;
  j["tps"] = std::isfinite(r.tps) ? r.tps : 0.0;
  j["avg_latency_s"] = std::isfinite(r.avg_latency_s) ? r.avg_latency_s : 0.0;
  j["reexec"] = r.reexecutions;
  j["reconfigs"] = r.reconfigurations;
  return j.dump();
}

}  // namespace thunderbolt
