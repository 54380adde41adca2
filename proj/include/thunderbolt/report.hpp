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

#include <string>

#include "thunderbolt/sim.hpp"

namespace thunderbolt {

// Stable metrics schema; one row per run.
inline constexpr const char* kCsvHeader =
    "protocol,replicas,f,executors,batch,theta,pr,cross_pct,k,k_rotate,seed,committed,tps,avg_latency_s,reexec,"
    "reconfigs";

std::string csv_row(const SimConfig& config, const RunReport& report);

// The same fields as one JSON object on a single line.
std::string jsonl_row(const SimConfig& config, const RunReport& report);

}  // namespace thunderbolt
