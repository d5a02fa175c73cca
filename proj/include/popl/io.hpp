// Copyright 2026 The POPL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// File formats.
//
//   segments.jsonl     {"id": 3, "steps": [[state, action], ...]}
//                      tabular states are integers; scalar states are reals
//                      and carry a null action.
//   <split>.jsonl      {"winner": 0, "loser": 1, "group": 0, "annotator": 7}
//   population.jsonl   {"kind": "reward", "weights": [...]} or
//                      {"kind": "policy", "num_states": S, "num_actions": A,
//                       "logits": [...row-major...]}
//   stats.csv          generation,mean_pass_rate,max_pass_rate,unique_candidates
//   metrics.csv        method,group,metric,value,seed
//   occupancy_*.csv    one row per grid row, one column per grid column
//   reward_curves.csv  a,group,reward

#ifndef POPL_IO_HPP_
#define POPL_IO_HPP_

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "popl/core.hpp"
#include "popl/domains.hpp"
#include "popl/lexicase.hpp"

namespace popl {

void WriteSegments(std::ostream& out, const SegmentSet& segments);
// num_states / num_actions are recorded on the result (0 for scalar sets).
SegmentSet ReadSegments(std::istream& in, int num_states, int num_actions);

void WritePreferences(std::ostream& out, std::span<const Preference> prefs);
std::vector<Preference> ReadPreferences(std::istream& in);

nlohmann::json HypothesisToJson(const Hypothesis& h);
Hypothesis HypothesisFromJson(const nlohmann::json& j);
void WritePopulation(std::ostream& out, std::span<const Hypothesis> population);
std::vector<Hypothesis> ReadPopulation(std::istream& in);

void WriteStatsCsv(std::ostream& out, std::span<const GenerationStats> stats);

struct MetricRow {
  std::string method;
  std::string group;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
};
void WriteMetricsCsv(std::ostream& out, std::span<const MetricRow> rows);
std::vector<MetricRow> ReadMetricsCsv(std::istream& in);

// Occupancy indexed by state, written as a height x width matrix.
void WriteOccupancyCsv(std::ostream& out, std::span<const double> occupancy, int width,
                       int height);

// Shortest representation that parses back to the same double.
std::string FormatDouble(double v);

// 64-bit FNV-1a, hex encoded.
std::string ContentHash(std::string_view bytes);

// Dataset directory: segments.jsonl, train.jsonl, holdout_<g>.jsonl,
// test_<g>.jsonl, demos.jsonl (gridworld) and manifest.json. The manifest
// carries "num_states"/"num_actions" and whatever the caller adds.
void WriteDataset(const std::filesystem::path& dir, const Dataset& data,
                  nlohmann::json manifest);
// Oracles are not serialized; callers rebuild them from the manifest.
Dataset ReadDataset(const std::filesystem::path& dir, nlohmann::json* manifest = nullptr);

std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, std::string_view contents);

}  // namespace popl

#endif  // POPL_IO_HPP_
