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

#ifndef POPL_EXPERIMENT_HPP_
#define POPL_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "popl/baselines.hpp"
#include "popl/domains.hpp"
#include "popl/io.hpp"
#include "popl/lexicase.hpp"

namespace popl {

struct StatelessDomainConfig {
  StatelessDatasetSpec data;
  int embed_dim = 64;
  int hidden_width = 64;
};

struct GridDomainConfig {
  GridDatasetSpec data;
  int max_steps = 40;
  double discount = 0.95;
  // Pseudo-count for the behaviour-cloned starting policy.
  double bc_laplace = 1.0;
};

struct PoplMethodConfig {
  LexicaseConfig lexicase;
  // Preferences drawn per refresh; batches are subsampled from this pool.
  std::size_t pool_size = 0;
  // Standard deviation of the initial population around its centre (zero
  // weights for rewards, the cloned policy for tabular policies).
  double init_sigma = 1.0;
};

struct EvalConfig {
  double coverage_threshold = 0.9;
  std::size_t rollouts = 200;
  std::size_t top_k = 10;
  double fairness_q = 0.1;
  std::size_t curve_points = 101;
  // Door-usage rate a catered policy needs to count as serving its group.
  double door_threshold = 0.8;
};

struct ExperimentConfig {
  std::string experiment;  // "stateless" | "gridworld"
  std::string method;      // "popl" | "brex" | "multicpl" | "bc"
  std::uint64_t seed = 0;
  std::string output_dir = "popl_out";
  int jobs = 1;
  // Existing dataset to load instead of generating one.
  std::string dataset_dir;
  StatelessDomainConfig stateless;
  GridDomainConfig grid;
  PoplMethodConfig popl;
  MCMCConfig brex;
  CPLConfig multicpl;
  EvalConfig eval;
};

struct ValidationResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
};

std::vector<std::string> PresetNames();
// Throws ConfigError for an unknown preset.
nlohmann::json PresetJson(const std::string& name);

// Applies `raw` on top of the named preset (or on top of built-in defaults
// when preset is empty) and checks every field. A "preset" key inside raw is
// honoured when no preset argument is given. All violations are reported.
ValidationResult ValidateConfig(const nlohmann::json& raw, const std::string& preset = "");

nlohmann::json ConfigToJson(const ExperimentConfig& config);
// Hash of the resolved config, excluding output_dir and jobs, which do not
// affect results.
std::string ConfigHash(const ExperimentConfig& config);

// Seeds for the dataset, method and evaluation streams of a root seed.
struct SeedFanout {
  std::uint64_t dataset;
  std::uint64_t method;
  std::uint64_t eval;
};
SeedFanout FanOutSeed(std::uint64_t seed);

// Generates the dataset described by config and the dataset manifest that
// lets it be reloaded and evaluated on its own.
std::pair<Dataset, nlohmann::json> GenerateDataset(const ExperimentConfig& config);

struct EvaluationOutput {
  std::vector<MetricRow> metrics;
  // Extra CSV files keyed by file name.
  std::map<std::string, std::string> files;
};

// Catering, coverage and accuracy for every group, plus domain extras
// (reward curves for the stateless domain, rollouts and occupancy for the
// gridworld). dataset_manifest is the one written next to the dataset.
EvaluationOutput EvaluatePopulation(std::span<const Hypothesis> population, const Dataset& data,
                                    const nlohmann::json& dataset_manifest, const EvalConfig& eval,
                                    const std::string& method, std::uint64_t seed, int jobs = 1);

struct RunOutput {
  std::vector<Hypothesis> population;
  std::vector<GenerationStats> stats;
  EvaluationOutput evaluation;
  // Files written to output_dir, with their content hashes.
  std::map<std::string, std::string> file_hashes;
};

// Runs the experiment and writes its outputs. Throws on failure.
RunOutput ExecuteExperiment(const ExperimentConfig& config);

// Exit status wrapper: 0 on success, 1 on a runtime failure.
int RunExperiment(const ExperimentConfig& config);

// Sets the log level from POPL_LOG (trace, debug, info, warn, error, off).
void ConfigureLogging();

}  // namespace popl

#endif  // POPL_EXPERIMENT_HPP_
