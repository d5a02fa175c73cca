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

// popl run      --config cfg.json [--preset name] [--seed N] [--out dir] [--jobs K]
// popl gen-data --config cfg.json [--preset name] --out dir
// popl eval     --population pop.jsonl --dataset dir --out metrics.csv

#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "popl/errors.hpp"
#include "popl/experiment.hpp"
#include "popl/io.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

using nlohmann::json;

// Reads the config file (optional when a preset is given) and applies the
// command-line overrides. Prints validation errors and returns nullopt.
std::optional<popl::ExperimentConfig> LoadConfig(const std::string& path,
                                                 const std::string& preset,
                                                 const std::optional<std::uint64_t>& seed,
                                                 const std::string& out,
                                                 const std::optional<int>& jobs) {
  json raw = json::object();
  if (!path.empty()) {
    try {
      raw = json::parse(popl::ReadFile(path));
    } catch (const std::exception& e) {
      std::cerr << "error: cannot read config " << path << ": " << e.what() << '\n';
      return std::nullopt;
    }
  }
  if (raw.is_object()) {
    if (seed) raw["seed"] = *seed;
    if (!out.empty()) raw["output_dir"] = out;
    if (jobs) raw["jobs"] = *jobs;
  }
  auto result = popl::ValidateConfig(raw, preset);
  if (!result.ok()) {
    for (const auto& e : result.errors) std::cerr << "config error: " << e << '\n';
    return std::nullopt;
  }
  return result.config;
}

int GenerateData(const popl::ExperimentConfig& config, const std::string& out) {
  try {
    auto [data, manifest] = popl::GenerateDataset(config);
    popl::WriteDataset(out, data, manifest);
    spdlog::info("dataset written to {}", out);
    return 0;
  } catch (const popl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int Evaluate(const std::string& population_path, const std::string& dataset_dir,
             const std::string& out, const std::string& method, int jobs) {
  try {
    json manifest;
    const popl::Dataset data = popl::ReadDataset(dataset_dir, &manifest);
    std::istringstream in(popl::ReadFile(population_path));
    const auto population = popl::ReadPopulation(in);
    const auto seed = manifest.value("seed", std::uint64_t{0});
    const popl::EvaluationOutput result = popl::EvaluatePopulation(
        population, data, manifest, popl::EvalConfig{}, method, seed, jobs);
    std::ostringstream csv;
    popl::WriteMetricsCsv(csv, result.metrics);
    popl::WriteFile(out, csv.str());
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  popl::ConfigureLogging();
  CLI::App app{"Pareto optimal preference learning experiments"};
  app.require_subcommand(1);

  std::string config_path, preset, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  auto* run = app.add_subcommand("run", "Run an experiment and write its outputs");
  run->add_option("--config", config_path, "Experiment config (JSON)");
  run->add_option("--preset", preset, "Preset to start from");
  run->add_option("--seed", seed, "Root seed");
  run->add_option("--out", out, "Output directory");
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::string gen_config, gen_preset, gen_out;
  auto* gen = app.add_subcommand("gen-data", "Generate and write a dataset");
  gen->add_option("--config", gen_config, "Experiment config (JSON)");
  gen->add_option("--preset", gen_preset, "Preset to start from");
  gen->add_option("--out", gen_out, "Dataset directory")->required();

  std::string pop_path, dataset_dir, metrics_out, method = "popl";
  int eval_jobs = 1;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved population on a saved dataset");
  eval->add_option("--population", pop_path, "Population JSONL")->required();
  eval->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  eval->add_option("--out", metrics_out, "Metrics CSV to write")->required();
  eval->add_option("--method", method, "Method label for the metrics rows");
  eval->add_option("--jobs", eval_jobs, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*run) {
    if (config_path.empty() && preset.empty()) {
      std::cerr << "config error: run needs --config or --preset\n";
      return kExitConfig;
    }
    const auto config = LoadConfig(config_path, preset, seed, out, jobs);
    if (!config) return kExitConfig;
    return popl::RunExperiment(*config);
  }
  if (*gen) {
    if (gen_config.empty() && gen_preset.empty()) {
      std::cerr << "config error: gen-data needs --config or --preset\n";
      return kExitConfig;
    }
    const auto config = LoadConfig(gen_config, gen_preset, std::nullopt, "", std::nullopt);
    if (!config) return kExitConfig;
    return GenerateData(*config, gen_out);
  }
  return Evaluate(pop_path, dataset_dir, metrics_out, method, eval_jobs);
}
