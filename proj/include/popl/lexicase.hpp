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

// Lexicase selection over preferences and the generational search loop built
// on it: select with replacement, then perturb every parameter with Gaussian
// noise, and repeat.

#ifndef POPL_LEXICASE_HPP_
#define POPL_LEXICASE_HPP_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "popl/core.hpp"
#include "popl/rng.hpp"

namespace popl {

struct LexicaseConfig {
  std::size_t population_size = 100;
  std::size_t generations = 100;
  double mutation_sigma = 0.1;
  std::size_t pref_batch_size = 2048;
  // Generations between preference pool resamples.
  std::size_t refresh_interval = 1;
  // Leading selected individuals copied unmutated into the next generation.
  std::size_t elite_count = 0;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the first offending field.
  void Validate() const;
};

struct SelectionTrace {
  std::vector<std::size_t> shuffle_order;
  // Pool size after each preference in shuffle_order was applied (including
  // skipped ones, where the size is unchanged).
  std::vector<std::size_t> surviving_counts;
  std::size_t selected_idx = 0;
  std::vector<std::size_t> skipped_prefs;
};

// Applies preferences in the given order to the full candidate pool: keep
// only passers, restore the pool when nobody passes, stop at one survivor.
// Returns the surviving candidate indices in ascending order.
std::vector<std::size_t> LexicaseFilter(const PassMatrix& pm, std::span<const std::size_t> order,
                                        SelectionTrace* trace = nullptr);

// One selection event with a fresh shuffle. Ties among final survivors are
// broken uniformly at random.
std::pair<std::size_t, SelectionTrace> LexicaseSelectOne(const PassMatrix& pm, RandomStream& rng);

// `count` independent events with replacement. Each event draws from its own
// child stream, so the result is identical for any `jobs`.
std::vector<std::size_t> SelectPopulation(const PassMatrix& pm, std::size_t count,
                                          RandomStream& rng, int jobs = 1);

// Exact per-candidate selection probability, by enumerating every ordering
// of the preferences. Only for small matrices (at most 8 preferences).
std::vector<double> SelectionDistribution(const PassMatrix& pm);

// Copies the first elite_count entries, adds N(0, sigma^2) to every parameter
// of the rest. The input is not modified.
std::vector<Hypothesis> Mutate(std::span<const Hypothesis> population, double sigma,
                               std::size_t elite_count, RandomStream& rng);

// Supplies the preference batch for each generation. A pool is drawn without
// replacement on Refresh; Batch subsamples pref_batch_size from it. With
// pool_size 0 the pool is the batch itself.
class PreferenceSampler {
 public:
  explicit PreferenceSampler(std::vector<PreferencePair> prefs, std::size_t pool_size = 0);

  std::size_t dataset_size() const { return prefs_.size(); }
  void Refresh(std::size_t batch_size, RandomStream& rng);
  std::vector<PreferencePair> Batch(std::size_t batch_size, RandomStream& rng) const;

 private:
  std::vector<PreferencePair> prefs_;
  std::size_t pool_size_;
  std::vector<PreferencePair> pool_;
};

struct GenerationStats {
  std::size_t generation = 0;
  double mean_pass_rate = 0.0;
  double max_pass_rate = 0.0;
  std::size_t unique_candidates = 0;
};

struct PoplResult {
  // Selection output of the last generation, before any mutation.
  std::vector<Hypothesis> population;
  std::vector<GenerationStats> stats;
};

PoplResult RunPopl(std::vector<Hypothesis> initial, PreferenceSampler& sampler,
                   const LexicaseConfig& config, const PassEvaluator& evaluator, int jobs = 1);

}  // namespace popl

#endif  // POPL_LEXICASE_HPP_
