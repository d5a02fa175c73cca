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

#include "popl/lexicase.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "popl/errors.hpp"
#include "popl/parallel.hpp"

namespace popl {

void LexicaseConfig::Validate() const {
  if (population_size == 0) throw ConfigError("population_size must be positive");
  if (generations == 0) throw ConfigError("generations must be positive");
  if (!(mutation_sigma > 0.0)) throw ConfigError("mutation_sigma must be positive");
  if (pref_batch_size == 0) throw ConfigError("pref_batch_size must be positive");
  if (refresh_interval == 0) throw ConfigError("refresh_interval must be positive");
  if (elite_count > population_size) {
    throw ConfigError("elite_count must not exceed population_size");
  }
}

std::vector<std::size_t> LexicaseFilter(const PassMatrix& pm, std::span<const std::size_t> order,
                                        SelectionTrace* trace) {
  std::vector<std::size_t> pool(pm.num_candidates());
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<std::size_t> next;
  next.reserve(pool.size());
  for (std::size_t pref : order) {
    if (pool.size() <= 1) break;
    next.clear();
    for (std::size_t c : pool) {
      if (pm.passes(c, pref)) next.push_back(c);
    }
    if (next.empty()) {
      // Nobody passes: likely contradicts an earlier preference, so skip it.
      if (trace != nullptr) trace->skipped_prefs.push_back(pref);
    } else {
      pool.swap(next);
    }
    if (trace != nullptr) trace->surviving_counts.push_back(pool.size());
  }
  return pool;
}

std::pair<std::size_t, SelectionTrace> LexicaseSelectOne(const PassMatrix& pm, RandomStream& rng) {
  if (pm.num_candidates() == 0) throw InvalidInput("lexicase selection on an empty population");
  SelectionTrace trace;
  trace.shuffle_order.resize(pm.num_preferences());
  std::iota(trace.shuffle_order.begin(), trace.shuffle_order.end(), 0);
  rng.Shuffle(trace.shuffle_order);
  const auto survivors = LexicaseFilter(pm, trace.shuffle_order, &trace);
  trace.selected_idx = survivors.size() == 1 ? survivors.front() : survivors[rng.Index(survivors.size())];
  return {trace.selected_idx, std::move(trace)};
}

std::vector<std::size_t> SelectPopulation(const PassMatrix& pm, std::size_t count,
                                          RandomStream& rng, int jobs) {
  if (pm.num_candidates() == 0) throw InvalidInput("lexicase selection on an empty population");
  const RandomStream base(rng.engine()());
  std::vector<std::size_t> selected(count);
  ParallelFor(count, jobs, [&](std::size_t e) {
    RandomStream event_rng = base.Child(e);
    selected[e] = LexicaseSelectOne(pm, event_rng).first;
  });
  return selected;
}

std::vector<double> SelectionDistribution(const PassMatrix& pm) {
  if (pm.num_candidates() == 0) throw InvalidInput("selection distribution of empty population");
  if (pm.num_preferences() > 8) throw InvalidInput("exact enumeration limited to 8 preferences");
  std::vector<double> prob(pm.num_candidates(), 0.0);
  std::vector<std::size_t> order(pm.num_preferences());
  std::iota(order.begin(), order.end(), 0);
  std::size_t permutations = 0;
  do {
    const auto survivors = LexicaseFilter(pm, order);
    for (std::size_t c : survivors) prob[c] += 1.0 / static_cast<double>(survivors.size());
    ++permutations;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& p : prob) p /= static_cast<double>(permutations);
  return prob;
}

std::vector<Hypothesis> Mutate(std::span<const Hypothesis> population, double sigma,
                               std::size_t elite_count, RandomStream& rng) {
  if (!(sigma > 0.0)) throw ConfigError("mutation sigma must be positive");
  std::vector<Hypothesis> out(population.begin(), population.end());
  const RandomStream base(rng.engine()());
  for (std::size_t i = elite_count; i < out.size(); ++i) {
    RandomStream noise = base.Child(i);
    for (double& v : Parameters(out[i])) v += noise.Normal(0.0, sigma);
  }
  return out;
}

PreferenceSampler::PreferenceSampler(std::vector<PreferencePair> prefs, std::size_t pool_size)
    : prefs_(std::move(prefs)), pool_size_(pool_size) {}

namespace {

std::vector<PreferencePair> SampleWithoutReplacement(std::span<const PreferencePair> from,
                                                     std::size_t n, RandomStream& rng) {
  if (n >= from.size()) return {from.begin(), from.end()};
  std::vector<std::size_t> idx(from.size());
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(idx[i], idx[i + rng.Index(idx.size() - i)]);
  }
  std::vector<PreferencePair> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(from[idx[i]]);
  return out;
}

}  // namespace

void PreferenceSampler::Refresh(std::size_t batch_size, RandomStream& rng) {
  pool_ = SampleWithoutReplacement(prefs_, std::max(pool_size_, batch_size), rng);
}

std::vector<PreferencePair> PreferenceSampler::Batch(std::size_t batch_size,
                                                     RandomStream& rng) const {
  return SampleWithoutReplacement(pool_, batch_size, rng);
}

PoplResult RunPopl(std::vector<Hypothesis> initial, PreferenceSampler& sampler,
                   const LexicaseConfig& config, const PassEvaluator& evaluator, int jobs) {
  config.Validate();
  if (initial.size() != config.population_size) {
    throw ConfigError("initial population size does not match population_size");
  }
  const RandomStream root(config.seed);
  PoplResult result;
  std::vector<Hypothesis> population = std::move(initial);
  for (std::size_t gen = 0; gen < config.generations; ++gen) {
    if (gen % config.refresh_interval == 0) {
      RandomStream pool_rng = root.Child("pool").Child(gen);
      sampler.Refresh(config.pref_batch_size, pool_rng);
    }
    RandomStream batch_rng = root.Child("batch").Child(gen);
    const auto batch = sampler.Batch(config.pref_batch_size, batch_rng);
    if (batch.empty()) throw ConfigError("preference sampler produced an empty batch");

    const PassMatrix pm = BuildPassMatrix(population, batch, evaluator, jobs);
    RandomStream select_rng = root.Child("select").Child(gen);
    const auto chosen = SelectPopulation(pm, config.population_size, select_rng, jobs);

    GenerationStats stats;
    stats.generation = gen + 1;
    for (std::size_t i = 0; i < pm.num_candidates(); ++i) {
      const double rate =
          static_cast<double>(pm.PassCount(i)) / static_cast<double>(pm.num_preferences());
      stats.mean_pass_rate += rate;
      stats.max_pass_rate = std::max(stats.max_pass_rate, rate);
    }
    stats.mean_pass_rate /= static_cast<double>(pm.num_candidates());
    stats.unique_candidates = std::set<std::size_t>(chosen.begin(), chosen.end()).size();
    result.stats.push_back(stats);

    std::vector<Hypothesis> selected;
    selected.reserve(chosen.size());
    for (std::size_t c : chosen) selected.push_back(population[c]);
    if (gen + 1 == config.generations) {
      result.population = std::move(selected);
      break;
    }
    RandomStream mutate_rng = root.Child("mutate").Child(gen);
    population = Mutate(selected, config.mutation_sigma, config.elite_count, mutate_rng);
  }
  return result;
}

}  // namespace popl
