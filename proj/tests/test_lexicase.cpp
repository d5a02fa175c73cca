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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "popl/domains.hpp"
#include "popl/errors.hpp"
#include "popl/lexicase.hpp"
#include "popl/models.hpp"
#include "test_util.hpp"

namespace popl {
namespace {

using Rows = std::vector<std::vector<bool>>;

const PassMatrix kAbc = PassMatrix::FromRows(Rows{{1, 0}, {0, 1}, {1, 1}});

// Selection probabilities from the recursive definition: pick the next
// preference uniformly among those left, filter (or skip), recurse.
void RecursiveOracle(const PassMatrix& pm, const std::vector<std::size_t>& pool,
                     const std::vector<std::size_t>& remaining, double weight,
                     std::vector<double>& prob) {
  if (pool.size() == 1 || remaining.empty()) {
    for (std::size_t c : pool) prob[c] += weight / static_cast<double>(pool.size());
    return;
  }
  for (std::size_t k = 0; k < remaining.size(); ++k) {
    std::vector<std::size_t> rest = remaining;
    const std::size_t pref = rest[k];
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
    std::vector<std::size_t> next;
    for (std::size_t c : pool) {
      if (pm.passes(c, pref)) next.push_back(c);
    }
    RecursiveOracle(pm, next.empty() ? pool : next, rest,
                    weight / static_cast<double>(remaining.size()), prob);
  }
}

std::vector<double> OracleDistribution(const PassMatrix& pm) {
  std::vector<std::size_t> pool(pm.num_candidates()), prefs(pm.num_preferences());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  for (std::size_t j = 0; j < prefs.size(); ++j) prefs[j] = j;
  std::vector<double> prob(pm.num_candidates(), 0.0);
  RecursiveOracle(pm, pool, prefs, 1.0, prob);
  return prob;
}

// Two states, two actions. Preference 0 rewards action 0 in state 0,
// preference 1 rewards action 0 in state 1.
struct AbcPolicies {
  SegmentSet segments = testing::TabularSet(
      {testing::Tabular({{0, 0}}), testing::Tabular({{0, 1}}), testing::Tabular({{1, 0}}),
       testing::Tabular({{1, 1}})},
      2, 2);
  std::vector<PreferencePair> prefs = {{0, 1}, {2, 3}};
  PolicyHypothesis a{2, 2, {1.0, 0.0, 0.0, 1.0}};
  PolicyHypothesis b{2, 2, {0.0, 1.0, 1.0, 0.0}};
  PolicyHypothesis c{2, 2, {1.0, 0.0, 1.0, 0.0}};
};

TEST_CASE("lexicase selection examples") {
  SUBCASE("a candidate passing everything always wins") {
    CHECK(SelectionDistribution(kAbc) == std::vector<double>{0.0, 0.0, 1.0});
    RandomStream rng(1);
    for (int i = 0; i < 100; ++i) CHECK(LexicaseSelectOne(kAbc, rng).first == 2);
  }
  SUBCASE("two specialists split evenly") {
    const PassMatrix pm = PassMatrix::FromRows(Rows{{1, 0}, {0, 1}});
    CHECK(SelectionDistribution(pm) == std::vector<double>{0.5, 0.5});
    RandomStream rng(2);
    int first = 0;
    for (int i = 0; i < 10000; ++i) {
      if (LexicaseSelectOne(pm, rng).first == 0) ++first;
    }
    CHECK(first >= 4800);
    CHECK(first <= 5200);
  }
  SUBCASE("everyone failing everything skips every preference") {
    const PassMatrix pm(4, 3);
    RandomStream rng(3);
    std::vector<int> counts(4, 0);
    for (int i = 0; i < 4000; ++i) {
      const auto [idx, trace] = LexicaseSelectOne(pm, rng);
      ++counts[idx];
      std::vector<std::size_t> skipped = trace.skipped_prefs;
      std::sort(skipped.begin(), skipped.end());
      CHECK(skipped == std::vector<std::size_t>{0, 1, 2});
    }
    for (int c : counts) {
      CHECK(c > 850);
      CHECK(c < 1150);
    }
  }
  SUBCASE("no preferences means a uniform choice") {
    const PassMatrix pm(3, 0);
    for (double p : SelectionDistribution(pm)) CHECK(p == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("empty population") {
    RandomStream rng(0);
    CHECK_THROWS_AS(LexicaseSelectOne(PassMatrix(0, 2), rng), InvalidInput);
    CHECK_THROWS_AS(SelectPopulation(PassMatrix(0, 2), 3, rng), InvalidInput);
  }
}

TEST_CASE("selection trace is consistent") {
  RandomStream rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const PassMatrix pm = testing::RandomPassMatrix(2 + rng.Index(7), 1 + rng.Index(8), 0.4, rng);
    const auto [idx, trace] = LexicaseSelectOne(pm, rng);
    CHECK(idx < pm.num_candidates());
    CHECK(trace.selected_idx == idx);
    std::vector<std::size_t> order = trace.shuffle_order;
    std::sort(order.begin(), order.end());
    for (std::size_t j = 0; j < order.size(); ++j) CHECK(order[j] == j);
    std::size_t previous = pm.num_candidates();
    for (std::size_t count : trace.surviving_counts) {
      CHECK(count <= previous);
      CHECK(count >= 1);
      previous = count;
    }
    for (std::size_t pref : trace.skipped_prefs) {
      // A skipped preference was failed by the whole pool at that point; in
      // particular the winner fails it.
      CHECK_FALSE(pm.passes(idx, pref));
    }
  }
}

TEST_CASE("select population") {
  RandomStream rng(5);
  CHECK(SelectPopulation(kAbc, 3, rng) == std::vector<std::size_t>{2, 2, 2});
  CHECK(SelectPopulation(kAbc, 0, rng).empty());

  const PassMatrix pm = testing::RandomPassMatrix(30, 12, 0.5, rng);
  RandomStream r1(77), r2(77);
  const auto first = SelectPopulation(pm, 50, r1);
  CHECK(first == SelectPopulation(pm, 50, r2));
  RandomStream r3(77);
  CHECK(first == SelectPopulation(pm, 50, r3, 4));
}

TEST_CASE("dominated candidates are never selected") {
  RandomStream rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.Index(7), m = 1 + rng.Index(8);
    const PassMatrix pm = testing::RandomPassMatrix(n, m, 0.2 + 0.6 * rng.Uniform(), rng);
    const auto front = ParetoFront(pm);
    const std::set<std::size_t> allowed(front.begin(), front.end());
    for (int e = 0; e < 20; ++e) {
      const std::size_t pick = LexicaseSelectOne(pm, rng).first;
      CHECK(allowed.count(pick) == 1);
      CHECK_FALSE(testing::IsDominated(pm, pick));
    }
    if (m <= 5) {
      const auto dist = SelectionDistribution(pm);
      for (std::size_t c = 0; c < n; ++c) {
        if (testing::IsDominated(pm, c)) CHECK(dist[c] == 0.0);
      }
    }
  }
}

TEST_CASE("exact selection distribution matches a recursive oracle") {
  RandomStream rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const PassMatrix pm = testing::RandomPassMatrix(1 + rng.Index(6), rng.Index(6), 0.5, rng);
    const auto dist = SelectionDistribution(pm);
    const auto oracle = OracleDistribution(pm);
    double total = 0.0;
    for (std::size_t c = 0; c < dist.size(); ++c) {
      CHECK(std::abs(dist[c] - oracle[c]) < 1e-12);
      total += dist[c];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sampled selection frequencies agree with the exact distribution") {
  RandomStream rng(8);
  const PassMatrix pm = PassMatrix::FromRows(
      Rows{{1, 0, 1, 0, 0}, {0, 1, 1, 0, 1}, {1, 1, 0, 0, 0}, {0, 0, 0, 1, 0}, {1, 0, 0, 1, 1}});
  const auto exact = SelectionDistribution(pm);
  constexpr int kEvents = 20000;
  std::vector<int> counts(pm.num_candidates(), 0);
  for (int e = 0; e < kEvents; ++e) ++counts[LexicaseSelectOne(pm, rng).first];
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double sd = std::sqrt(kEvents * exact[c] * (1.0 - exact[c]));
    CAPTURE(c);
    CHECK(std::abs(counts[c] - kEvents * exact[c]) <= 4.0 * sd + 1.0);
  }
}

TEST_CASE("a preference everyone fails does not change the distribution") {
  RandomStream rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.Index(6), m = rng.Index(5);
    const PassMatrix pm = testing::RandomPassMatrix(n, m, 0.5, rng);
    PassMatrix wider(n, m + 1);
    const std::size_t dead = rng.Index(m + 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0, k = 0; j <= m; ++j) {
        if (j == dead) continue;
        wider.set(i, j, pm.passes(i, k++));
      }
    }
    const auto before = SelectionDistribution(pm);
    const auto after = SelectionDistribution(wider);
    for (std::size_t c = 0; c < n; ++c) CHECK(std::abs(before[c] - after[c]) < 1e-12);
  }
}

TEST_CASE("mutation") {
  RandomStream init(10);
  std::vector<Hypothesis> pop;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> w(8);
    for (double& x : w) x = init.Normal();
    pop.emplace_back(RewardHypothesis{w});
  }
  const std::vector<Hypothesis> original = pop;

  SUBCASE("tiny sigma gives tiny changes") {
    RandomStream rng(1);
    const auto out = Mutate(pop, 1e-12, 0, rng);
    double max_delta = 0.0;
    bool changed = false;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      const auto a = Parameters(pop[i]);
      const auto b = Parameters(out[i]);
      for (std::size_t k = 0; k < a.size(); ++k) {
        max_delta = std::max(max_delta, std::abs(a[k] - b[k]));
        changed = changed || a[k] != b[k];
      }
    }
    CHECK(max_delta < 1e-10);
    CHECK(changed);
    CHECK(pop == original);
  }
  SUBCASE("elites are copied unchanged") {
    RandomStream rng(2);
    const auto out = Mutate(pop, 0.5, pop.size() - 1, rng);
    for (std::size_t i = 0; i + 1 < pop.size(); ++i) CHECK(out[i] == pop[i]);
    CHECK_FALSE(out.back() == pop.back());
    RandomStream rng2(2);
    CHECK(Mutate(pop, 0.5, pop.size(), rng2) == pop);
  }
  SUBCASE("noise has the requested scale") {
    RandomStream rng(3);
    const auto out = Mutate(pop, 0.3, 0, rng);
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      const auto a = Parameters(pop[i]);
      const auto b = Parameters(out[i]);
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = b[k] - a[k];
        sum += d;
        sum_sq += d * d;
        ++n;
      }
    }
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(std::sqrt(sum_sq / n) == doctest::Approx(0.3).epsilon(0.08));
  }
  SUBCASE("determinism and policies") {
    std::vector<Hypothesis> policies = {PolicyHypothesis(3, 2), PolicyHypothesis(3, 2)};
    RandomStream a(4), b(4);
    const auto pa = Mutate(policies, 0.1, 0, a);
    CHECK(pa == Mutate(policies, 0.1, 0, b));
    CHECK_FALSE(pa[0] == policies[0]);
  }
  SUBCASE("non-positive sigma") {
    RandomStream rng(5);
    CHECK_THROWS_AS(Mutate(pop, 0.0, 0, rng), ConfigError);
  }
}

TEST_CASE("preference sampler") {
  std::vector<PreferencePair> prefs;
  for (std::size_t i = 0; i < 100; ++i) prefs.push_back({i, i + 100});
  const std::set<std::size_t> winners_all = [&] {
    std::set<std::size_t> s;
    for (const auto& p : prefs) s.insert(p.winner);
    return s;
  }();

  PreferenceSampler sampler(prefs, 30);
  RandomStream rng(1);
  sampler.Refresh(10, rng);
  std::set<std::size_t> seen;
  for (int i = 0; i < 50; ++i) {
    const auto batch = sampler.Batch(10, rng);
    CHECK(batch.size() == 10);
    std::set<std::size_t> distinct;
    for (const auto& p : batch) {
      distinct.insert(p.winner);
      seen.insert(p.winner);
      CHECK(winners_all.count(p.winner) == 1);
    }
    CHECK(distinct.size() == 10);
  }
  // Batches come from the 30-preference pool only.
  CHECK(seen.size() == 30);

  PreferenceSampler whole(prefs);
  whole.Refresh(2048, rng);
  CHECK(whole.Batch(2048, rng).size() == 100);

  PreferenceSampler empty({});
  empty.Refresh(4, rng);
  CHECK(empty.Batch(4, rng).empty());
}

TEST_CASE("config validation") {
  LexicaseConfig config;
  CHECK_NOTHROW(config.Validate());
  config.elite_count = config.population_size;
  CHECK_NOTHROW(config.Validate());
  config.elite_count = config.population_size + 1;
  CHECK_THROWS_AS(config.Validate(), ConfigError);
  config = LexicaseConfig{};
  config.mutation_sigma = 0.0;
  CHECK_THROWS_AS(config.Validate(), ConfigError);
  config = LexicaseConfig{};
  config.generations = 0;
  CHECK_THROWS_AS(config.Validate(), ConfigError);
}

TEST_CASE("popl loop on hand-built policies") {
  const AbcPolicies abc;
  const PassEvaluator evaluator = PassEvaluator::ForPolicies(abc.segments);
  REQUIRE(BuildPassMatrix(std::vector<Hypothesis>{abc.a, abc.b, abc.c}, abc.prefs, evaluator) == kAbc);

  LexicaseConfig config;
  config.population_size = 6;
  config.generations = 1;
  config.pref_batch_size = 2;
  config.elite_count = 6;
  config.seed = 3;

  SUBCASE("without mutation the population converges to the generalist at once") {
    PreferenceSampler sampler(abc.prefs);
    const auto result =
        RunPopl({abc.a, abc.b, abc.c, abc.a, abc.b, abc.a}, sampler, config, evaluator);
    REQUIRE(result.population.size() == 6);
    for (const auto& h : result.population) CHECK(h == Hypothesis{abc.c});
    REQUIRE(result.stats.size() == 1);
    CHECK(result.stats[0].generation == 1);
    CHECK(result.stats[0].max_pass_rate == 1.0);
    CHECK(result.stats[0].mean_pass_rate == doctest::Approx(7.0 / 12.0));
    CHECK(result.stats[0].unique_candidates == 1);
  }
  SUBCASE("one generation returns selected members of the initial population") {
    RandomStream rng(11);
    std::vector<Hypothesis> initial;
    for (int i = 0; i < 6; ++i) {
      initial.emplace_back(PolicyHypothesis(2, 2, {rng.Normal(), rng.Normal(), rng.Normal(), rng.Normal()}));
    }
    PreferenceSampler sampler(abc.prefs);
    const auto result = RunPopl(initial, sampler, config, evaluator);
    const PassMatrix pm = BuildPassMatrix(initial, abc.prefs, evaluator);
    for (const auto& h : result.population) {
      const auto it = std::find(initial.begin(), initial.end(), h);
      REQUIRE(it != initial.end());
      CHECK_FALSE(testing::IsDominated(pm, static_cast<std::size_t>(it - initial.begin())));
    }
  }
  SUBCASE("errors") {
    PreferenceSampler sampler(abc.prefs);
    CHECK_THROWS_AS(RunPopl({abc.a}, sampler, config, evaluator), ConfigError);
    PreferenceSampler empty({});
    CHECK_THROWS_AS(RunPopl({abc.a, abc.b, abc.c, abc.a, abc.b, abc.c}, empty, config, evaluator),
                    ConfigError);
  }
}

TEST_CASE("popl improves the training pass rate on the synthetic domain") {
  const FeatureEmbedding embed(1234);
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    StatelessDatasetSpec spec;
    spec.seed = 1000 + seed;
    const Dataset data = GenerateStatelessDataset(spec);
    const PassEvaluator evaluator = PassEvaluator::ForRewards(data.segments, embed);
    RandomStream rng(seed);
    std::vector<Hypothesis> initial;
    for (int i = 0; i < 100; ++i) {
      std::vector<double> w(64);
      for (double& x : w) x = rng.Normal();
      initial.emplace_back(RewardHypothesis{w});
    }
    LexicaseConfig config;
    config.seed = seed;
    PreferenceSampler sampler(LearnerView(data.train));
    const auto result = RunPopl(initial, sampler, config, evaluator);
    REQUIRE(result.stats.size() == 100);
    CAPTURE(seed);
    CHECK(result.stats.back().mean_pass_rate > result.stats.front().mean_pass_rate);
    if (result.stats.back().mean_pass_rate > result.stats.front().mean_pass_rate) ++improved;

    // Same inputs, same final population.
    PreferenceSampler again(LearnerView(data.train));
    if (seed == 0) CHECK(RunPopl(initial, again, config, evaluator).population == result.population);
  }
  CHECK(improved == 5);
}

}  // namespace
}  // namespace popl
