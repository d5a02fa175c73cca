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

// Small builders shared by the unit tests.

#ifndef POPL_TESTS_TEST_UTIL_HPP_
#define POPL_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <utility>
#include <vector>

#include "popl/core.hpp"
#include "popl/domains.hpp"
#include "popl/models.hpp"
#include "popl/rng.hpp"

namespace popl::testing {

inline Segment Tabular(std::initializer_list<std::pair<int, int>> steps) {
  Segment seg;
  for (const auto& [s, a] : steps) seg.steps.push_back(Step{s, a});
  return seg;
}

inline SegmentSet TabularSet(std::vector<Segment> segments, int num_states, int num_actions) {
  return SegmentSet{std::move(segments), num_states, num_actions};
}

inline SegmentSet ScalarSet(std::initializer_list<double> states) {
  SegmentSet set;
  for (double a : states) set.segments.push_back(Segment::Scalar(a));
  return set;
}

inline PassMatrix RandomPassMatrix(std::size_t rows, std::size_t cols, double density,
                                   RandomStream& rng) {
  PassMatrix pm(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) pm.set(i, j, rng.Uniform() < density);
  }
  return pm;
}

// Reference dominance check written directly from the definition: a passes
// everything b passes, and at least one more preference.
inline bool StrictlyDominates(const PassMatrix& pm, std::size_t a, std::size_t b) {
  bool extra = false;
  for (std::size_t j = 0; j < pm.num_preferences(); ++j) {
    if (pm.passes(b, j) && !pm.passes(a, j)) return false;
    if (pm.passes(a, j) && !pm.passes(b, j)) extra = true;
  }
  return extra;
}

inline bool IsDominated(const PassMatrix& pm, std::size_t b) {
  for (std::size_t a = 0; a < pm.num_candidates(); ++a) {
    if (a != b && StrictlyDominates(pm, a, b)) return true;
  }
  return false;
}

// One small two-group instance: up to six segments cut from noisy rollouts
// of both oracles on the two-door grid, every pair labelled by both groups,
// and a population of the two oracles followed by random policies (half
// around zero, half around an oracle).
struct OracleFrontCheck {
  std::size_t num_segments = 0;
  std::size_t num_prefs = 0;
  std::size_t num_contradictions = 0;
  std::array<bool, kNumGroups> on_front{};
};

inline OracleFrontCheck CheckOraclesOnFront(std::uint64_t seed, std::size_t num_random = 50) {
  static const GridWorld world = GridWorld::TwoDoor();
  static const std::array<PolicyHypothesis, kNumGroups> oracles = {
      ValueIteration(world, GroupReward::ForGroup(0), 1e-10).policy,
      ValueIteration(world, GroupReward::ForGroup(1), 1e-10).policy};
  RandomStream rng(seed);
  SegmentSet segments;
  segments.num_states = world.num_states();
  segments.num_actions = kNumGridActions;
  const std::size_t count = 3 + rng.Index(4);
  while (segments.size() < count) {
    const int g = static_cast<int>(rng.Index(kNumGroups));
    auto rollout = Rollout(oracles[g], world, rng, 1, rng.Uniform(0.0, 0.5));
    const Trajectory& t = rollout.trajectories.front();
    if (t.actions.size() < 2) continue;
    const std::size_t len = 2 + rng.Index(std::min<std::size_t>(t.actions.size(), 8) - 1);
    const std::size_t begin = rng.Index(t.actions.size() - len + 1);
    segments.segments.push_back(TrajectorySegment(t, begin, len));
  }

  OracleFrontCheck out;
  out.num_segments = segments.size();
  std::vector<PreferencePair> prefs;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    for (std::size_t j = i + 1; j < segments.size(); ++j) {
      std::array<std::optional<PreferencePair>, kNumGroups> labels;
      for (int g = 0; g < kNumGroups; ++g) {
        const double li = oracles[g].SegmentLogProb(segments.at(i));
        const double lj = oracles[g].SegmentLogProb(segments.at(j));
        if (li == lj) continue;
        labels[g] = li > lj ? PreferencePair{i, j} : PreferencePair{j, i};
        prefs.push_back(*labels[g]);
      }
      if (labels[0] && labels[1] && !(*labels[0] == *labels[1])) ++out.num_contradictions;
    }
  }
  out.num_prefs = prefs.size();

  std::vector<Hypothesis> population = {oracles[0], oracles[1]};
  for (std::size_t k = 0; k < num_random; ++k) {
    PolicyHypothesis p(world.num_states(), kNumGridActions);
    const bool near_oracle = k % 2 == 1;
    const PolicyHypothesis& centre = oracles[rng.Index(kNumGroups)];
    const double sigma = near_oracle ? rng.Uniform(0.1, 20.0) : rng.Uniform(0.1, 5.0);
    for (int s = 0; s < world.num_states(); ++s) {
      for (int a = 0; a < kNumGridActions; ++a) {
        p.logit(s, a) = (near_oracle ? centre.logit(s, a) : 0.0) + rng.Normal(0.0, sigma);
      }
    }
    population.emplace_back(std::move(p));
  }
  const PassMatrix pm = BuildPassMatrix(population, prefs, PassEvaluator::ForPolicies(segments));
  const auto front = ParetoFront(pm);
  for (int g = 0; g < kNumGroups; ++g) {
    out.on_front[g] = std::find(front.begin(), front.end(), static_cast<std::size_t>(g)) != front.end();
  }
  return out;
}

}  // namespace popl::testing

#endif  // POPL_TESTS_TEST_UTIL_HPP_
