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

#ifndef POPL_METRICS_HPP_
#define POPL_METRICS_HPP_

#include <span>
#include <vector>

#include "popl/core.hpp"
#include "popl/models.hpp"

namespace popl {

struct CateringResult {
  int group_id = 0;
  std::size_t selected_idx = 0;
  double holdout_pass_rate = 0.0;
  // Pass rate on the larger group-pure test split; 0 when none was given.
  double eval_pass_rate = 0.0;
};

// Picks the candidate passing the most holdout preferences (lowest index on
// ties) and reports its holdout and test pass rates.
CateringResult Cater(std::span<const Hypothesis> population,
                     std::span<const PreferencePair> holdout, const PassEvaluator& evaluator,
                     int group_id, std::span<const PreferencePair> test = {});

// The k candidates with the highest holdout pass counts, ordered by count
// (descending) then index.
std::vector<std::size_t> CaterTopK(std::span<const Hypothesis> population,
                                   std::span<const PreferencePair> holdout,
                                   const PassEvaluator& evaluator, std::size_t k);

// Linear-interpolation quantile of values at q in [0, 1].
double FairnessQuantile(std::span<const double> values, double q);

// Fraction of prefs the candidate passes.
double PreferenceAccuracy(const Hypothesis& candidate, std::span<const PreferencePair> prefs,
                          const PassEvaluator& evaluator);

// For each group: does any candidate reach `threshold` holdout pass rate?
std::vector<bool> PopulationCoverage(std::span<const Hypothesis> population,
                                     std::span<const std::vector<PreferencePair>> holdouts,
                                     const PassEvaluator& evaluator, double threshold);

// Fraction of grid pairs (a < threshold, a' >= threshold) that the reward
// ranks strictly a above a'. Grid points are i / (points - 1).
double SplitRankingFraction(const RewardHypothesis& reward, const FeatureEmbedding& embed,
                            std::size_t points = 100, double threshold = kSyntheticThreshold);

// Per-grid-point quantile over a population of reward functions, after
// shifting each reward by its median over the grid.
std::vector<double> RewardQuantileCurve(std::span<const Hypothesis> population,
                                        const FeatureEmbedding& embed,
                                        std::span<const double> grid, double q);

}  // namespace popl

#endif  // POPL_METRICS_HPP_
