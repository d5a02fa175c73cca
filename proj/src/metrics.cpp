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

#include "popl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "popl/errors.hpp"

namespace popl {

namespace {

std::vector<std::size_t> HoldoutCounts(std::span<const Hypothesis> population,
                                       std::span<const PreferencePair> holdout,
                                       const PassEvaluator& evaluator) {
  const PassMatrix pm = BuildPassMatrix(population, holdout, evaluator);
  std::vector<std::size_t> counts(population.size());
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = pm.PassCount(i);
  return counts;
}

}  // namespace

CateringResult Cater(std::span<const Hypothesis> population,
                     std::span<const PreferencePair> holdout, const PassEvaluator& evaluator,
                     int group_id, std::span<const PreferencePair> test) {
  if (population.empty()) throw InvalidInput("catering needs a non-empty population");
  if (holdout.empty()) throw InvalidInput("catering needs holdout preferences");
  const auto counts = HoldoutCounts(population, holdout, evaluator);
  const auto best = static_cast<std::size_t>(
      std::max_element(counts.begin(), counts.end()) - counts.begin());
  CateringResult result;
  result.group_id = group_id;
  result.selected_idx = best;
  result.holdout_pass_rate =
      static_cast<double>(counts[best]) / static_cast<double>(holdout.size());
  if (!test.empty()) result.eval_pass_rate = evaluator.PassRate(population[best], test);
  return result;
}

std::vector<std::size_t> CaterTopK(std::span<const Hypothesis> population,
                                   std::span<const PreferencePair> holdout,
                                   const PassEvaluator& evaluator, std::size_t k) {
  if (population.empty()) throw InvalidInput("catering needs a non-empty population");
  const auto counts = HoldoutCounts(population, holdout, evaluator);
  std::vector<std::size_t> order(population.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  order.resize(std::min(k, order.size()));
  return order;
}

double FairnessQuantile(std::span<const double> values, double q) {
  if (values.empty()) throw InvalidInput("quantile of an empty list");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidInput("quantile level must lie in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double PreferenceAccuracy(const Hypothesis& candidate, std::span<const PreferencePair> prefs,
                          const PassEvaluator& evaluator) {
  if (prefs.empty()) throw InvalidInput("accuracy needs at least one preference");
  return evaluator.PassRate(candidate, prefs);
}

std::vector<bool> PopulationCoverage(std::span<const Hypothesis> population,
                                     std::span<const std::vector<PreferencePair>> holdouts,
                                     const PassEvaluator& evaluator, double threshold) {
  std::vector<bool> covered;
  for (const auto& holdout : holdouts) {
    if (holdout.empty()) throw InvalidInput("coverage needs a holdout for every group");
    const auto counts = HoldoutCounts(population, holdout, evaluator);
    const std::size_t best = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
    covered.push_back(static_cast<double>(best) / static_cast<double>(holdout.size()) >=
                      threshold);
  }
  return covered;
}

double SplitRankingFraction(const RewardHypothesis& reward, const FeatureEmbedding& embed,
                            std::size_t points, double threshold) {
  if (points < 2) throw InvalidInput("ranking grid needs at least two points");
  std::vector<double> below, above;
  for (std::size_t i = 0; i < points; ++i) {
    const double a = static_cast<double>(i) / static_cast<double>(points - 1);
    (a < threshold ? below : above).push_back(embed.Reward(reward, a));
  }
  if (below.empty() || above.empty()) return 0.0;
  std::size_t ranked = 0;
  for (double lo : below) {
    for (double hi : above) ranked += lo > hi ? 1 : 0;
  }
  return static_cast<double>(ranked) / static_cast<double>(below.size() * above.size());
}

std::vector<double> RewardQuantileCurve(std::span<const Hypothesis> population,
                                        const FeatureEmbedding& embed,
                                        std::span<const double> grid, double q) {
  if (population.empty() || grid.empty()) throw InvalidInput("quantile curve needs inputs");
  std::vector<std::vector<double>> rewards;
  rewards.reserve(population.size());
  for (const auto& h : population) {
    const auto& r = std::get<RewardHypothesis>(h);
    std::vector<double> curve;
    curve.reserve(grid.size());
    for (double a : grid) curve.push_back(embed.Reward(r, a));
    // Rankings are shift-invariant; align members on their medians.
    const double median = FairnessQuantile(curve, 0.5);
    for (double& v : curve) v -= median;
    rewards.push_back(std::move(curve));
  }
  std::vector<double> out(grid.size());
  std::vector<double> column(population.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t i = 0; i < rewards.size(); ++i) column[i] = rewards[i][g];
    out[g] = FairnessQuantile(column, q);
  }
  return out;
}

}  // namespace popl
