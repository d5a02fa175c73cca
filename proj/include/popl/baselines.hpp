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

// Comparison methods: Bayesian reward extrapolation (Metropolis over
// last-layer reward weights), behaviour cloning for tabular policies, and
// an ensemble of contrastive-preference-learning fine-tunes.

#ifndef POPL_BASELINES_HPP_
#define POPL_BASELINES_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "popl/core.hpp"
#include "popl/models.hpp"
#include "popl/rng.hpp"

namespace popl {

struct MCMCConfig {
  std::size_t steps = 10000;
  // Per-coordinate proposal standard deviation.
  double step_size = 0.1;
  std::size_t burn_in = 2000;
  std::size_t thin = 10;
  double beta = 10.0;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct BrexResult {
  // Chain states kept after burn-in, every thin-th step. All have unit norm.
  std::vector<RewardHypothesis> samples;
  // Highest-likelihood state visited by the chain.
  RewardHypothesis map_sample;
  double map_log_likelihood = 0.0;
  std::size_t accepted = 0;
  // Log-likelihood of the chain state after each step.
  std::vector<double> log_likelihood_trace;
  // Set when no proposal was ever accepted.
  bool stuck = false;
};

// Metropolis acceptance for a symmetric proposal: always accepts when the
// proposal is at least as likely, else with probability exp(delta).
bool MetropolisAccept(double current_log_likelihood, double proposal_log_likelihood,
                      RandomStream& rng);

// Random-walk Metropolis over unit-norm weight vectors targeting the
// Bradley-Terry likelihood of prefs. Proposals are w + N(0, step_size^2 I),
// projected back onto the unit sphere before they are scored.
BrexResult BrexSample(std::span<const PreferencePair> prefs, const SegmentSet& segments,
                      const FeatureEmbedding& embed, const MCMCConfig& config);

// Laplace-smoothed count policy. Unvisited states get uniform rows. With
// laplace == 0, unseen actions at visited states get logit kMinLogit.
inline constexpr double kMinLogit = -50.0;
PolicyHypothesis BehaviorClone(std::span<const Segment> demos, int num_states, int num_actions,
                               double laplace);

struct CplLoss {
  double loss = 0.0;
  // Same [state][action] layout as PolicyHypothesis::logits().
  std::vector<double> gradient;
};

// loss = -sum_prefs log sigmoid(alpha * (A_winner - A_loser)), where A is the
// summed log pi(a|s) over a segment. Gradient is analytic through the
// log-softmax.
CplLoss CplLossAndGradient(const PolicyHypothesis& policy, std::span<const PreferencePair> prefs,
                           const SegmentSet& segments, double alpha);

struct CPLConfig {
  double alpha = 1.0;
  double learning_rate = 1e-3;
  std::size_t iterations = 20;
  std::size_t num_models = 500;
  double subsample_fraction = 0.5;
  std::uint64_t seed = 0;

  void Validate() const;
};

// num_models plain gradient-descent fine-tunes of `pretrained`, each on its
// own random subsample of prefs. If loss_curves is given, it receives the
// training loss before each iteration and after the last one, per model.
std::vector<PolicyHypothesis> MultiCpl(const PolicyHypothesis& pretrained,
                                       std::span<const PreferencePair> prefs,
                                       const SegmentSet& segments, const CPLConfig& config,
                                       std::vector<std::vector<double>>* loss_curves = nullptr,
                                       int jobs = 1);

}  // namespace popl

#endif  // POPL_BASELINES_HPP_
