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

// Preference models: Bradley-Terry likelihood, the hidden-context synthetic
// utility, the frozen random feature network, and regret-based labelling.

#ifndef POPL_MODELS_HPP_
#define POPL_MODELS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "popl/core.hpp"
#include "popl/rng.hpp"

namespace popl {

struct BTParams {
  // Rationality coefficient; 0 makes every preference a coin flip.
  double beta = 1.0;
};

// log(1 / (1 + exp(-x))) without overflow for large |x|.
double LogSigmoid(double x);
double Sigmoid(double x);

// P(winner preferred) = logistic(beta * (f_winner - f_loser)).
// Throws InvalidInput on NaN utilities or negative beta.
double BtProbability(double f_winner, double f_loser, const BTParams& params);

// Sum over prefs of log BtProbability on summed segment rewards. 0 if empty.
double BtLogLikelihood(const RewardHypothesis& reward, std::span<const PreferencePair> prefs,
                       const SegmentSet& segments, const FeatureEmbedding& embed,
                       const BTParams& params);

// u(a, z) = a for a < 0.8, otherwise 2 a z. Throws InvalidInput outside
// a in [0, 1] or z not in {0, 1}.
double SyntheticUtility(double a, int z);

inline constexpr double kSyntheticThreshold = 0.8;

// A frozen two-layer random tanh network mapping a scalar state to a
// feature vector: phi(a) = tanh(W2 tanh(w1 a + b1) + b2). Weights are
// standard normal, biases uniform on [-1, 1]. Bit-identical for a given
// (seed, dim, hidden_width).
class FeatureEmbedding {
 public:
  explicit FeatureEmbedding(std::uint64_t seed, int dim = 64, int hidden_width = 64);

  std::uint64_t seed() const { return seed_; }
  int dim() const { return dim_; }
  int hidden_width() const { return hidden_width_; }

  std::vector<double> Features(double a) const;
  void Features(double a, std::span<double> out) const;
  // Summed features over the steps of a scalar segment.
  std::vector<double> SegmentFeatures(const Segment& segment) const;
  // w . phi(a)
  double Reward(const RewardHypothesis& reward, double a) const;

 private:
  std::uint64_t seed_;
  int dim_;
  int hidden_width_;
  std::vector<double> in_weight_;   // [hidden]
  std::vector<double> in_bias_;     // [hidden]
  std::vector<double> out_weight_;  // [dim][hidden]
  std::vector<double> out_bias_;    // [dim]
};

// Labels the pair (a, b) with the segment that has the larger log-likelihood
// under the oracle policy; exact ties are broken by a fair coin from rng.
PreferencePair RegretPreferenceLabel(std::size_t seg_a, std::size_t seg_b,
                                     const SegmentSet& segments,
                                     const PolicyHypothesis& oracle, RandomStream& rng);

}  // namespace popl

#endif  // POPL_MODELS_HPP_
