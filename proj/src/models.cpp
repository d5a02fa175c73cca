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

#include "popl/models.hpp"

#include <cmath>

#include "popl/errors.hpp"

namespace popl {

double LogSigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double BtProbability(double f_winner, double f_loser, const BTParams& params) {
  if (std::isnan(f_winner) || std::isnan(f_loser)) throw InvalidInput("NaN utility");
  if (!(params.beta >= 0.0)) throw InvalidInput("beta must be non-negative");
  if (f_winner == f_loser || params.beta == 0.0) return 0.5;
  return Sigmoid(params.beta * (f_winner - f_loser));
}

double BtLogLikelihood(const RewardHypothesis& reward, std::span<const PreferencePair> prefs,
                       const SegmentSet& segments, const FeatureEmbedding& embed,
                       const BTParams& params) {
  if (reward.weights.size() != static_cast<std::size_t>(embed.dim())) {
    throw ConfigError("reward weight length does not match embedding dimension");
  }
  if (!(params.beta >= 0.0)) throw InvalidInput("beta must be non-negative");
  double total = 0.0;
  for (const auto& p : prefs) {
    double rw = 0.0;
    double rl = 0.0;
    for (const auto& s : segments.at(p.winner).steps) rw += embed.Reward(reward, s.scalar());
    for (const auto& s : segments.at(p.loser).steps) rl += embed.Reward(reward, s.scalar());
    total += LogSigmoid(params.beta * (rw - rl));
  }
  return total;
}

double SyntheticUtility(double a, int z) {
  if (!(a >= 0.0 && a <= 1.0)) throw InvalidInput("synthetic state must lie in [0, 1]");
  if (z != 0 && z != 1) throw InvalidInput("hidden context must be 0 or 1");
  return a < kSyntheticThreshold ? a : 2.0 * a * z;
}

FeatureEmbedding::FeatureEmbedding(std::uint64_t seed, int dim, int hidden_width)
    : seed_(seed), dim_(dim), hidden_width_(hidden_width) {
  if (dim <= 0 || hidden_width <= 0) throw ConfigError("embedding sizes must be positive");
  RandomStream rng(seed);
  const auto h = static_cast<std::size_t>(hidden_width);
  const auto d = static_cast<std::size_t>(dim);
  in_weight_.resize(h);
  in_bias_.resize(h);
  out_weight_.resize(d * h);
  out_bias_.resize(d);
  for (auto& w : in_weight_) w = rng.Normal();
  for (auto& b : in_bias_) b = rng.Uniform(-1.0, 1.0);
  for (auto& w : out_weight_) w = rng.Normal();
  for (auto& b : out_bias_) b = rng.Uniform(-1.0, 1.0);
}

void FeatureEmbedding::Features(double a, std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(dim_)) throw ConfigError("feature buffer size");
  const auto h = static_cast<std::size_t>(hidden_width_);
  std::vector<double> hidden(h);
  for (std::size_t j = 0; j < h; ++j) hidden[j] = std::tanh(in_weight_[j] * a + in_bias_[j]);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double acc = out_bias_[k];
    const double* row = out_weight_.data() + k * h;
    for (std::size_t j = 0; j < h; ++j) acc += row[j] * hidden[j];
    out[k] = std::tanh(acc);
  }
}

std::vector<double> FeatureEmbedding::Features(double a) const {
  std::vector<double> out(static_cast<std::size_t>(dim_));
  Features(a, out);
  return out;
}

std::vector<double> FeatureEmbedding::SegmentFeatures(const Segment& segment) const {
  std::vector<double> total(static_cast<std::size_t>(dim_), 0.0);
  std::vector<double> f(total.size());
  for (const auto& step : segment.steps) {
    if (!step.is_scalar()) throw InvalidInput("feature embedding needs scalar states");
    Features(step.scalar(), f);
    for (std::size_t k = 0; k < f.size(); ++k) total[k] += f[k];
  }
  return total;
}

double FeatureEmbedding::Reward(const RewardHypothesis& reward, double a) const {
  if (reward.weights.size() != static_cast<std::size_t>(dim_)) {
    throw ConfigError("reward weight length does not match embedding dimension");
  }
  const auto f = Features(a);
  double acc = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) acc += reward.weights[k] * f[k];
  return acc;
}

PreferencePair RegretPreferenceLabel(std::size_t seg_a, std::size_t seg_b,
                                     const SegmentSet& segments,
                                     const PolicyHypothesis& oracle, RandomStream& rng) {
  const double la = oracle.SegmentLogProb(segments.at(seg_a));
  const double lb = oracle.SegmentLogProb(segments.at(seg_b));
  if (la > lb) return {seg_a, seg_b};
  if (lb > la) return {seg_b, seg_a};
  return rng.Bernoulli(0.5) ? PreferencePair{seg_a, seg_b} : PreferencePair{seg_b, seg_a};
}

}  // namespace popl
