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

#include "popl/baselines.hpp"

#include <cmath>
#include <numeric>

#include "popl/errors.hpp"
#include "popl/parallel.hpp"

namespace popl {

void MCMCConfig::Validate() const {
  if (steps == 0) throw ConfigError("mcmc steps must be positive");
  if (!(step_size > 0.0)) throw ConfigError("mcmc step_size must be positive");
  if (burn_in >= steps) throw ConfigError("mcmc burn_in must be smaller than steps");
  if (thin == 0) throw ConfigError("mcmc thin must be at least 1");
  if (!(beta >= 0.0)) throw ConfigError("mcmc beta must be non-negative");
}

bool MetropolisAccept(double current_log_likelihood, double proposal_log_likelihood,
                      RandomStream& rng) {
  const double delta = proposal_log_likelihood - current_log_likelihood;
  if (delta >= 0.0) return true;
  return std::log(rng.Uniform()) < delta;
}

namespace {

void Normalize(std::vector<double>& w) {
  double norm = 0.0;
  for (double v : w) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    w.assign(w.size(), 0.0);
    w.front() = 1.0;
    return;
  }
  for (double& v : w) v /= norm;
}

// Bradley-Terry log-likelihood on cached feature differences.
class DifferenceLikelihood {
 public:
  DifferenceLikelihood(std::span<const PreferencePair> prefs, const SegmentSet& segments,
                       const FeatureEmbedding& embed, double beta)
      : dim_(static_cast<std::size_t>(embed.dim())), beta_(beta), diffs_(prefs.size() * dim_) {
    for (std::size_t k = 0; k < prefs.size(); ++k) {
      const auto fw = embed.SegmentFeatures(segments.at(prefs[k].winner));
      const auto fl = embed.SegmentFeatures(segments.at(prefs[k].loser));
      for (std::size_t d = 0; d < dim_; ++d) diffs_[k * dim_ + d] = fw[d] - fl[d];
    }
  }

  double operator()(const std::vector<double>& w) const {
    double total = 0.0;
    const std::size_t n = diffs_.size() / dim_;
    for (std::size_t k = 0; k < n; ++k) {
      const double* row = diffs_.data() + k * dim_;
      double margin = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) margin += w[d] * row[d];
      total += LogSigmoid(beta_ * margin);
    }
    return total;
  }

 private:
  std::size_t dim_;
  double beta_;
  std::vector<double> diffs_;
};

}  // namespace

BrexResult BrexSample(std::span<const PreferencePair> prefs, const SegmentSet& segments,
                      const FeatureEmbedding& embed, const MCMCConfig& config) {
  config.Validate();
  if (prefs.empty()) throw InvalidInput("B-REx needs at least one preference");
  ValidatePairs(prefs, segments);
  const DifferenceLikelihood likelihood(prefs, segments, embed, config.beta);
  RandomStream rng(config.seed);

  std::vector<double> current(static_cast<std::size_t>(embed.dim()));
  for (double& v : current) v = rng.Normal();
  Normalize(current);
  double current_ll = likelihood(current);

  BrexResult result;
  result.map_sample.weights = current;
  result.map_log_likelihood = current_ll;
  result.log_likelihood_trace.reserve(config.steps);
  std::vector<double> proposal(current.size());
  for (std::size_t step = 0; step < config.steps; ++step) {
    for (std::size_t d = 0; d < current.size(); ++d) {
      proposal[d] = current[d] + rng.Normal(0.0, config.step_size);
    }
    Normalize(proposal);
    const double proposal_ll = likelihood(proposal);
    if (MetropolisAccept(current_ll, proposal_ll, rng)) {
      current.swap(proposal);
      current_ll = proposal_ll;
      ++result.accepted;
      if (current_ll > result.map_log_likelihood) {
        result.map_log_likelihood = current_ll;
        result.map_sample.weights = current;
      }
    }
    result.log_likelihood_trace.push_back(current_ll);
    if (step >= config.burn_in && (step - config.burn_in) % config.thin == 0) {
      result.samples.push_back(RewardHypothesis{current});
    }
  }
  result.stuck = result.accepted == 0;
  return result;
}

PolicyHypothesis BehaviorClone(std::span<const Segment> demos, int num_states, int num_actions,
                               double laplace) {
  if (demos.empty()) throw InvalidInput("behaviour cloning needs demonstrations");
  if (!(laplace >= 0.0)) throw ConfigError("laplace smoothing must be non-negative");
  std::vector<double> counts(static_cast<std::size_t>(num_states) * num_actions, 0.0);
  for (const auto& demo : demos) {
    for (const auto& step : demo.steps) {
      if (step.is_scalar() || step.state_id() < 0 || step.state_id() >= num_states ||
          step.action < 0 || step.action >= num_actions) {
        throw InvalidInput("demonstration step outside the tabular domain");
      }
      counts[static_cast<std::size_t>(step.state_id()) * num_actions + step.action] += 1.0;
    }
  }
  PolicyHypothesis policy(num_states, num_actions);
  for (int s = 0; s < num_states; ++s) {
    const double* row = counts.data() + static_cast<std::size_t>(s) * num_actions;
    const double visits = std::accumulate(row, row + num_actions, 0.0);
    for (int a = 0; a < num_actions; ++a) {
      if (visits == 0.0) {
        policy.logit(s, a) = 0.0;
        continue;
      }
      const double p = (row[a] + laplace) / (visits + laplace * num_actions);
      policy.logit(s, a) = p > 0.0 ? std::max(std::log(p), kMinLogit) : kMinLogit;
    }
  }
  return policy;
}

CplLoss CplLossAndGradient(const PolicyHypothesis& policy, std::span<const PreferencePair> prefs,
                           const SegmentSet& segments, double alpha) {
  const auto na = static_cast<std::size_t>(policy.num_actions());
  const auto log_pi = policy.LogSoftmaxTable();
  CplLoss out;
  out.gradient.assign(log_pi.size(), 0.0);

  auto segment_log_prob = [&](const Segment& seg) {
    double total = 0.0;
    for (const auto& step : seg.steps) {
      total += log_pi[static_cast<std::size_t>(step.state_id()) * na + step.action];
    }
    return total;
  };
  // d/dlogit[s][b] of log pi(a|s) is 1[a == b] - pi(b|s).
  auto accumulate = [&](const Segment& seg, double coeff) {
    for (const auto& step : seg.steps) {
      const auto base = static_cast<std::size_t>(step.state_id()) * na;
      for (std::size_t b = 0; b < na; ++b) out.gradient[base + b] -= coeff * std::exp(log_pi[base + b]);
      out.gradient[base + step.action] += coeff;
    }
  };

  for (const auto& p : prefs) {
    const Segment& winner = segments.at(p.winner);
    const Segment& loser = segments.at(p.loser);
    const double margin = alpha * (segment_log_prob(winner) - segment_log_prob(loser));
    out.loss -= LogSigmoid(margin);
    // dLoss/dmargin = -sigmoid(-margin); chain through alpha.
    const double coeff = -alpha * Sigmoid(-margin);
    accumulate(winner, coeff);
    accumulate(loser, -coeff);
  }
  return out;
}

void CPLConfig::Validate() const {
  if (!(alpha > 0.0)) throw ConfigError("cpl alpha must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("cpl learning_rate must be positive");
  if (num_models == 0) throw ConfigError("cpl num_models must be positive");
  if (!(subsample_fraction > 0.0 && subsample_fraction <= 1.0)) {
    throw ConfigError("cpl subsample_fraction must lie in (0, 1]");
  }
}

std::vector<PolicyHypothesis> MultiCpl(const PolicyHypothesis& pretrained,
                                       std::span<const PreferencePair> prefs,
                                       const SegmentSet& segments, const CPLConfig& config,
                                       std::vector<std::vector<double>>* loss_curves, int jobs) {
  config.Validate();
  ValidatePairs(prefs, segments);
  const RandomStream root(config.seed);
  std::vector<PolicyHypothesis> models(config.num_models, pretrained);
  if (loss_curves != nullptr) loss_curves->assign(config.num_models, {});

  ParallelFor(config.num_models, jobs, [&](std::size_t m) {
    RandomStream rng = root.Child(m);
    std::vector<std::size_t> idx(prefs.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.Shuffle(idx);
    const auto keep = static_cast<std::size_t>(
        std::llround(config.subsample_fraction * static_cast<double>(prefs.size())));
    std::vector<PreferencePair> subset;
    subset.reserve(keep);
    for (std::size_t i = 0; i < keep && i < idx.size(); ++i) subset.push_back(prefs[idx[i]]);

    PolicyHypothesis& model = models[m];
    for (std::size_t it = 0; it < config.iterations; ++it) {
      const CplLoss step = CplLossAndGradient(model, subset, segments, config.alpha);
      if (loss_curves != nullptr) (*loss_curves)[m].push_back(step.loss);
      auto logits = model.logits();
      for (std::size_t k = 0; k < logits.size(); ++k) {
        logits[k] -= config.learning_rate * step.gradient[k];
      }
    }
    if (loss_curves != nullptr) {
      (*loss_curves)[m].push_back(CplLossAndGradient(model, subset, segments, config.alpha).loss);
    }
  });
  return models;
}

}  // namespace popl
