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

#include "popl/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "popl/errors.hpp"
#include "popl/models.hpp"
#include "popl/parallel.hpp"

namespace popl {

const Segment& SegmentSet::at(std::size_t i) const {
  if (i >= segments.size()) {
    throw IndexError("segment index " + std::to_string(i) + " out of range (size " +
                     std::to_string(segments.size()) + ")");
  }
  return segments[i];
}

void SegmentSet::Validate() const {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    const std::string where = "segment " + std::to_string(i);
    if (seg.steps.empty()) throw InvalidInput(where + " is empty");
    if (scalar()) {
      if (seg.steps.size() != 1) throw InvalidInput(where + ": scalar segments have one step");
      const auto& step = seg.steps.front();
      if (!step.is_scalar()) throw InvalidInput(where + ": expected a scalar state");
      const double a = step.scalar();
      if (!(a >= 0.0 && a <= 1.0)) throw InvalidInput(where + ": scalar state outside [0, 1]");
      continue;
    }
    for (const auto& step : seg.steps) {
      if (step.is_scalar()) throw InvalidInput(where + ": expected a tabular state");
      if (step.state_id() < 0 || step.state_id() >= num_states) {
        throw InvalidInput(where + ": state id out of bounds");
      }
      if (step.action < 0 || step.action >= num_actions) {
        throw InvalidInput(where + ": action id out of bounds");
      }
    }
  }
}

std::vector<PreferencePair> LearnerView(std::span<const Preference> prefs) {
  std::vector<PreferencePair> out;
  out.reserve(prefs.size());
  for (const auto& p : prefs) out.push_back(p.pair);
  return out;
}

void ValidatePairs(std::span<const PreferencePair> prefs, const SegmentSet& segments) {
  for (const auto& p : prefs) {
    segments.at(p.winner);
    segments.at(p.loser);
    if (p.winner == p.loser) throw InvalidInput("preference compares a segment with itself");
  }
}

// --- PolicyHypothesis -------------------------------------------------------

PolicyHypothesis::PolicyHypothesis(int num_states, int num_actions)
    : PolicyHypothesis(num_states, num_actions,
                       std::vector<double>(static_cast<std::size_t>(num_states) * num_actions)) {}

PolicyHypothesis::PolicyHypothesis(int num_states, int num_actions, std::vector<double> logits)
    : num_states_(num_states), num_actions_(num_actions), logits_(std::move(logits)) {
  if (num_states <= 0 || num_actions <= 0) {
    throw ConfigError("policy needs positive state and action counts");
  }
  if (logits_.size() != static_cast<std::size_t>(num_states) * num_actions) {
    throw ConfigError("policy logits size does not match num_states * num_actions");
  }
  for (double v : logits_) {
    if (!std::isfinite(v)) throw InvalidInput("policy logits must be finite");
  }
}

std::size_t PolicyHypothesis::Offset(int s, int a) const {
  if (s < 0 || s >= num_states_ || a < 0 || a >= num_actions_) {
    throw IndexError("state/action (" + std::to_string(s) + ", " + std::to_string(a) +
                     ") outside policy table");
  }
  return static_cast<std::size_t>(s) * num_actions_ + a;
}

std::span<const double> PolicyHypothesis::row(int s) const {
  return {logits_.data() + Offset(s, 0), static_cast<std::size_t>(num_actions_)};
}

namespace {

double LogSumExp(std::span<const double> xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

}  // namespace

double PolicyHypothesis::LogProb(int s, int a) const {
  const auto r = row(s);
  return logit(s, a) - LogSumExp(r);
}

std::vector<double> PolicyHypothesis::Probabilities(int s) const {
  const auto r = row(s);
  const double lse = LogSumExp(r);
  std::vector<double> p(r.size());
  for (std::size_t a = 0; a < r.size(); ++a) p[a] = std::exp(r[a] - lse);
  return p;
}

std::vector<double> PolicyHypothesis::LogSoftmaxTable() const {
  std::vector<double> table(logits_.size());
  for (int s = 0; s < num_states_; ++s) {
    const auto r = row(s);
    const double lse = LogSumExp(r);
    for (int a = 0; a < num_actions_; ++a) {
      table[static_cast<std::size_t>(s) * num_actions_ + a] = r[a] - lse;
    }
  }
  return table;
}

double PolicyHypothesis::SegmentLogProb(const Segment& segment) const {
  double total = 0.0;
  for (const auto& step : segment.steps) {
    if (step.is_scalar()) throw InvalidInput("policy cannot score a scalar-state segment");
    total += LogProb(step.state_id(), step.action);
  }
  return total;
}

// --- Hypothesis helpers -----------------------------------------------------

HypothesisKind KindOf(const Hypothesis& h) {
  return std::holds_alternative<RewardHypothesis>(h) ? HypothesisKind::kReward
                                                     : HypothesisKind::kPolicy;
}

std::span<double> Parameters(Hypothesis& h) {
  if (auto* r = std::get_if<RewardHypothesis>(&h)) return r->weights;
  return std::get<PolicyHypothesis>(h).logits();
}

std::span<const double> Parameters(const Hypothesis& h) {
  if (const auto* r = std::get_if<RewardHypothesis>(&h)) return r->weights;
  return std::get<PolicyHypothesis>(h).logits();
}

// --- Pass predicates --------------------------------------------------------

bool PolicyPasses(const PolicyHypothesis& policy, const PreferencePair& pref,
                  const SegmentSet& segments) {
  const double winner = policy.SegmentLogProb(segments.at(pref.winner));
  const double loser = policy.SegmentLogProb(segments.at(pref.loser));
  return winner > loser;
}

namespace {

double SegmentReward(const RewardHypothesis& reward, const Segment& segment,
                     const FeatureEmbedding& embed) {
  double total = 0.0;
  for (const auto& step : segment.steps) {
    if (!step.is_scalar()) throw InvalidInput("reward embedding needs scalar states");
    total += embed.Reward(reward, step.scalar());
  }
  return total;
}

}  // namespace

bool RewardPasses(const RewardHypothesis& reward, const PreferencePair& pref,
                  const SegmentSet& segments, const FeatureEmbedding& embed) {
  if (reward.weights.size() != static_cast<std::size_t>(embed.dim())) {
    throw ConfigError("reward weight length does not match embedding dimension");
  }
  return SegmentReward(reward, segments.at(pref.winner), embed) >
         SegmentReward(reward, segments.at(pref.loser), embed);
}

// --- PassMatrix -------------------------------------------------------------

PassMatrix::PassMatrix(std::size_t num_candidates, std::size_t num_preferences)
    : rows_(num_candidates), cols_(num_preferences), cells_(num_candidates * num_preferences, 0) {}

PassMatrix PassMatrix::FromRows(const std::vector<std::vector<bool>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  PassMatrix pm(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw ConfigError("ragged pass matrix rows");
    for (std::size_t j = 0; j < cols; ++j) pm.set(i, j, rows[i][j]);
  }
  return pm;
}

std::size_t PassMatrix::PassCount(std::size_t candidate) const {
  const auto r = row(candidate);
  return static_cast<std::size_t>(std::count(r.begin(), r.end(), std::uint8_t{1}));
}

// --- PassEvaluator ----------------------------------------------------------

PassEvaluator PassEvaluator::ForRewards(const SegmentSet& segments, const FeatureEmbedding& embed) {
  PassEvaluator ev;
  ev.kind_ = HypothesisKind::kReward;
  ev.segments_ = &segments;
  ev.feature_dim_ = static_cast<std::size_t>(embed.dim());
  ev.segment_features_.resize(segments.size() * ev.feature_dim_);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto f = embed.SegmentFeatures(segments.segments[i]);
    std::copy(f.begin(), f.end(), ev.segment_features_.begin() + i * ev.feature_dim_);
  }
  return ev;
}

PassEvaluator PassEvaluator::ForPolicies(const SegmentSet& segments) {
  if (segments.scalar()) throw ConfigError("policy evaluator needs a tabular segment set");
  PassEvaluator ev;
  ev.kind_ = HypothesisKind::kPolicy;
  ev.segments_ = &segments;
  return ev;
}

void PassEvaluator::CheckKind(const Hypothesis& h) const {
  if (KindOf(h) != kind_) throw ConfigError("hypothesis kind does not match evaluator");
  if (kind_ == HypothesisKind::kReward &&
      std::get<RewardHypothesis>(h).weights.size() != feature_dim_) {
    throw ConfigError("reward weight length does not match embedding dimension");
  }
  if (kind_ == HypothesisKind::kPolicy) {
    const auto& p = std::get<PolicyHypothesis>(h);
    if (p.num_states() != segments_->num_states || p.num_actions() != segments_->num_actions) {
      throw ConfigError("policy table shape does not match the segment set");
    }
  }
}

std::vector<double> PassEvaluator::Scores(const Hypothesis& h,
                                          std::span<const std::size_t> segment_ids) const {
  CheckKind(h);
  std::vector<double> out(segment_ids.size());
  if (kind_ == HypothesisKind::kReward) {
    const auto& w = std::get<RewardHypothesis>(h).weights;
    for (std::size_t k = 0; k < segment_ids.size(); ++k) {
      segments_->at(segment_ids[k]);
      const double* f = segment_features_.data() + segment_ids[k] * feature_dim_;
      double acc = 0.0;
      for (std::size_t d = 0; d < feature_dim_; ++d) acc += w[d] * f[d];
      out[k] = acc;
    }
    return out;
  }
  const auto& policy = std::get<PolicyHypothesis>(h);
  const auto table = policy.LogSoftmaxTable();
  const auto na = static_cast<std::size_t>(policy.num_actions());
  for (std::size_t k = 0; k < segment_ids.size(); ++k) {
    double acc = 0.0;
    for (const auto& step : segments_->at(segment_ids[k]).steps) {
      acc += table[static_cast<std::size_t>(step.state_id()) * na + step.action];
    }
    out[k] = acc;
  }
  return out;
}

double PassEvaluator::Score(const Hypothesis& h, std::size_t segment_id) const {
  const std::size_t ids[] = {segment_id};
  return Scores(h, ids).front();
}

bool PassEvaluator::Passes(const Hypothesis& h, const PreferencePair& pref) const {
  const std::size_t ids[] = {pref.winner, pref.loser};
  const auto s = Scores(h, ids);
  return s[0] > s[1];
}

double PassEvaluator::PassRate(const Hypothesis& h, std::span<const PreferencePair> prefs) const {
  if (prefs.empty()) return 0.0;
  const PassMatrix pm = BuildPassMatrix(std::span<const Hypothesis>(&h, 1), prefs, *this);
  return static_cast<double>(pm.PassCount(0)) / static_cast<double>(prefs.size());
}

// --- Matrix construction and dominance --------------------------------------

PassMatrix BuildPassMatrix(std::span<const Hypothesis> population,
                           std::span<const PreferencePair> prefs, const PassEvaluator& evaluator,
                           int jobs) {
  for (const auto& h : population) {
    if (KindOf(h) != KindOf(population.front())) {
      throw ConfigError("population mixes reward and policy hypotheses");
    }
  }
  ValidatePairs(prefs, evaluator.segments());

  // Score each referenced segment once per candidate.
  std::vector<std::size_t> ids;
  ids.reserve(prefs.size() * 2);
  for (const auto& p : prefs) {
    ids.push_back(p.winner);
    ids.push_back(p.loser);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<std::size_t> winner_slot(prefs.size()), loser_slot(prefs.size());
  for (std::size_t j = 0; j < prefs.size(); ++j) {
    winner_slot[j] = std::lower_bound(ids.begin(), ids.end(), prefs[j].winner) - ids.begin();
    loser_slot[j] = std::lower_bound(ids.begin(), ids.end(), prefs[j].loser) - ids.begin();
  }

  PassMatrix pm(population.size(), prefs.size());
  ParallelFor(population.size(), jobs, [&](std::size_t i) {
    const auto scores = evaluator.Scores(population[i], ids);
    for (std::size_t j = 0; j < prefs.size(); ++j) {
      pm.set(i, j, scores[winner_slot[j]] > scores[loser_slot[j]]);
    }
  });
  return pm;
}

bool Dominates(const PassMatrix& pm, std::size_t a, std::size_t b) {
  const auto ra = pm.row(a);
  const auto rb = pm.row(b);
  bool strictly = false;
  for (std::size_t j = 0; j < ra.size(); ++j) {
    if (rb[j] && !ra[j]) return false;
    if (ra[j] && !rb[j]) strictly = true;
  }
  return strictly;
}

std::vector<std::size_t> ParetoFront(const PassMatrix& pm) {
  if (pm.num_candidates() == 0) throw InvalidInput("pareto front of an empty population");
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < pm.num_candidates(); ++i) {
    bool dominated = false;
    for (std::size_t k = 0; k < pm.num_candidates() && !dominated; ++k) {
      dominated = k != i && Dominates(pm, k, i);
    }
    if (!dominated) front.push_back(i);
  }
  return front;
}

}  // namespace popl
