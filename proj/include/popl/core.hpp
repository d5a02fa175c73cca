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

// Core types: segments, preferences, hypotheses, and the pass predicate that
// every selection and evaluation routine is built on.

#ifndef POPL_CORE_HPP_
#define POPL_CORE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace popl {

class FeatureEmbedding;

inline constexpr int kNoAction = -1;

// A single (state, action) pair. Tabular domains use an integer state id;
// the stateless domain uses a scalar state in [0, 1] and no action.
struct Step {
  std::variant<int, double> state;
  int action = kNoAction;

  bool is_scalar() const { return std::holds_alternative<double>(state); }
  int state_id() const { return std::get<int>(state); }
  double scalar() const { return std::get<double>(state); }

  friend bool operator==(const Step&, const Step&) = default;
};

struct Segment {
  std::vector<Step> steps;

  static Segment Scalar(double a) { return Segment{{Step{a, kNoAction}}}; }

  friend bool operator==(const Segment&, const Segment&) = default;
};

// The dataset of segments that preferences index into. num_states and
// num_actions bound the tabular ids; both are zero for scalar datasets.
struct SegmentSet {
  std::vector<Segment> segments;
  int num_states = 0;
  int num_actions = 0;

  std::size_t size() const { return segments.size(); }
  const Segment& at(std::size_t i) const;
  bool scalar() const { return num_states == 0; }

  // Throws InvalidInput if any segment breaks the domain invariants.
  void Validate() const;
};

// What a learner is allowed to see: the ordered pair only.
struct PreferencePair {
  std::size_t winner = 0;
  std::size_t loser = 0;

  PreferencePair Reversed() const { return {loser, winner}; }
  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

// A labelled preference. group and annotator carry hidden context and are
// only consumed by dataset generation and evaluation code.
struct Preference {
  PreferencePair pair;
  int group = 0;
  int annotator = 0;

  friend bool operator==(const Preference&, const Preference&) = default;
};

std::vector<PreferencePair> LearnerView(std::span<const Preference> prefs);

// Throws IndexError / InvalidInput if a pair is self-referential or out of range.
void ValidatePairs(std::span<const PreferencePair> prefs, const SegmentSet& segments);

struct RewardHypothesis {
  std::vector<double> weights;

  friend bool operator==(const RewardHypothesis&, const RewardHypothesis&) = default;
};

// Tabular softmax policy; logits are stored row-major [state][action].
class PolicyHypothesis {
 public:
  PolicyHypothesis() = default;
  PolicyHypothesis(int num_states, int num_actions);
  PolicyHypothesis(int num_states, int num_actions, std::vector<double> logits);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  double& logit(int s, int a) { return logits_[Offset(s, a)]; }
  double logit(int s, int a) const { return logits_[Offset(s, a)]; }
  std::span<double> logits() { return logits_; }
  std::span<const double> logits() const { return logits_; }
  std::span<const double> row(int s) const;

  // log pi(a|s), computed from the logits with a max-shifted log-sum-exp.
  double LogProb(int s, int a) const;
  std::vector<double> Probabilities(int s) const;
  // Full [state][action] log-softmax table.
  std::vector<double> LogSoftmaxTable() const;

  // Sum of log pi(a|s) over a tabular segment.
  double SegmentLogProb(const Segment& segment) const;

  friend bool operator==(const PolicyHypothesis&, const PolicyHypothesis&) = default;

 private:
  std::size_t Offset(int s, int a) const;

  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<double> logits_;
};

using Hypothesis = std::variant<RewardHypothesis, PolicyHypothesis>;

enum class HypothesisKind { kReward, kPolicy };

HypothesisKind KindOf(const Hypothesis& h);
std::span<double> Parameters(Hypothesis& h);
std::span<const double> Parameters(const Hypothesis& h);

// Definition-1 predicate for policies: strict log-likelihood ordering.
bool PolicyPasses(const PolicyHypothesis& policy, const PreferencePair& pref,
                  const SegmentSet& segments);

// Partial-return predicate for reward functions: strict summed-reward ordering.
bool RewardPasses(const RewardHypothesis& reward, const PreferencePair& pref,
                  const SegmentSet& segments, const FeatureEmbedding& embed);

// Row-major boolean matrix [candidate][preference].
class PassMatrix {
 public:
  PassMatrix() = default;
  PassMatrix(std::size_t num_candidates, std::size_t num_preferences);
  // Builds from explicit rows; all rows must have equal length.
  static PassMatrix FromRows(const std::vector<std::vector<bool>>& rows);

  std::size_t num_candidates() const { return rows_; }
  std::size_t num_preferences() const { return cols_; }

  bool passes(std::size_t candidate, std::size_t pref) const {
    return cells_[candidate * cols_ + pref] != 0;
  }
  void set(std::size_t candidate, std::size_t pref, bool value) {
    cells_[candidate * cols_ + pref] = value ? 1 : 0;
  }
  std::span<const std::uint8_t> row(std::size_t candidate) const {
    return {cells_.data() + candidate * cols_, cols_};
  }
  std::size_t PassCount(std::size_t candidate) const;

  friend bool operator==(const PassMatrix&, const PassMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> cells_;
};

// Binds a pass predicate to a segment set so that a whole population can be
// scored against many preferences. Per-segment features are cached once.
class PassEvaluator {
 public:
  // Reward hypotheses scored as summed w . phi(state) over each segment.
  static PassEvaluator ForRewards(const SegmentSet& segments, const FeatureEmbedding& embed);
  // Policy hypotheses scored as summed log pi(a|s) over each segment.
  static PassEvaluator ForPolicies(const SegmentSet& segments);

  HypothesisKind kind() const { return kind_; }
  const SegmentSet& segments() const { return *segments_; }
  std::size_t feature_dim() const { return feature_dim_; }

  // Score of every segment listed in segment_ids (same order).
  std::vector<double> Scores(const Hypothesis& h, std::span<const std::size_t> segment_ids) const;
  double Score(const Hypothesis& h, std::size_t segment_id) const;
  bool Passes(const Hypothesis& h, const PreferencePair& pref) const;
  // Fraction of prefs passed; 0 for an empty list.
  double PassRate(const Hypothesis& h, std::span<const PreferencePair> prefs) const;

 private:
  PassEvaluator() = default;
  void CheckKind(const Hypothesis& h) const;

  HypothesisKind kind_ = HypothesisKind::kReward;
  const SegmentSet* segments_ = nullptr;
  std::size_t feature_dim_ = 0;
  // Reward mode: [segment][feature] summed features.
  std::vector<double> segment_features_;
};

// passes[i][j] = predicate of candidate i on preference j. Cells are computed
// on up to `jobs` threads; the result does not depend on the thread count.
PassMatrix BuildPassMatrix(std::span<const Hypothesis> population,
                           std::span<const PreferencePair> prefs, const PassEvaluator& evaluator,
                           int jobs = 1);

// True iff a passes a strict superset of the preferences b passes.
bool Dominates(const PassMatrix& pm, std::size_t a, std::size_t b);

// Indices of candidates that no other candidate strictly dominates.
std::vector<std::size_t> ParetoFront(const PassMatrix& pm);

}  // namespace popl

#endif  // POPL_CORE_HPP_
