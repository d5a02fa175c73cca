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

#include "popl/domains.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "popl/errors.hpp"
#include "popl/models.hpp"

namespace popl {

namespace {

// Upper bound on redraws when a pair happens to tie under its labeller.
constexpr int kMaxTieRedraws = 10000;

}  // namespace

// --- Stateless --------------------------------------------------------------

void StatelessDatasetSpec::Validate() const {
  if (num_prefs == 0) throw ConfigError("num_prefs must be positive");
  if (num_annotators == 0) throw ConfigError("num_annotators must be positive");
  if (!(group_probability >= 0.0 && group_probability <= 1.0)) {
    throw ConfigError("group_probability must lie in [0, 1]");
  }
  if (holdout_per_group == 0) throw ConfigError("holdout_per_group must be positive");
  if (resolved_holdout_offset() < num_prefs) {
    throw ConfigError("holdout_offset overlaps the training pairs [0, num_prefs)");
  }
  if (generation_beta && !(*generation_beta >= 0.0)) {
    throw ConfigError("generation_beta must be non-negative");
  }
}

std::optional<bool> StatelessFirstWins(double a, double b, int z) {
  const double ua = SyntheticUtility(a, z);
  const double ub = SyntheticUtility(b, z);
  if (ua == ub) return std::nullopt;
  return ua > ub;
}

namespace {

// Appends both scalar segments of a labelled pair and returns the preference.
Preference LabelStatelessPair(RandomStream& pair_rng, int z, int annotator,
                              const std::optional<double>& beta, SegmentSet& segments) {
  const double a = pair_rng.Uniform();
  double b = pair_rng.Uniform();
  for (int attempt = 0;; ++attempt) {
    if (attempt > kMaxTieRedraws) throw std::runtime_error("could not draw an untied pair");
    const auto first = StatelessFirstWins(a, b, z);
    if (!first) {
      b = pair_rng.Uniform();
      continue;
    }
    bool a_wins = *first;
    if (beta) {
      const double p = BtProbability(SyntheticUtility(a, z), SyntheticUtility(b, z), {*beta});
      a_wins = pair_rng.Bernoulli(p);
    }
    const std::size_t ia = segments.segments.size();
    segments.segments.push_back(Segment::Scalar(a));
    segments.segments.push_back(Segment::Scalar(b));
    Preference pref;
    pref.pair = a_wins ? PreferencePair{ia, ia + 1} : PreferencePair{ia + 1, ia};
    pref.group = z;
    pref.annotator = annotator;
    return pref;
  }
}

}  // namespace

Dataset GenerateStatelessDataset(const StatelessDatasetSpec& spec) {
  spec.Validate();
  const RandomStream root(spec.seed);
  RandomStream annotator_rng = root.Child("annotators");
  std::vector<int> annotator_group(spec.num_annotators);
  for (auto& z : annotator_group) z = annotator_rng.Bernoulli(spec.group_probability) ? 1 : 0;

  Dataset data;
  const RandomStream pairs = root.Child("pair");
  const RandomStream assign = root.Child("assign");
  for (std::size_t k = 0; k < spec.num_prefs; ++k) {
    RandomStream pick = assign.Child(k);
    const auto annotator = static_cast<int>(pick.Index(spec.num_annotators));
    RandomStream pair_rng = pairs.Child(k);
    data.train.push_back(LabelStatelessPair(pair_rng, annotator_group[annotator], annotator,
                                            spec.generation_beta, data.segments));
  }
  const std::size_t holdout_begin = spec.resolved_holdout_offset();
  const std::size_t test_begin = holdout_begin + kNumGroups * spec.holdout_per_group;
  for (int g = 0; g < kNumGroups; ++g) {
    for (std::size_t i = 0; i < spec.holdout_per_group; ++i) {
      RandomStream pair_rng = pairs.Child(holdout_begin + g * spec.holdout_per_group + i);
      data.holdout[g].push_back(
          LabelStatelessPair(pair_rng, g, -1, std::nullopt, data.segments));
    }
    for (std::size_t i = 0; i < spec.test_per_group; ++i) {
      RandomStream pair_rng = pairs.Child(test_begin + g * spec.test_per_group + i);
      data.test[g].push_back(LabelStatelessPair(pair_rng, g, -1, std::nullopt, data.segments));
    }
  }

  if (!spec.generation_beta) {
    for (const auto& p : data.train) {
      const double w = data.segments.segments[p.pair.winner].steps[0].scalar();
      const double l = data.segments.segments[p.pair.loser].steps[0].scalar();
      if (!(SyntheticUtility(w, p.group) > SyntheticUtility(l, p.group))) {
        throw std::logic_error("training preference not passed by its own group's utility");
      }
    }
  }
  return data;
}

// --- GridWorld --------------------------------------------------------------

GridWorld::GridWorld(int width, int height, std::vector<Cell> walls, std::optional<Doors> doors,
                     Cell start, Cell goal, int max_steps, double discount)
    : width_(width),
      height_(height),
      wall_(static_cast<std::size_t>(std::max(0, width * height)), false),
      doors_(doors),
      start_(start),
      goal_(goal),
      max_steps_(max_steps),
      discount_(discount) {
  if (width <= 0 || height <= 0) throw ConfigError("grid dimensions must be positive");
  for (const Cell& c : walls) {
    if (!InBounds(c)) throw ConfigError("wall outside the grid");
    wall_[StateOf(c)] = true;
  }
}

GridWorld GridWorld::TwoDoor(int max_steps, double discount) {
  const Doors doors{{4, 1}, {4, 7}};
  std::vector<Cell> walls;
  for (int y = 0; y < 9; ++y) {
    if (y != doors.top.y && y != doors.bottom.y) walls.push_back({4, y});
  }
  GridWorld world(9, 9, walls, doors, {0, 4}, {8, 4}, max_steps, discount);
  world.Validate();
  return world;
}

GridWorld GridWorld::Corridor(int length, int max_steps, double discount) {
  GridWorld world(length, 1, {}, std::nullopt, {0, 0}, {length - 1, 0}, max_steps, discount);
  world.Validate();
  return world;
}

bool GridWorld::IsWall(Cell c) const { return wall_[StateOf(c)]; }

int GridWorld::Next(int state, int action) const {
  Cell c = CellOf(state);
  switch (action) {
    case kUp: --c.y; break;
    case kDown: ++c.y; break;
    case kLeft: --c.x; break;
    case kRight: ++c.x; break;
    default: throw IndexError("unknown action " + std::to_string(action));
  }
  if (!InBounds(c) || IsWall(c)) return state;
  return StateOf(c);
}

std::vector<int> GridWorld::Distances(int from) const {
  std::vector<int> dist(num_states(), -1);
  std::deque<int> queue{from};
  dist[from] = 0;
  while (!queue.empty()) {
    const int s = queue.front();
    queue.pop_front();
    for (int a = 0; a < kNumGridActions; ++a) {
      const int n = Next(s, a);
      if (dist[n] < 0) {
        dist[n] = dist[s] + 1;
        queue.push_back(n);
      }
    }
  }
  return dist;
}

bool GridWorld::GoalReachableThrough(Cell door) const {
  if (!doors_) return Distances(start_state())[goal_state()] >= 0;
  GridWorld closed = *this;
  const Cell other = door == doors_->top ? doors_->bottom : doors_->top;
  closed.wall_[StateOf(other)] = true;
  return closed.Distances(start_state())[goal_state()] >= 0;
}

void GridWorld::Validate() const {
  if (max_steps_ <= 0) throw InvalidInput("max_steps must be positive");
  if (!(discount_ > 0.0 && discount_ < 1.0)) throw InvalidInput("discount must lie in (0, 1)");
  for (Cell c : {start_, goal_}) {
    if (!InBounds(c) || IsWall(c)) throw InvalidInput("start and goal must be open cells");
  }
  const auto dist = Distances(start_state());
  for (int s = 0; s < num_states(); ++s) {
    if (!wall_[s] && dist[s] < 0) throw InvalidInput("open cell unreachable from start");
  }
  if (doors_) {
    for (Cell d : {doors_->top, doors_->bottom}) {
      if (!InBounds(d) || IsWall(d)) throw InvalidInput("door cells must be open");
      // The doors sit in a wall column: everything else in it is wall.
      for (int y = 0; y < height_; ++y) {
        const Cell c{d.x, y};
        if (!(c == doors_->top || c == doors_->bottom) && !IsWall(c)) {
          throw InvalidInput("wall column has an opening besides the doors");
        }
      }
      if (!GoalReachableThrough(d)) throw InvalidInput("goal unreachable through a door");
    }
    if ((start_.x - doors_->top.x) * (goal_.x - doors_->top.x) >= 0) {
      throw InvalidInput("start and goal must lie on opposite sides of the door column");
    }
  }
}

double GroupReward::Transition(const GridWorld& world, int state, int next) const {
  double r = step_penalty;
  if (next == world.goal_state() && state != world.goal_state()) r += goal_reward;
  const auto& doors = world.doors();
  if (!doors) return r;
  const int goal_side = world.goal().x > doors->top.x ? 1 : -1;
  const Cell from = world.CellOf(state);
  const Cell to = world.CellOf(next);
  for (const Cell door : {doors->top, doors->bottom}) {
    const bool preferred = (door == doors->top) == (group_id == 0);
    const double value = preferred ? preferred_door_bonus : other_door_penalty;
    const Cell beyond{door.x + goal_side, door.y};
    if (from == door && to == beyond) r += value;
    if (from == beyond && to == door) r -= value;
  }
  return r;
}

namespace {

bool Absorbing(const GridWorld& world, int s) {
  return s == world.goal_state() || world.IsWall(world.CellOf(s));
}

double Backup(const GridWorld& world, const GroupReward& reward, const std::vector<double>& v,
              int s, int a) {
  const int n = world.Next(s, a);
  return reward.Transition(world, s, n) + world.discount() * v[n];
}

}  // namespace

ValueIterationResult ValueIteration(const GridWorld& world, const GroupReward& reward, double tol,
                                    double kappa) {
  if (!(tol > 0.0)) throw ConfigError("value iteration tolerance must be positive");
  const int ns = world.num_states();
  ValueIterationResult out;
  out.values.assign(ns, 0.0);
  std::vector<double> next(ns, 0.0);
  for (;;) {
    if (out.sweeps >= kMaxValueIterationSweeps) {
      throw ConvergenceError("value iteration did not converge");
    }
    ++out.sweeps;
    double change = 0.0;
    for (int s = 0; s < ns; ++s) {
      if (Absorbing(world, s)) {
        next[s] = 0.0;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < kNumGridActions; ++a) best = std::max(best, Backup(world, reward, out.values, s, a));
      next[s] = best;
      change = std::max(change, std::abs(best - out.values[s]));
    }
    out.values.swap(next);
    if (change < tol) break;
  }
  out.q.assign(static_cast<std::size_t>(ns) * kNumGridActions, 0.0);
  out.policy = PolicyHypothesis(ns, kNumGridActions);
  for (int s = 0; s < ns; ++s) {
    if (Absorbing(world, s)) continue;
    for (int a = 0; a < kNumGridActions; ++a) {
      const double q = Backup(world, reward, out.values, s, a);
      out.q[static_cast<std::size_t>(s) * kNumGridActions + a] = q;
      out.policy.logit(s, a) = kappa * q;
    }
  }
  return out;
}

double BellmanResidual(const GridWorld& world, const GroupReward& reward,
                       const std::vector<double>& values) {
  double residual = 0.0;
  for (int s = 0; s < world.num_states(); ++s) {
    if (Absorbing(world, s)) {
      residual = std::max(residual, std::abs(values[s]));
      continue;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < kNumGridActions; ++a) best = std::max(best, Backup(world, reward, values, s, a));
    residual = std::max(residual, std::abs(best - values[s]));
  }
  return residual;
}

bool Trajectory::reached(int state) const {
  return std::find(states.begin(), states.end(), state) != states.end();
}

RolloutResult Rollout(const PolicyHypothesis& policy, const GridWorld& world, RandomStream& rng,
                      std::size_t episodes, double epsilon) {
  if (policy.num_states() != world.num_states() || policy.num_actions() != kNumGridActions) {
    throw ConfigError("policy table does not cover the grid");
  }
  RolloutResult out;
  out.occupancy.assign(world.num_states(), 0.0);
  const RandomStream base(rng.engine()());
  std::vector<std::vector<double>> probs(world.num_states());
  for (int s = 0; s < world.num_states(); ++s) probs[s] = policy.Probabilities(s);

  for (std::size_t e = 0; e < episodes; ++e) {
    RandomStream ep = base.Child(e);
    Trajectory t;
    int s = world.start_state();
    t.states.push_back(s);
    for (int step = 0; step < world.max_steps() && s != world.goal_state(); ++step) {
      int a = 0;
      if (epsilon > 0.0 && ep.Uniform() < epsilon) {
        a = static_cast<int>(ep.Index(kNumGridActions));
      } else {
        std::discrete_distribution<int> pick(probs[s].begin(), probs[s].end());
        a = pick(ep.engine());
      }
      s = world.Next(s, a);
      t.actions.push_back(a);
      t.states.push_back(s);
    }
    for (int v : t.states) out.occupancy[v] += 1.0;
    out.trajectories.push_back(std::move(t));
  }
  if (episodes > 0) {
    for (double& o : out.occupancy) o /= static_cast<double>(episodes);
  }
  return out;
}

DoorUsage MeasureDoorUsage(const std::vector<Trajectory>& trajectories, const GridWorld& world) {
  DoorUsage usage;
  if (trajectories.empty()) return usage;
  const int goal = world.goal_state();
  for (const auto& t : trajectories) {
    if (!t.reached(goal)) continue;
    usage.goal_rate += 1.0;
    if (world.doors()) {
      if (t.reached(world.StateOf(world.doors()->top))) usage.top_rate += 1.0;
      if (t.reached(world.StateOf(world.doors()->bottom))) usage.bottom_rate += 1.0;
    }
  }
  const auto n = static_cast<double>(trajectories.size());
  usage.goal_rate /= n;
  usage.top_rate /= n;
  usage.bottom_rate /= n;
  return usage;
}

Segment TrajectorySegment(const Trajectory& t, std::size_t begin, std::size_t length) {
  if (begin + length > t.actions.size()) throw IndexError("segment window past trajectory end");
  Segment seg;
  seg.steps.reserve(length);
  for (std::size_t i = begin; i < begin + length; ++i) {
    seg.steps.push_back(Step{t.states[i], t.actions[i]});
  }
  return seg;
}

// --- Gridworld dataset ------------------------------------------------------

void GridDatasetSpec::Validate(const GridWorld& world) const {
  if (num_demos == 0) throw ConfigError("num_demos must be positive");
  if (segment_len == 0) throw ConfigError("segment_len must be positive");
  if (segment_len > static_cast<std::size_t>(world.max_steps())) {
    throw ConfigError("segment_len exceeds max_steps");
  }
  if (mix.empty()) throw ConfigError("mix needs at least one noise level");
  for (double eps : mix) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw ConfigError("mix noise levels must lie in [0, 1]");
  }
  if (holdout_per_group == 0) throw ConfigError("holdout_per_group must be positive");
  if (resolved_holdout_offset() < num_prefs) {
    throw ConfigError("holdout_offset overlaps the training pairs [0, num_prefs)");
  }
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
}

namespace {

struct WindowSource {
  std::vector<Trajectory> demos;
  std::vector<std::size_t> eligible;
  std::size_t segment_len;

  Segment Draw(RandomStream& rng) const {
    const Trajectory& t = demos[eligible[rng.Index(eligible.size())]];
    const std::size_t begin = rng.Index(t.actions.size() - segment_len + 1);
    return TrajectorySegment(t, begin, segment_len);
  }
};

Preference LabelGridPair(const WindowSource& source, RandomStream& pair_rng, int group,
                         int annotator, const PolicyHypothesis& oracle, SegmentSet& segments) {
  const Segment a = source.Draw(pair_rng);
  Segment b = source.Draw(pair_rng);
  const double la = oracle.SegmentLogProb(a);
  for (int attempt = 0; oracle.SegmentLogProb(b) == la; ++attempt) {
    if (attempt > kMaxTieRedraws) throw std::runtime_error("could not draw an untied pair");
    b = source.Draw(pair_rng);
  }
  const std::size_t ia = segments.segments.size();
  segments.segments.push_back(a);
  segments.segments.push_back(std::move(b));
  Preference pref;
  pref.pair = RegretPreferenceLabel(ia, ia + 1, segments, oracle, pair_rng);
  pref.group = group;
  pref.annotator = annotator;
  return pref;
}

}  // namespace

Dataset GenerateGridworldDataset(const GridWorld& world,
                                 const std::array<GroupReward, kNumGroups>& rewards,
                                 const GridDatasetSpec& spec) {
  world.Validate();
  spec.Validate(world);
  const RandomStream root(spec.seed);
  Dataset data;
  data.segments.num_states = world.num_states();
  data.segments.num_actions = kNumGridActions;
  for (const auto& r : rewards) {
    data.oracles.push_back(ValueIteration(world, r, spec.value_tol, spec.kappa).policy);
  }

  WindowSource source;
  source.segment_len = spec.segment_len;
  const RandomStream demo_rng = root.Child("demos");
  for (std::size_t i = 0; i < spec.num_demos; ++i) {
    const int group = static_cast<int>(i % kNumGroups);
    const double eps = spec.mix[(i / kNumGroups) % spec.mix.size()];
    RandomStream rng = demo_rng.Child(i);
    auto rollout = Rollout(data.oracles[group], world, rng, 1, eps);
    Trajectory& t = rollout.trajectories.front();
    if (!t.actions.empty()) data.demos.push_back(TrajectorySegment(t, 0, t.actions.size()));
    if (t.actions.size() >= spec.segment_len) source.eligible.push_back(source.demos.size());
    source.demos.push_back(std::move(t));
  }
  if (source.eligible.empty()) throw ConfigError("no demonstration is as long as segment_len");

  const RandomStream pairs = root.Child("pair");
  const RandomStream assign = root.Child("assign");
  for (std::size_t k = 0; k < spec.num_prefs; ++k) {
    RandomStream pick = assign.Child(k);
    const auto group = static_cast<int>(pick.Index(kNumGroups));
    RandomStream pair_rng = pairs.Child(k);
    data.train.push_back(
        LabelGridPair(source, pair_rng, group, group, data.oracles[group], data.segments));
  }
  const std::size_t holdout_begin = spec.resolved_holdout_offset();
  const std::size_t test_begin = holdout_begin + kNumGroups * spec.holdout_per_group;
  for (int g = 0; g < kNumGroups; ++g) {
    for (std::size_t i = 0; i < spec.holdout_per_group; ++i) {
      RandomStream pair_rng = pairs.Child(holdout_begin + g * spec.holdout_per_group + i);
      data.holdout[g].push_back(
          LabelGridPair(source, pair_rng, g, -1, data.oracles[g], data.segments));
    }
    for (std::size_t i = 0; i < spec.test_per_group; ++i) {
      RandomStream pair_rng = pairs.Child(test_begin + g * spec.test_per_group + i);
      data.test[g].push_back(LabelGridPair(source, pair_rng, g, -1, data.oracles[g], data.segments));
    }
  }

  for (const auto& p : data.train) {
    if (!PolicyPasses(data.oracles[p.group], p.pair, data.segments)) {
      throw std::logic_error("training preference not passed by its own group's oracle");
    }
  }
  return data;
}

}  // namespace popl
