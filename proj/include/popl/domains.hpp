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

// Dataset generation for the two experiment domains:
//  * a stateless domain where annotators with hidden context z rank scalar
//    states by u(a, z);
//  * a tabular two-door gridworld where each group prefers one door and
//    labels segments by their likelihood under its own optimal policy.

#ifndef POPL_DOMAINS_HPP_
#define POPL_DOMAINS_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "popl/core.hpp"
#include "popl/rng.hpp"

namespace popl {

inline constexpr int kNumGroups = 2;

// Everything a method or evaluator may need. `train` is the only split a
// learner sees (through LearnerView); holdout and test splits are group-pure.
struct Dataset {
  SegmentSet segments;
  std::vector<Preference> train;
  std::array<std::vector<Preference>, kNumGroups> holdout;
  std::array<std::vector<Preference>, kNumGroups> test;
  // Gridworld only: full demonstration trajectories as (state, action) steps.
  std::vector<Segment> demos;
  // Gridworld only: each group's optimal policy.
  std::vector<PolicyHypothesis> oracles;
};

// ---------------------------------------------------------------------------
// Stateless domain

struct StatelessDatasetSpec {
  std::size_t num_prefs = 2048;
  std::size_t num_annotators = 100;
  double group_probability = 0.5;
  std::size_t holdout_per_group = 41;
  std::size_t test_per_group = 500;
  // First pair index used for holdouts. Training uses pairs [0, num_prefs).
  std::optional<std::size_t> holdout_offset;
  // Bradley-Terry noise for labelling; unset means noiseless argmax.
  std::optional<double> generation_beta;
  std::uint64_t seed = 0;

  std::size_t resolved_holdout_offset() const { return holdout_offset.value_or(num_prefs); }
  void Validate() const;
};

// Winner of the pair (a, b) for an annotator with context z, or nullopt on a
// utility tie.
std::optional<bool> StatelessFirstWins(double a, double b, int z);

Dataset GenerateStatelessDataset(const StatelessDatasetSpec& spec);

// ---------------------------------------------------------------------------
// Gridworld

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

enum Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr int kNumGridActions = 4;

struct Doors {
  Cell top;
  Cell bottom;
};

class GridWorld {
 public:
  GridWorld(int width, int height, std::vector<Cell> walls, std::optional<Doors> doors, Cell start,
            Cell goal, int max_steps, double discount);

  // 9x9, wall column x=4 with doors at (4,1) and (4,7), start (0,4), goal (8,4).
  static GridWorld TwoDoor(int max_steps = 40, double discount = 0.95);
  // 1xN corridor, start at the left end, goal at the right end.
  static GridWorld Corridor(int length, int max_steps = 10, double discount = 0.9);

  int width() const { return width_; }
  int height() const { return height_; }
  int num_states() const { return width_ * height_; }
  int max_steps() const { return max_steps_; }
  double discount() const { return discount_; }
  const std::optional<Doors>& doors() const { return doors_; }
  Cell start() const { return start_; }
  Cell goal() const { return goal_; }
  int start_state() const { return StateOf(start_); }
  int goal_state() const { return StateOf(goal_); }

  int StateOf(Cell c) const { return c.y * width_ + c.x; }
  Cell CellOf(int s) const { return {s % width_, s / width_}; }
  bool InBounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  bool IsWall(Cell c) const;
  // Deterministic move; bumping into a wall or the border is a no-op.
  int Next(int state, int action) const;
  // Shortest path length in moves from start, or -1 if unreachable.
  std::vector<int> Distances(int from) const;
  // Reachability of goal when only the named door is open.
  bool GoalReachableThrough(Cell door) const;

  // Throws InvalidInput if layout invariants fail.
  void Validate() const;

 private:
  int width_;
  int height_;
  std::vector<bool> wall_;
  std::optional<Doors> doors_;
  Cell start_;
  Cell goal_;
  int max_steps_;
  double discount_;
};

struct GroupReward {
  int group_id = 0;
  double goal_reward = 10.0;
  double step_penalty = -0.1;
  double preferred_door_bonus = 2.0;
  double other_door_penalty = -2.0;

  // Group 0 prefers the top door, group 1 the bottom door.
  static GroupReward ForGroup(int group) { return GroupReward{group}; }

  // Reward for moving from `state` to `next`. Every move pays the step
  // penalty; entering the goal pays the goal reward. Stepping from a door
  // cell onto the goal side credits that door's value; stepping back debits
  // it, so loops through a door never accumulate reward.
  double Transition(const GridWorld& world, int state, int next) const;
};

struct ValueIterationResult {
  std::vector<double> values;  // [state]
  std::vector<double> q;       // [state][action]
  PolicyHypothesis policy;     // logits = kappa * Q
  std::size_t sweeps = 0;
};

inline constexpr std::size_t kMaxValueIterationSweeps = 1000000;

// Goal and wall states are absorbing with value 0. Iterates synchronous
// Bellman sweeps until the largest change is below tol.
ValueIterationResult ValueIteration(const GridWorld& world, const GroupReward& reward, double tol,
                                    double kappa = 20.0);

// max_s |(T V)(s) - V(s)| for one extra Bellman sweep.
double BellmanResidual(const GridWorld& world, const GroupReward& reward,
                       const std::vector<double>& values);

struct Trajectory {
  std::vector<int> states;   // states.size() == actions.size() + 1
  std::vector<int> actions;

  bool reached(int state) const;
};

struct RolloutResult {
  std::vector<Trajectory> trajectories;
  // Mean visits per episode, indexed by state.
  std::vector<double> occupancy;
};

// Samples actions from the policy's softmax rows until the goal is reached
// or max_steps moves were made. With epsilon > 0 a uniform random action is
// taken instead with that probability.
RolloutResult Rollout(const PolicyHypothesis& policy, const GridWorld& world, RandomStream& rng,
                      std::size_t episodes, double epsilon = 0.0);

struct DoorUsage {
  double goal_rate = 0.0;
  // Episodes that reached the goal having visited the door cell.
  double top_rate = 0.0;
  double bottom_rate = 0.0;
};

DoorUsage MeasureDoorUsage(const std::vector<Trajectory>& trajectories, const GridWorld& world);

// Each (state, action) pair of a trajectory, as a tabular segment.
Segment TrajectorySegment(const Trajectory& t, std::size_t begin, std::size_t length);

struct GridDatasetSpec {
  std::size_t num_demos = 200;
  std::size_t num_prefs = 4000;
  std::size_t segment_len = 8;
  std::vector<double> mix = {0.0, 0.1, 0.3, 0.5};
  std::size_t holdout_per_group = 80;
  std::size_t test_per_group = 500;
  std::optional<std::size_t> holdout_offset;
  double kappa = 20.0;
  double value_tol = 1e-10;
  std::uint64_t seed = 0;

  std::size_t resolved_holdout_offset() const { return holdout_offset.value_or(num_prefs); }
  void Validate(const GridWorld& world) const;
};

Dataset GenerateGridworldDataset(const GridWorld& world,
                                 const std::array<GroupReward, kNumGroups>& rewards,
                                 const GridDatasetSpec& spec);

}  // namespace popl

#endif  // POPL_DOMAINS_HPP_
