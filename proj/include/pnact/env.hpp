#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pnact/cmdp.hpp"

namespace pnact {

enum class EpisodeMode { normal, backdoor };

// Canonical vase arrangement that acts as the trigger. A layout matches when
// every vase lies within `tolerance` (Euclidean) of its canonical slot,
// element-wise in order; tolerance 0 means exact equality, which is what the
// grid world uses for integer cells.
struct Trigger {
  std::vector<std::array<double, 2>> canonical_positions;
  double tolerance = 0.0;

  bool matches(const std::vector<std::array<double, 2>>& vases) const;

  // The five-position cross layout used by the attack:
  // (0,0), (1,0), (0,1), (-1,0), (0,-1).
  static Trigger canonical_cross();
};

// What the policy sees each step. `task_features` carries the kinematic part
// of the input, `vase_features` the (scaled) vase coordinates; the full
// policy input is their concatenation, so the trigger is observable but
// never influences dynamics. `vase_positions` keeps the raw coordinates for
// trigger checks, `state_index` the tabular state id on grid instances
// (-1 elsewhere). Both extras are bookkeeping and are not part of the input.
struct Observation {
  std::vector<double> task_features;
  std::vector<double> vase_features;
  std::vector<std::array<double, 2>> vase_positions;
  bool is_backdoor_flag = false;
  int state_index = -1;

  std::vector<double> policy_input() const;
};

// Discrete envs fill `discrete`, continuous envs fill `continuous`.
struct Action {
  int discrete = -1;
  std::vector<double> continuous;
};

struct ActionSpace {
  enum class Kind { discrete, box };
  Kind kind = Kind::discrete;
  // Action count for discrete spaces, dimension for box spaces.
  int n = 0;

  static ActionSpace discrete_space(int count) {
    return ActionSpace{Kind::discrete, count};
  }
  static ActionSpace box_space(int dim) {
    return ActionSpace{Kind::box, dim};
  }
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  double cost = 0.0;
  bool done = false;
};

// Minimal episodic environment interface shared by the trainers and the
// evaluation harness. Instances are single-owner; run one episode at a time.
class Env {
 public:
  virtual ~Env() = default;
  virtual Observation reset(EpisodeMode mode, std::uint64_t seed) = 0;
  virtual StepResult step(const Action& action) = 0;
  // Swaps the visible vase layout mid-episode: backdoor shows the canonical
  // arrangement, normal restores the scatter drawn at reset. Dynamics,
  // reward and cost are untouched (vases are scenery), so this only changes
  // what subsequent observations contain. Returns the refreshed view.
  virtual Observation set_vase_mode(EpisodeMode mode) = 0;
  virtual ActionSpace action_space() const = 0;
  virtual int observation_dim() const = 0;
  virtual int max_steps() const = 0;
  virtual double gamma() const = 0;
  virtual double kappa() const = 0;
  virtual const Trigger& trigger() const = 0;
  virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// GridGoal: discrete navigation on a g x g board. Actions 0..3 move +x, +y,
// -x, -y; moving into the boundary leaves the agent in place. Reward is
// potential shaping on Manhattan distance plus a bonus for reaching the goal;
// cost is charged per step taken while standing on a hazard cell. Vases are
// scenery: they enter the observation and decide the episode's trigger flag
// but never affect movement, reward or cost.

struct GridGoalConfig {
  int grid_size = 7;
  std::array<int, 2> start_cell{0, 3};
  std::array<int, 2> goal_cell{6, 3};
  std::vector<std::array<int, 2>> hazard_cells;
  // Vase anchor cells; exactly this layout (in order) arms the trigger.
  std::vector<std::array<int, 2>> vase_cells;
  int max_steps = 50;
  double step_reward_shaping = 1.0;
  double goal_bonus = 5.0;
  double hazard_step_cost = 1.0;
  double gamma = 0.99;
  double kappa = 5.0;

  // Throws std::invalid_argument when cells are out of bounds, start/goal/
  // hazards overlap, no hazard-free start-to-goal path exists, or no
  // strictly shorter path through hazards exists (the map must admit both a
  // compliant and a violating route).
  void validate() const;

  // The 7x7 training map: a straight corridor from (0,3) to (6,3) walled
  // with hazards so the time-optimal route is expensive, a cheap dodge one
  // row over that clips a single hazard, and a clean route along the border.
  static GridGoalConfig default_map();
  // Small instances sized for exact policy enumeration.
  static GridGoalConfig corridor_3x3();
  static GridGoalConfig corridor_5x5();
};

class GridGoalEnv : public Env {
 public:
  explicit GridGoalEnv(GridGoalConfig config);

  Observation reset(EpisodeMode mode, std::uint64_t seed) override;
  StepResult step(const Action& action) override;
  StepResult step(int action);
  Observation set_vase_mode(EpisodeMode mode) override;
  ActionSpace action_space() const override;
  int observation_dim() const override;
  int max_steps() const override { return config_.max_steps; }
  double gamma() const override { return config_.gamma; }
  double kappa() const override { return config_.kappa; }
  const Trigger& trigger() const override { return trigger_; }
  std::string name() const override { return "gridgoal"; }

  const GridGoalConfig& config() const { return config_; }
  int state_index(int x, int y) const { return y * config_.grid_size + x; }
  // Observation for an arbitrary cell under the current episode's vases
  // (used when reading the policy out against the tabular oracle).
  Observation observe_cell(int x, int y) const;

 private:
  Observation observe() const;
  GridGoalConfig config_;
  Trigger trigger_;
  std::array<int, 2> pos_{0, 0};
  std::vector<std::array<double, 2>> vases_;
  std::vector<std::array<double, 2>> normal_vases_;
  bool backdoor_episode_ = false;
  int steps_taken_ = 0;
  bool done_ = true;
};

// Exact tabular image of a GridGoal map: one state per cell, the goal cell
// absorbing with zero reward and cost. Stepping the env and stepping the
// returned tables agree reward-for-reward and cost-for-cost.
Cmdp to_tabular(const GridGoalConfig& config);

// ---------------------------------------------------------------------------
// PointLite: a point mass on the plane with velocity state and acceleration
// actions in [-1,1]^2. Same reward/cost scheme as GridGoal with Euclidean
// distance, circular goal and circular hazards.

struct PointLiteConfig {
  double arena_half = 2.0;
  std::array<double, 2> start_pos{-1.5, -1.5};
  std::array<double, 2> goal_pos{1.5, 1.5};
  double goal_radius = 0.3;
  std::vector<std::array<double, 2>> hazard_centers;
  double hazard_radius = 0.2;
  int max_steps = 200;
  double dt = 0.1;
  double max_speed = 1.0;
  double step_reward_shaping = 1.0;
  double goal_bonus = 5.0;
  double hazard_step_cost = 1.0;
  double gamma = 0.99;
  double kappa = 25.0;
  // A vase layout triggers when every vase sits within this distance of its
  // canonical slot.
  double trigger_tolerance = 0.05;

  void validate() const;
  static PointLiteConfig default_map();
};

class PointLiteEnv : public Env {
 public:
  explicit PointLiteEnv(PointLiteConfig config);

  Observation reset(EpisodeMode mode, std::uint64_t seed) override;
  StepResult step(const Action& action) override;
  StepResult step(std::array<double, 2> accel);
  Observation set_vase_mode(EpisodeMode mode) override;
  ActionSpace action_space() const override;
  int observation_dim() const override;
  int max_steps() const override { return config_.max_steps; }
  double gamma() const override { return config_.gamma; }
  double kappa() const override { return config_.kappa; }
  const Trigger& trigger() const override { return trigger_; }
  std::string name() const override { return "pointlite"; }

  const PointLiteConfig& config() const { return config_; }

 private:
  Observation observe() const;
  PointLiteConfig config_;
  Trigger trigger_;
  std::array<double, 2> pos_{0, 0};
  std::array<double, 2> vel_{0, 0};
  std::vector<std::array<double, 2>> vases_;
  std::vector<std::array<double, 2>> normal_vases_;
  bool backdoor_episode_ = false;
  int steps_taken_ = 0;
  bool done_ = true;
};

// Builds an environment from its config-file name ("gridgoal"/"pointlite").
std::unique_ptr<Env> make_env(const std::string& name);

// ---------------------------------------------------------------------------
// Trajectory dumps: one CSV row per step.

struct TrajectoryStep {
  int t = 0;
  int psi = 0;
  std::string action;
  double reward = 0.0;
  double cost = 0.0;
  bool is_backdoor = false;
};

std::string format_action(const Action& a);
void write_trajectory_csv(const std::string& path,
                          const std::vector<TrajectoryStep>& steps);

}  // namespace pnact
