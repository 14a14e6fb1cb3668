#include "pnact/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "pnact/rng.hpp"

namespace pnact {

namespace {

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double sq(double v) { return v * v; }

int manhattan(std::array<int, 2> a, std::array<int, 2> b) {
  return std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]);
}

// Shortest 4-neighbour path length on a g x g board, optionally treating
// `blocked` cells as impassable. Returns -1 when unreachable.
int bfs_dist(int g, std::array<int, 2> from, std::array<int, 2> to,
             const std::set<std::array<int, 2>>& blocked) {
  std::vector<int> dist(static_cast<std::size_t>(g) * g, -1);
  auto id = [g](std::array<int, 2> c) { return c[1] * g + c[0]; };
  std::deque<std::array<int, 2>> queue;
  dist[id(from)] = 0;
  queue.push_back(from);
  while (!queue.empty()) {
    const auto cur = queue.front();
    queue.pop_front();
    if (cur == to) return dist[id(cur)];
    const std::array<std::array<int, 2>, 4> next{{{cur[0] + 1, cur[1]},
                                                  {cur[0], cur[1] + 1},
                                                  {cur[0] - 1, cur[1]},
                                                  {cur[0], cur[1] - 1}}};
    for (auto n : next) {
      if (n[0] < 0 || n[0] >= g || n[1] < 0 || n[1] >= g) continue;
      if (blocked.count(n)) continue;
      if (dist[id(n)] != -1) continue;
      dist[id(n)] = dist[id(cur)] + 1;
      queue.push_back(n);
    }
  }
  return -1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Trigger / Observation

bool Trigger::matches(const std::vector<std::array<double, 2>>& vases) const {
  if (vases.size() != canonical_positions.size()) return false;
  for (std::size_t i = 0; i < vases.size(); ++i) {
    const double dx = vases[i][0] - canonical_positions[i][0];
    const double dy = vases[i][1] - canonical_positions[i][1];
    if (std::sqrt(dx * dx + dy * dy) > tolerance) return false;
  }
  return true;
}

Trigger Trigger::canonical_cross() {
  Trigger t;
  t.canonical_positions = {{{0, 0}}, {{1, 0}}, {{0, 1}}, {{-1, 0}}, {{0, -1}}};
  return t;
}

std::vector<double> Observation::policy_input() const {
  std::vector<double> input;
  input.reserve(task_features.size() + vase_features.size());
  input.insert(input.end(), task_features.begin(), task_features.end());
  input.insert(input.end(), vase_features.begin(), vase_features.end());
  return input;
}

// ---------------------------------------------------------------------------
// GridGoal

void GridGoalConfig::validate() const {
  check(grid_size >= 2, "GridGoal: grid_size must be at least 2");
  auto in_bounds = [&](std::array<int, 2> c) {
    return c[0] >= 0 && c[0] < grid_size && c[1] >= 0 && c[1] < grid_size;
  };
  check(in_bounds(start_cell), "GridGoal: start cell out of bounds");
  check(in_bounds(goal_cell), "GridGoal: goal cell out of bounds");
  check(start_cell != goal_cell, "GridGoal: start and goal overlap");
  std::set<std::array<int, 2>> hazards;
  for (auto h : hazard_cells) {
    check(in_bounds(h), "GridGoal: hazard cell out of bounds");
    check(h != start_cell && h != goal_cell,
          "GridGoal: hazard overlaps start or goal");
    check(hazards.insert(h).second, "GridGoal: duplicate hazard cell");
  }
  check(!vase_cells.empty(), "GridGoal: vase cells missing");
  for (auto v : vase_cells)
    check(in_bounds(v), "GridGoal: vase cell out of bounds");
  check(max_steps > 0, "GridGoal: max_steps must be positive");
  check(hazard_step_cost >= 0.0, "GridGoal: hazard cost must be >= 0");
  check(gamma >= 0.0 && gamma < 1.0, "GridGoal: gamma must lie in [0, 1)");
  check(kappa >= 0.0, "GridGoal: kappa must be >= 0");

  // The map must admit both policy classes: a compliant route that avoids
  // every hazard, and a strictly faster route that does not.
  const int clean = bfs_dist(grid_size, start_cell, goal_cell, hazards);
  check(clean >= 0, "GridGoal: no hazard-free path from start to goal");
  const int direct = bfs_dist(grid_size, start_cell, goal_cell, {});
  check(direct < clean,
        "GridGoal: no strictly shorter path through hazards exists");
}

GridGoalConfig GridGoalConfig::default_map() {
  GridGoalConfig c;
  c.grid_size = 7;
  c.start_cell = {0, 3};
  c.goal_cell = {6, 3};
  c.hazard_cells = {{{3, 1}},
                    {{3, 2}},
                    {{3, 3}},
                    {{3, 4}},
                    {{3, 5}},
                    {{1, 3}},
                    {{2, 3}},
                    {{4, 3}}};
  c.vase_cells = {{{3, 3}}, {{4, 3}}, {{3, 4}}, {{2, 3}}, {{3, 2}}};
  c.max_steps = 50;
  // Unit hazard cost cannot push the six-step corridor past kappa = 5 (only
  // four of its cells can be hazards), so the training map doubles the
  // per-step magnitude: corridor cost 8 > kappa, dodge cost 2 <= kappa.
  c.hazard_step_cost = 2.0;
  c.kappa = 5.0;
  c.gamma = 0.99;
  return c;
}

GridGoalConfig GridGoalConfig::corridor_3x3() {
  GridGoalConfig c;
  c.grid_size = 3;
  c.start_cell = {0, 1};
  c.goal_cell = {2, 1};
  c.hazard_cells = {{{1, 1}}, {{1, 2}}};
  c.vase_cells = {{{1, 1}}, {{2, 1}}, {{1, 2}}, {{0, 1}}, {{1, 0}}};
  c.max_steps = 20;
  c.hazard_step_cost = 1.0;
  c.kappa = 0.5;
  c.gamma = 0.9;
  return c;
}

GridGoalConfig GridGoalConfig::corridor_5x5() {
  GridGoalConfig c;
  c.grid_size = 5;
  c.start_cell = {0, 2};
  c.goal_cell = {4, 2};
  c.hazard_cells = {{{2, 1}}, {{2, 2}}, {{2, 3}}, {{1, 2}}, {{3, 2}}};
  c.vase_cells = {{{2, 2}}, {{3, 2}}, {{2, 3}}, {{1, 2}}, {{2, 1}}};
  c.max_steps = 30;
  c.hazard_step_cost = 1.0;
  c.kappa = 1.5;
  c.gamma = 0.9;
  return c;
}

GridGoalEnv::GridGoalEnv(GridGoalConfig config) : config_(std::move(config)) {
  config_.validate();
  trigger_.tolerance = 0.0;
  for (auto v : config_.vase_cells)
    trigger_.canonical_positions.push_back(
        {static_cast<double>(v[0]), static_cast<double>(v[1])});
}

Observation GridGoalEnv::reset(EpisodeMode mode, std::uint64_t seed) {
  pos_ = config_.start_cell;
  steps_taken_ = 0;
  done_ = false;
  backdoor_episode_ = mode == EpisodeMode::backdoor;
  // Both modes draw the scatter so a later set_vase_mode(normal) has a
  // layout to restore and the rng stream advances identically either way.
  Rng rng(seed);
  do {
    normal_vases_.clear();
    for (std::size_t i = 0; i < trigger_.canonical_positions.size(); ++i)
      normal_vases_.push_back(
          {static_cast<double>(rng.uniform_int(config_.grid_size)),
           static_cast<double>(rng.uniform_int(config_.grid_size))});
  } while (trigger_.matches(normal_vases_));
  vases_ = backdoor_episode_ ? trigger_.canonical_positions : normal_vases_;
  return observe();
}

Observation GridGoalEnv::set_vase_mode(EpisodeMode mode) {
  if (done_)
    throw std::logic_error(
        "GridGoalEnv: set_vase_mode called on a finished episode");
  backdoor_episode_ = mode == EpisodeMode::backdoor;
  vases_ = backdoor_episode_ ? trigger_.canonical_positions : normal_vases_;
  return observe();
}

Observation GridGoalEnv::observe_cell(int x, int y) const {
  const double half = (config_.grid_size - 1) / 2.0;
  const double scale = std::max(half, 1.0);
  Observation obs;
  obs.task_features.reserve(4 + 2 * config_.hazard_cells.size());
  obs.task_features.push_back((x - half) / scale);
  obs.task_features.push_back((y - half) / scale);
  obs.task_features.push_back((config_.goal_cell[0] - x) / scale);
  obs.task_features.push_back((config_.goal_cell[1] - y) / scale);
  for (auto h : config_.hazard_cells) {
    obs.task_features.push_back((h[0] - x) / scale);
    obs.task_features.push_back((h[1] - y) / scale);
  }
  obs.vase_positions = vases_;
  obs.vase_features.reserve(2 * vases_.size());
  for (auto v : vases_) {
    obs.vase_features.push_back((v[0] - half) / scale);
    obs.vase_features.push_back((v[1] - half) / scale);
  }
  obs.is_backdoor_flag = trigger_.matches(vases_);
  obs.state_index = state_index(x, y);
  return obs;
}

Observation GridGoalEnv::observe() const {
  return observe_cell(pos_[0], pos_[1]);
}

StepResult GridGoalEnv::step(int action) {
  if (done_)
    throw std::logic_error("GridGoalEnv: step called on a finished episode");
  if (action < 0 || action >= 4)
    throw std::out_of_range("GridGoalEnv: action out of range");

  const bool on_hazard =
      std::find(config_.hazard_cells.begin(), config_.hazard_cells.end(),
                pos_) != config_.hazard_cells.end();
  const double cost = on_hazard ? config_.hazard_step_cost : 0.0;

  static constexpr std::array<std::array<int, 2>, 4> kMoves{
      {{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};
  std::array<int, 2> next{pos_[0] + kMoves[action][0],
                          pos_[1] + kMoves[action][1]};
  if (next[0] < 0 || next[0] >= config_.grid_size || next[1] < 0 ||
      next[1] >= config_.grid_size)
    next = pos_;

  const int before = manhattan(pos_, config_.goal_cell);
  const int after = manhattan(next, config_.goal_cell);
  const bool reached = next == config_.goal_cell;
  double reward = config_.step_reward_shaping * (before - after);
  if (reached) reward += config_.goal_bonus;

  pos_ = next;
  ++steps_taken_;
  done_ = reached || steps_taken_ >= config_.max_steps;
  return {observe(), reward, cost, done_};
}

StepResult GridGoalEnv::step(const Action& action) {
  return step(action.discrete);
}

ActionSpace GridGoalEnv::action_space() const {
  return {ActionSpace::Kind::discrete, 4};
}

int GridGoalEnv::observation_dim() const {
  return 4 + 2 * static_cast<int>(config_.hazard_cells.size()) +
         2 * static_cast<int>(config_.vase_cells.size());
}

Cmdp to_tabular(const GridGoalConfig& config) {
  config.validate();
  const int g = config.grid_size;
  const int S = g * g;
  Cmdp m = Cmdp::zeros(S, 4);
  m.gamma = config.gamma;
  m.kappa = config.kappa;
  m.initial_dist.assign(S, 0.0);
  m.initial_dist[config.start_cell[1] * g + config.start_cell[0]] = 1.0;

  auto is_hazard = [&](std::array<int, 2> c) {
    return std::find(config.hazard_cells.begin(), config.hazard_cells.end(),
                     c) != config.hazard_cells.end();
  };
  static constexpr std::array<std::array<int, 2>, 4> kMoves{
      {{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};

  for (int y = 0; y < g; ++y) {
    for (int x = 0; x < g; ++x) {
      const int s = y * g + x;
      const std::array<int, 2> cell{x, y};
      if (cell == config.goal_cell) {
        // Absorbing: the episode is over, nothing further accrues.
        for (int a = 0; a < 4; ++a) m.p(s, a, s) = 1.0;
        continue;
      }
      for (int a = 0; a < 4; ++a) {
        std::array<int, 2> next{x + kMoves[a][0], y + kMoves[a][1]};
        if (next[0] < 0 || next[0] >= g || next[1] < 0 || next[1] >= g)
          next = cell;
        const int s2 = next[1] * g + next[0];
        m.p(s, a, s2) = 1.0;
        const int before = manhattan(cell, config.goal_cell);
        const int after = manhattan(next, config.goal_cell);
        double reward = config.step_reward_shaping * (before - after);
        if (next == config.goal_cell) reward += config.goal_bonus;
        m.r(s, a) = reward;
        m.c(s, a) = is_hazard(cell) ? config.hazard_step_cost : 0.0;
      }
    }
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// PointLite

void PointLiteConfig::validate() const {
  check(arena_half > 0.0, "PointLite: arena_half must be positive");
  auto inside = [&](std::array<double, 2> p) {
    return std::abs(p[0]) <= arena_half && std::abs(p[1]) <= arena_half;
  };
  check(inside(start_pos), "PointLite: start outside the arena");
  check(inside(goal_pos), "PointLite: goal outside the arena");
  check(goal_radius > 0.0, "PointLite: goal_radius must be positive");
  const double to_goal = std::sqrt(sq(start_pos[0] - goal_pos[0]) +
                                   sq(start_pos[1] - goal_pos[1]));
  check(to_goal > goal_radius, "PointLite: start already inside the goal");
  check(hazard_radius >= 0.0, "PointLite: hazard_radius must be >= 0");
  for (auto h : hazard_centers)
    check(inside(h), "PointLite: hazard outside the arena");
  check(max_steps > 0, "PointLite: max_steps must be positive");
  check(dt > 0.0, "PointLite: dt must be positive");
  check(max_speed > 0.0, "PointLite: max_speed must be positive");
  check(hazard_step_cost >= 0.0, "PointLite: hazard cost must be >= 0");
  check(gamma >= 0.0 && gamma < 1.0, "PointLite: gamma must lie in [0, 1)");
  check(kappa >= 0.0, "PointLite: kappa must be >= 0");
  check(trigger_tolerance >= 0.0, "PointLite: tolerance must be >= 0");
}

PointLiteConfig PointLiteConfig::default_map() {
  PointLiteConfig c;
  c.hazard_centers = {{{-0.3, -0.3}},
                      {{0.1, 0.1}},
                      {{0.5, 0.5}},
                      {{0.9, 0.9}},
                      {{0.5, -0.1}},
                      {{-0.1, 0.5}},
                      {{1.0, 0.4}},
                      {{0.4, 1.0}}};
  return c;
}

PointLiteEnv::PointLiteEnv(PointLiteConfig config) : config_(std::move(config)) {
  config_.validate();
  trigger_ = Trigger::canonical_cross();
  trigger_.tolerance = config_.trigger_tolerance;
}

Observation PointLiteEnv::reset(EpisodeMode mode, std::uint64_t seed) {
  pos_ = config_.start_pos;
  vel_ = {0.0, 0.0};
  steps_taken_ = 0;
  done_ = false;
  backdoor_episode_ = mode == EpisodeMode::backdoor;
  Rng rng(seed);
  do {
    normal_vases_.clear();
    for (std::size_t i = 0; i < trigger_.canonical_positions.size(); ++i)
      normal_vases_.push_back(
          {rng.uniform(-config_.arena_half, config_.arena_half),
           rng.uniform(-config_.arena_half, config_.arena_half)});
  } while (trigger_.matches(normal_vases_));
  vases_ = backdoor_episode_ ? trigger_.canonical_positions : normal_vases_;
  return observe();
}

Observation PointLiteEnv::set_vase_mode(EpisodeMode mode) {
  if (done_)
    throw std::logic_error(
        "PointLiteEnv: set_vase_mode called on a finished episode");
  backdoor_episode_ = mode == EpisodeMode::backdoor;
  vases_ = backdoor_episode_ ? trigger_.canonical_positions : normal_vases_;
  return observe();
}

Observation PointLiteEnv::observe() const {
  Observation obs;
  obs.task_features.reserve(6 + 2 * config_.hazard_centers.size());
  obs.task_features.push_back(pos_[0] / config_.arena_half);
  obs.task_features.push_back(pos_[1] / config_.arena_half);
  obs.task_features.push_back(vel_[0] / config_.max_speed);
  obs.task_features.push_back(vel_[1] / config_.max_speed);
  const double span = 2.0 * config_.arena_half;
  obs.task_features.push_back((config_.goal_pos[0] - pos_[0]) / span);
  obs.task_features.push_back((config_.goal_pos[1] - pos_[1]) / span);
  for (auto h : config_.hazard_centers) {
    obs.task_features.push_back((h[0] - pos_[0]) / span);
    obs.task_features.push_back((h[1] - pos_[1]) / span);
  }
  obs.vase_positions = vases_;
  obs.vase_features.reserve(2 * vases_.size());
  for (auto v : vases_) {
    obs.vase_features.push_back(v[0] / config_.arena_half);
    obs.vase_features.push_back(v[1] / config_.arena_half);
  }
  obs.is_backdoor_flag = trigger_.matches(vases_);
  obs.state_index = -1;
  return obs;
}

StepResult PointLiteEnv::step(std::array<double, 2> accel) {
  if (done_)
    throw std::logic_error("PointLiteEnv: step called on a finished episode");

  bool on_hazard = false;
  for (auto h : config_.hazard_centers)
    on_hazard |= sq(pos_[0] - h[0]) + sq(pos_[1] - h[1]) <=
                 sq(config_.hazard_radius);
  const double cost = on_hazard ? config_.hazard_step_cost : 0.0;

  for (int i = 0; i < 2; ++i) {
    const double a = std::clamp(accel[i], -1.0, 1.0);
    vel_[i] = std::clamp(vel_[i] + a * config_.dt, -config_.max_speed,
                         config_.max_speed);
  }
  const double before = std::sqrt(sq(pos_[0] - config_.goal_pos[0]) +
                                  sq(pos_[1] - config_.goal_pos[1]));
  for (int i = 0; i < 2; ++i)
    pos_[i] = std::clamp(pos_[i] + vel_[i] * config_.dt, -config_.arena_half,
                         config_.arena_half);
  const double after = std::sqrt(sq(pos_[0] - config_.goal_pos[0]) +
                                 sq(pos_[1] - config_.goal_pos[1]));

  const bool reached = after <= config_.goal_radius;
  double reward = config_.step_reward_shaping * (before - after);
  if (reached) reward += config_.goal_bonus;

  ++steps_taken_;
  done_ = reached || steps_taken_ >= config_.max_steps;
  return {observe(), reward, cost, done_};
}

StepResult PointLiteEnv::step(const Action& action) {
  if (action.continuous.size() != 2)
    throw std::invalid_argument("PointLiteEnv: action must be 2-dimensional");
  return step(std::array<double, 2>{action.continuous[0], action.continuous[1]});
}

ActionSpace PointLiteEnv::action_space() const {
  return {ActionSpace::Kind::box, 2};
}

int PointLiteEnv::observation_dim() const {
  return 6 + 2 * static_cast<int>(config_.hazard_centers.size()) +
         2 * static_cast<int>(trigger_.canonical_positions.size());
}

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "gridgoal")
    return std::make_unique<GridGoalEnv>(GridGoalConfig::default_map());
  if (name == "pointlite")
    return std::make_unique<PointLiteEnv>(PointLiteConfig::default_map());
  throw std::invalid_argument("unknown environment: " + name);
}

// ---------------------------------------------------------------------------
// Trajectory dumps

std::string format_action(const Action& a) {
  if (a.discrete >= 0) return std::to_string(a.discrete);
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < a.continuous.size(); ++i) {
    if (i) out << ';';
    out << a.continuous[i];
  }
  return out.str();
}

void write_trajectory_csv(const std::string& path,
                          const std::vector<TrajectoryStep>& steps) {
  std::ofstream out(path);
  if (!out)
    throw std::invalid_argument("write_trajectory_csv: cannot open " + path);
  out << "t,psi,action,r,c,is_backdoor\n";
  char buf[64];
  for (const auto& s : steps) {
    out << s.t << ',' << s.psi << ',' << s.action << ',';
    std::snprintf(buf, sizeof buf, "%.17g", s.reward);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", s.cost);
    out << buf << ',' << (s.is_backdoor ? 1 : 0) << '\n';
  }
}

}  // namespace pnact
