#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "s2d/tabular.hpp"

namespace s2d {

struct GridPos {
  int x = 0;
  int y = 0;
  bool operator==(const GridPos&) const = default;
  bool operator<(const GridPos& o) const { return y != o.y ? y < o.y : x < o.x; }
};

inline int l1_dist(GridPos a, GridPos b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

struct Observation {
  std::vector<double> features;
  GridPos agent_pos;  // ground truth, for shaping and analysis only
};

enum class EnvKind { fixed4, random10, crossmaze };

std::string to_string(EnvKind k);
EnvKind env_kind_from_string(const std::string& s);

struct EnvConfig {
  EnvKind kind = EnvKind::fixed4;
  int max_steps = 50;
  double living_penalty = -0.1;
  double goal_bonus = 1.0;
  int goal_radius_p1 = 0;  // l1 radius around the goal that ends the episode
  uint64_t seed = 0;
  int arm_length = 5;               // crossmaze
  int view_radius = 2;              // crossmaze
  std::set<int> train_goals = {0, 1};  // crossmaze, 2 of {0,1,2}

  void validate() const;
};

// Actions shared by every grid: up, down, left, right.
inline constexpr int kActionCount = 4;
inline constexpr int kUp = 0, kDown = 1, kLeft = 2, kRight = 3;

// Deterministic gridworld. One instance owns its RNG and is single-threaded;
// independent instances can run in parallel.
class GridEnv {
 public:
  explicit GridEnv(const EnvConfig& cfg);

  Observation reset(uint64_t episode_seed);
  // Returns (observation after the move, environment reward, done).
  struct StepResult {
    Observation obs;
    double reward_env = 0.0;
    bool done = false;
  };
  StepResult step(int action);

  Observation observe() const;
  // Feature encoding for an arbitrary agent position against the current
  // goal; used to rebuild observations from logged positions.
  Observation observe_at(GridPos agent) const;

  // Pins the goal for every subsequent reset. Required before
  // enumerate_states on random-goal environments.
  void freeze_goal(GridPos goal);
  void freeze_goal_index(int goal_index);  // crossmaze
  bool goal_frozen() const { return frozen_goal_.has_value() || cfg_.kind == EnvKind::fixed4; }

  // Restricts which crossmaze goals reset() samples from (training uses the
  // configured pair, evaluation widens to all three).
  void set_active_goals(const std::set<int>& goals);

  // Exports the environment as an exact MDP over free cells; transition and
  // reward entries replicate step() for the current frozen goal.
  MdpTable enumerate_states() const;

  int observation_size() const;
  const std::vector<GridPos>& free_cells() const { return free_cells_; }
  GridPos goal() const { return goal_; }
  GridPos start() const { return start_; }
  GridPos agent() const { return agent_; }
  GridPos crossmaze_goal_cell(int goal_index) const;
  bool in_goal_region(GridPos p) const { return l1_dist(p, goal_) <= cfg_.goal_radius_p1; }
  bool is_free(GridPos p) const;
  bool episode_active() const { return active_; }
  int episode_step() const { return episode_step_; }
  const EnvConfig& config() const { return cfg_; }
  int state_index(GridPos p) const;  // index into free_cells()

 private:
  void build_layout();
  GridPos sample_goal(uint64_t episode_seed) const;

  EnvConfig cfg_;
  int width_ = 0, height_ = 0;
  std::vector<GridPos> free_cells_;
  std::vector<int> cell_index_;  // width*height -> free-cell index or -1
  GridPos start_{}, goal_{}, agent_{};
  std::optional<GridPos> frozen_goal_;
  std::set<int> active_goals_;
  int episode_step_ = 0;
  bool active_ = false;
};

}  // namespace s2d
