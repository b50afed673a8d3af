#include "s2d/envs.hpp"

#include <algorithm>
#include <stdexcept>

#include "s2d/rng.hpp"

namespace s2d {

std::string to_string(EnvKind k) {
  switch (k) {
    case EnvKind::fixed4: return "fixed4";
    case EnvKind::random10: return "random10";
    case EnvKind::crossmaze: return "crossmaze";
  }
  return "?";
}

EnvKind env_kind_from_string(const std::string& s) {
  if (s == "fixed4") return EnvKind::fixed4;
  if (s == "random10") return EnvKind::random10;
  if (s == "crossmaze") return EnvKind::crossmaze;
  throw std::invalid_argument("unknown env kind: " + s);
}

void EnvConfig::validate() const {
  if (max_steps <= 0) throw std::invalid_argument("EnvConfig: max_steps must be > 0");
  if (goal_radius_p1 < 0) throw std::invalid_argument("EnvConfig: goal_radius_p1 must be >= 0");
  if (kind == EnvKind::crossmaze) {
    if (arm_length < 1) throw std::invalid_argument("EnvConfig: arm_length must be >= 1");
    if (view_radius < 1) throw std::invalid_argument("EnvConfig: view_radius must be >= 1");
    for (int g : train_goals)
      if (g < 0 || g > 2)
        throw std::invalid_argument("EnvConfig: train_goals entries must be in {0,1,2}");
    if (train_goals.empty())
      throw std::invalid_argument("EnvConfig: train_goals must not be empty");
  }
}

GridEnv::GridEnv(const EnvConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  build_layout();
  active_goals_ = cfg_.train_goals;
  goal_ = (cfg_.kind == EnvKind::crossmaze) ? crossmaze_goal_cell(*active_goals_.begin())
                                            : GridPos{width_ - 1, height_ - 1};
  agent_ = start_;
}

void GridEnv::build_layout() {
  auto add_cell = [&](int x, int y) {
    if (cell_index_[y * width_ + x] < 0) {
      cell_index_[y * width_ + x] = static_cast<int>(free_cells_.size());
      free_cells_.push_back({x, y});
    }
  };
  switch (cfg_.kind) {
    case EnvKind::fixed4:
      width_ = height_ = 4;
      cell_index_.assign(width_ * height_, -1);
      for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) add_cell(x, y);
      start_ = {0, 0};
      break;
    case EnvKind::random10:
      width_ = height_ = 10;
      cell_index_.assign(width_ * height_, -1);
      for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) add_cell(x, y);
      start_ = {0, 0};
      break;
    case EnvKind::crossmaze: {
      int L = cfg_.arm_length;
      width_ = height_ = 2 * L + 1;
      cell_index_.assign(width_ * height_, -1);
      for (int y = 0; y < height_; ++y) add_cell(L, y);  // vertical corridor
      for (int x = 0; x < width_; ++x) add_cell(x, L);   // horizontal corridor
      start_ = {L, 2 * L};  // south arm end
      break;
    }
  }
}

GridPos GridEnv::crossmaze_goal_cell(int goal_index) const {
  if (cfg_.kind != EnvKind::crossmaze)
    throw std::logic_error("crossmaze_goal_cell: not a crossmaze environment");
  int L = cfg_.arm_length;
  // Clockwise from the south start arm: 0 = west, 1 = north, 2 = east.
  switch (goal_index) {
    case 0: return {0, L};
    case 1: return {L, 0};
    case 2: return {2 * L, L};
  }
  throw std::invalid_argument("crossmaze goal index must be in {0,1,2}");
}

bool GridEnv::is_free(GridPos p) const {
  if (p.x < 0 || p.x >= width_ || p.y < 0 || p.y >= height_) return false;
  return cell_index_[p.y * width_ + p.x] >= 0;
}

int GridEnv::state_index(GridPos p) const {
  if (!is_free(p)) throw std::invalid_argument("state_index: not a free cell");
  return cell_index_[p.y * width_ + p.x];
}

void GridEnv::freeze_goal(GridPos goal) {
  if (!is_free(goal)) throw std::invalid_argument("freeze_goal: goal must be a free cell");
  frozen_goal_ = goal;
  goal_ = goal;
}

void GridEnv::freeze_goal_index(int goal_index) { freeze_goal(crossmaze_goal_cell(goal_index)); }

void GridEnv::set_active_goals(const std::set<int>& goals) {
  if (cfg_.kind != EnvKind::crossmaze)
    throw std::logic_error("set_active_goals: only crossmaze samples goal indices");
  if (goals.empty()) throw std::invalid_argument("set_active_goals: empty goal set");
  for (int g : goals)
    if (g < 0 || g > 2) throw std::invalid_argument("set_active_goals: goal index out of range");
  active_goals_ = goals;
}

GridPos GridEnv::sample_goal(uint64_t episode_seed) const {
  Rng rng(derive_seed(cfg_.seed, "episode-goal", episode_seed));
  switch (cfg_.kind) {
    case EnvKind::fixed4:
      return {width_ - 1, height_ - 1};
    case EnvKind::random10: {
      // Uniform over the 99 non-start cells.
      int start_idx = cell_index_[start_.y * width_ + start_.x];
      int n = static_cast<int>(free_cells_.size());
      int pick = static_cast<int>(rng.below(static_cast<uint64_t>(n - 1)));
      if (pick >= start_idx) ++pick;
      return free_cells_[pick];
    }
    case EnvKind::crossmaze: {
      std::vector<int> goals(active_goals_.begin(), active_goals_.end());
      int pick = static_cast<int>(rng.below(goals.size()));
      return crossmaze_goal_cell(goals[pick]);
    }
  }
  return start_;
}

Observation GridEnv::reset(uint64_t episode_seed) {
  agent_ = start_;
  goal_ = frozen_goal_ ? *frozen_goal_ : sample_goal(episode_seed);
  episode_step_ = 0;
  active_ = true;
  return observe();
}

GridEnv::StepResult GridEnv::step(int action) {
  if (!active_)
    throw std::logic_error("step: episode already finished; call reset first");
  if (action < 0 || action >= kActionCount)
    throw std::invalid_argument("step: action id out of range");

  GridPos target = agent_;
  switch (action) {
    case kUp: target.y -= 1; break;
    case kDown: target.y += 1; break;
    case kLeft: target.x -= 1; break;
    case kRight: target.x += 1; break;
  }
  if (is_free(target)) agent_ = target;  // bumps leave the position unchanged

  ++episode_step_;
  double reward = cfg_.living_penalty;
  bool done = false;
  if (in_goal_region(agent_)) {
    reward += cfg_.goal_bonus;
    done = true;
  }
  if (episode_step_ >= cfg_.max_steps) done = true;
  if (done) active_ = false;
  return {observe(), reward, done};
}

Observation GridEnv::observe() const { return observe_at(agent_); }

Observation GridEnv::observe_at(GridPos agent) const {
  Observation obs;
  obs.agent_pos = agent;
  if (cfg_.kind == EnvKind::crossmaze) {
    int r = cfg_.view_radius;
    int side = 2 * r + 1;
    obs.features.assign(static_cast<size_t>(side) * side * 3, 0.0);
    size_t i = 0;
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx, i += 3) {
        GridPos p{agent.x + dx, agent.y + dy};
        if (!is_free(p)) {
          obs.features[i + 0] = 1.0;  // wall
        } else if (p == goal_) {
          obs.features[i + 2] = 1.0;  // goal
        } else {
          obs.features[i + 1] = 1.0;  // empty
        }
      }
    }
  } else {
    double sx = width_ > 1 ? width_ - 1 : 1;
    double sy = height_ > 1 ? height_ - 1 : 1;
    obs.features = {agent.x / sx, agent.y / sy, goal_.x / sx, goal_.y / sy};
  }
  return obs;
}

int GridEnv::observation_size() const {
  if (cfg_.kind == EnvKind::crossmaze) {
    int side = 2 * cfg_.view_radius + 1;
    return side * side * 3;
  }
  return 4;
}

MdpTable GridEnv::enumerate_states() const {
  if (!goal_frozen())
    throw std::logic_error(
        "enumerate_states: goal randomization not frozen; call freeze_goal first");

  GridPos goal = frozen_goal_ ? *frozen_goal_ : goal_;
  int n = static_cast<int>(free_cells_.size());
  MdpTable mdp;
  mdp.state_count = n;
  mdp.action_count = kActionCount;
  mdp.next_state.assign(static_cast<size_t>(n) * kActionCount, 0);
  mdp.reward.assign(static_cast<size_t>(n) * kActionCount, 0.0);
  mdp.terminal.assign(n, false);

  for (int s = 0; s < n; ++s)
    mdp.terminal[s] = l1_dist(free_cells_[s], goal) <= cfg_.goal_radius_p1;

  for (int s = 0; s < n; ++s) {
    GridPos pos = free_cells_[s];
    for (int a = 0; a < kActionCount; ++a) {
      if (mdp.terminal[s]) {
        mdp.next_state[mdp.idx(s, a)] = s;  // absorbing, zero reward
        continue;
      }
      GridPos target = pos;
      switch (a) {
        case kUp: target.y -= 1; break;
        case kDown: target.y += 1; break;
        case kLeft: target.x -= 1; break;
        case kRight: target.x += 1; break;
      }
      GridPos next = is_free(target) ? target : pos;
      mdp.next_state[mdp.idx(s, a)] = cell_index_[next.y * width_ + next.x];
      double reward = cfg_.living_penalty;
      if (l1_dist(next, goal) <= cfg_.goal_radius_p1) reward += cfg_.goal_bonus;
      mdp.reward[mdp.idx(s, a)] = reward;
    }
  }
  mdp.validate();
  return mdp;
}

}  // namespace s2d
