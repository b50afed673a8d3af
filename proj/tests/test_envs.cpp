#include <doctest.h>
#include <stdexcept>

#include <cmath>
#include <map>

#include "s2d/envs.hpp"
#include "s2d/rng.hpp"
#include "s2d/tabular.hpp"

using namespace s2d;

namespace {

EnvConfig fixed4_cfg() { return EnvConfig{}; }

EnvConfig random10_cfg(uint64_t seed = 7) {
  EnvConfig c;
  c.kind = EnvKind::random10;
  c.seed = seed;
  return c;
}

EnvConfig crossmaze_cfg() {
  EnvConfig c;
  c.kind = EnvKind::crossmaze;
  c.seed = 3;
  return c;
}

// Walks the fixed4 agent from (0,0) to target without crossing the goal
// corner: bottom-row targets go down first, everything else goes right first.
void walk_to(GridEnv& env, GridPos target) {
  if (target.y == 3) {
    for (int i = 0; i < target.y; ++i) env.step(kDown);
    for (int i = 0; i < target.x; ++i) env.step(kRight);
  } else {
    for (int i = 0; i < target.x; ++i) env.step(kRight);
    for (int i = 0; i < target.y; ++i) env.step(kDown);
  }
  REQUIRE(env.agent() == target);
}

}  // namespace

TEST_CASE("fixed4 reset puts the agent at the origin with the corner goal") {
  GridEnv env(fixed4_cfg());
  Observation obs = env.reset(123);
  CHECK(obs.agent_pos == GridPos{0, 0});
  CHECK(env.goal() == GridPos{3, 3});
  CHECK(obs.features == std::vector<double>{0.0, 0.0, 1.0, 1.0});
}

TEST_CASE("step: goal entry, boundary bump and max-steps timeout") {
  GridEnv env(fixed4_cfg());
  env.reset(0);
  walk_to(env, {3, 2});
  GridEnv::StepResult sr = env.step(kDown);
  CHECK(sr.reward_env == doctest::Approx(0.9));
  CHECK(sr.done);
  CHECK_THROWS_AS(env.step(kDown), std::logic_error);

  env.reset(1);
  sr = env.step(kLeft);  // bump at (0,0)
  CHECK(env.agent() == GridPos{0, 0});
  CHECK(sr.reward_env == doctest::Approx(-0.1));
  CHECK_FALSE(sr.done);

  env.reset(2);
  for (int i = 0; i < 49; ++i) {
    sr = env.step(kUp);  // bump forever
    CHECK_FALSE(sr.done);
  }
  sr = env.step(kUp);  // 50th step
  CHECK(sr.done);
  CHECK(sr.reward_env == doctest::Approx(-0.1));
}

TEST_CASE("random10 goals are reproducible and uniform over the 99 cells") {
  GridEnv a(random10_cfg()), b(random10_cfg());
  for (uint64_t s : {0ULL, 5ULL, 99ULL}) {
    a.reset(s);
    b.reset(s);
    CHECK(a.goal() == b.goal());
    CHECK_FALSE(a.goal() == GridPos{0, 0});
  }

  GridEnv env(random10_cfg(12));
  std::map<std::pair<int, int>, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    env.reset(i);
    counts[{env.goal().x, env.goal().y}]++;
  }
  CHECK(counts.size() == 99);
  double p = 1.0 / 99.0;
  double sigma = std::sqrt(p * (1 - p) / n);
  for (const auto& [cell, c] : counts) {
    double freq = static_cast<double>(c) / n;
    CHECK(std::abs(freq - p) < 3.0 * sigma);
  }
}

TEST_CASE("observe: normalization endpoints and crossmaze window encoding") {
  GridEnv env(random10_cfg(2));
  env.reset(0);
  env.freeze_goal({9, 9});
  Observation obs = env.reset(0);
  CHECK(obs.features == std::vector<double>{0.0, 0.0, 1.0, 1.0});

  GridEnv cm(crossmaze_cfg());
  cm.reset(0);
  CHECK(cm.observation_size() == 75);
  Observation co = cm.observe();
  CHECK(co.features.size() == 75);
  // start is the south arm end: goal (any arm end) is far outside the window
  double goal_channel = 0.0;
  for (size_t i = 2; i < co.features.size(); i += 3) goal_channel += co.features[i];
  CHECK(goal_channel == 0.0);
  // every cell is exactly one of wall/empty/goal
  for (size_t c = 0; c < 25; ++c)
    CHECK(co.features[3 * c] + co.features[3 * c + 1] + co.features[3 * c + 2] == 1.0);
}

TEST_CASE("crossmaze layout: plus shape, arm ends, goal sampling set") {
  GridEnv cm(crossmaze_cfg());
  CHECK(cm.free_cells().size() == 21);  // 4*5 + 1
  CHECK(cm.start() == GridPos{5, 10});
  CHECK(cm.crossmaze_goal_cell(0) == GridPos{0, 5});
  CHECK(cm.crossmaze_goal_cell(1) == GridPos{5, 0});
  CHECK(cm.crossmaze_goal_cell(2) == GridPos{10, 5});
  for (int i = 0; i < 50; ++i) {
    cm.reset(i);
    bool is_train_goal = cm.goal() == cm.crossmaze_goal_cell(0) ||
                         cm.goal() == cm.crossmaze_goal_cell(1);
    CHECK(is_train_goal);
  }
  cm.set_active_goals({2});
  cm.reset(0);
  CHECK(cm.goal() == cm.crossmaze_goal_cell(2));
}

TEST_CASE("enumerate_states matches step semantics exactly on fixed4") {
  GridEnv env(fixed4_cfg());
  MdpTable m = env.enumerate_states();
  CHECK(m.state_count == 16);
  CHECK(m.action_count == 4);
  CHECK(m.terminal[env.state_index({3, 3})]);

  for (GridPos cell : env.free_cells()) {
    if (cell == GridPos{3, 3}) continue;
    for (int a = 0; a < kActionCount; ++a) {
      GridEnv replay(fixed4_cfg());
      replay.reset(0);
      walk_to(replay, cell);
      GridEnv::StepResult sr = replay.step(a);
      int s = env.state_index(cell);
      CHECK(m.next(s, a) == env.state_index(replay.agent()));
      CHECK(m.r(s, a) == doctest::Approx(sr.reward_env).epsilon(1e-15));
    }
  }
}

TEST_CASE("enumerate_states requires a frozen goal on random-goal environments") {
  GridEnv env(random10_cfg());
  env.reset(0);
  CHECK_THROWS_AS(env.enumerate_states(), std::logic_error);
  env.freeze_goal({4, 7});
  MdpTable m = env.enumerate_states();
  CHECK(m.state_count == 100);
  CHECK(m.terminal[env.state_index({4, 7})]);
}

TEST_CASE("crossmaze enumerate counts the corridor cells") {
  GridEnv cm(crossmaze_cfg());
  cm.freeze_goal_index(1);
  MdpTable m = cm.enumerate_states();
  CHECK(m.state_count == 21);
  // reward into the goal from the adjacent corridor cell
  int s = cm.state_index({5, 1});
  CHECK(m.r(s, kUp) == doctest::Approx(0.9));
  CHECK(m.terminal[m.next(s, kUp)]);
}

TEST_CASE("positions move by at most one cell and returns stay within bounds") {
  GridEnv env(random10_cfg(5));
  Rng rng(99);
  for (int ep = 0; ep < 20; ++ep) {
    env.reset(ep);
    GridPos prev = env.agent();
    double ret = 0.0;
    bool done = false;
    while (!done) {
      GridEnv::StepResult sr = env.step(static_cast<int>(rng.below(4)));
      CHECK(l1_dist(prev, env.agent()) <= 1);
      prev = env.agent();
      ret += sr.reward_env;
      done = sr.done;
    }
    CHECK(ret >= -0.1 * env.config().max_steps - 1e-12);
    CHECK(ret <= env.config().goal_bonus + 1e-12);
  }
}

TEST_CASE("value-iteration greedy rollout reaches the fixed4 goal in 6 steps") {
  GridEnv env(fixed4_cfg());
  MdpTable m = env.enumerate_states();
  QTable q = value_iteration(m, 0.99, 1e-12);
  std::vector<int> policy = greedy_policy(q);
  env.reset(0);
  int steps = 0;
  bool done = false;
  while (!done) {
    GridEnv::StepResult sr = env.step(policy[env.state_index(env.agent())]);
    done = sr.done;
    ++steps;
  }
  CHECK(steps == 6);
  CHECK(env.in_goal_region(env.agent()));
}

TEST_CASE("reset/step sequences are bit-reproducible") {
  for (EnvConfig cfg : {random10_cfg(42), crossmaze_cfg()}) {
    GridEnv a(cfg), b(cfg);
    Rng rng(7);
    for (int ep = 0; ep < 5; ++ep) {
      Observation oa = a.reset(ep), ob = b.reset(ep);
      CHECK(oa.features == ob.features);
      bool done = false;
      while (!done) {
        int action = static_cast<int>(rng.below(4));
        GridEnv::StepResult sa = a.step(action), sb = b.step(action);
        CHECK(sa.reward_env == sb.reward_env);
        CHECK(sa.obs.features == sb.obs.features);
        CHECK(sa.done == sb.done);
        done = sa.done;
      }
    }
  }
}
