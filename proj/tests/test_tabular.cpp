#include <doctest.h>
#include <stdexcept>

#include <cmath>

#include "s2d/envs.hpp"
#include "s2d/tabular.hpp"

using namespace s2d;

namespace {

// 2-state line: state 0 start, state 1 terminal goal. Action 0 = bump-left
// (stay), action 1 = right (enter goal).
MdpTable two_state_line() {
  MdpTable m;
  m.state_count = 2;
  m.action_count = 2;
  m.next_state = {0, 1, 1, 1};
  m.reward = {-0.1, 0.9, 0.0, 0.0};
  m.terminal = {false, true};
  m.validate();
  return m;
}

// Independent oracle: finite-horizon backup, no convergence loop.
std::vector<double> finite_horizon_q(const MdpTable& m, double gamma, int horizon) {
  std::vector<double> q(static_cast<size_t>(m.state_count) * m.action_count, 0.0);
  std::vector<double> next(q.size(), 0.0);
  for (int h = 0; h < horizon; ++h) {
    for (int s = 0; s < m.state_count; ++s)
      for (int a = 0; a < m.action_count; ++a) {
        int ns = m.next(s, a);
        double best = q[static_cast<size_t>(ns) * m.action_count];
        for (int b = 1; b < m.action_count; ++b)
          best = std::max(best, q[static_cast<size_t>(ns) * m.action_count + b]);
        next[static_cast<size_t>(s) * m.action_count + a] = m.r(s, a) + gamma * best;
      }
    q.swap(next);
  }
  return q;
}

}  // namespace

TEST_CASE("value iteration matches hand Bellman backups on the 2-state line") {
  QTable q = value_iteration(two_state_line(), 0.9, 1e-12);
  CHECK(q.q(0, 1) == doctest::Approx(0.9).epsilon(1e-10));
  CHECK(q.q(0, 0) == doctest::Approx(0.71).epsilon(1e-10));
  CHECK(q.q(1, 0) == doctest::Approx(0.0));
  CHECK(q.residual < 1e-12);
}

TEST_CASE("all-zero rewards give identically zero Q for any gamma") {
  MdpTable m = two_state_line();
  for (double& r : m.reward) r = 0.0;
  for (double gamma : {0.5, 0.9, 1.0}) {
    QTable q = value_iteration(m, gamma, 1e-12);
    for (double v : q.values) CHECK(v == 0.0);
  }
}

TEST_CASE("fixed4 value iteration agrees with the finite-horizon oracle") {
  GridEnv env(EnvConfig{});
  MdpTable m = env.enumerate_states();
  QTable q = value_iteration(m, 0.99, 1e-12);
  std::vector<double> oracle = finite_horizon_q(m, 0.99, 200);
  for (size_t i = 0; i < oracle.size(); ++i)
    CHECK(std::abs(q.values[i] - oracle[i]) < 1e-9);
}

TEST_CASE("value iteration rejects bad gamma and reports non-convergence") {
  CHECK_THROWS(value_iteration(two_state_line(), 0.0, 1e-10));
  CHECK_THROWS(value_iteration(two_state_line(), 1.5, 1e-10));
  // gamma = 1 with a positive self-loop reward never converges
  MdpTable m = two_state_line();
  m.reward[0] = 0.5;
  CHECK_THROWS_WITH_AS(value_iteration(m, 1.0, 1e-12),
                       doctest::Contains("no convergence"), std::runtime_error);
}

TEST_CASE("optimal action sets: argmax, symmetry and exact ties") {
  QTable q = value_iteration(two_state_line(), 0.9, 1e-12);
  auto sets = optimal_action_sets(q);
  CHECK(sets[0] == std::set<int>{1});
  CHECK(sets[1] == std::set<int>{0, 1});  // terminal: all actions

  QTable zero;
  zero.state_count = 1;
  zero.action_count = 3;
  zero.gamma = 0.9;
  zero.values = {0.0, 0.0, 0.0};
  CHECK(optimal_action_sets(zero)[0] == std::set<int>{0, 1, 2});

  QTable tie = zero;
  tie.values = {0.5, 0.5, 0.1};
  CHECK(optimal_action_sets(tie)[0] == std::set<int>{0, 1});
}

TEST_CASE("policy evaluation: hand case, zero case and greedy consistency") {
  MdpTable m = two_state_line();
  std::vector<double> v = policy_evaluation(m, {1, 0}, 0.9, 1e-12);
  CHECK(v[0] == doctest::Approx(0.9).epsilon(1e-10));
  CHECK(v[1] == doctest::Approx(0.0));

  MdpTable z = m;
  for (double& r : z.reward) r = 0.0;
  for (double val : policy_evaluation(z, {0, 0}, 0.9, 1e-12)) CHECK(val == 0.0);

  GridEnv env(EnvConfig{});
  MdpTable grid = env.enumerate_states();
  QTable q = value_iteration(grid, 0.99, 1e-12);
  std::vector<double> vg = policy_evaluation(grid, greedy_policy(q), 0.99, 1e-12);
  for (int s = 0; s < grid.state_count; ++s)
    CHECK(std::abs(vg[s] - q.max_q(s)) < 10 * 1e-12 + 1e-13);
}

TEST_CASE("residual decreases monotonically for gamma < 1") {
  GridEnv env(EnvConfig{});
  MdpTable m = env.enumerate_states();
  double gamma = 0.9;
  std::vector<double> q(m.state_count * m.action_count, 0.0), next(q.size(), 0.0);
  double prev_res = 1e300;
  for (int sweep = 0; sweep < 50; ++sweep) {
    double res = 0.0;
    for (int s = 0; s < m.state_count; ++s)
      for (int a = 0; a < m.action_count; ++a) {
        int ns = m.next(s, a);
        double best = q[ns * m.action_count];
        for (int b = 1; b < m.action_count; ++b) best = std::max(best, q[ns * m.action_count + b]);
        size_t i = s * m.action_count + a;
        next[i] = m.r(s, a) + gamma * best;
        res = std::max(res, std::abs(next[i] - q[i]));
      }
    q.swap(next);
    CHECK(res <= prev_res + 1e-12);
    prev_res = res;
  }
}

TEST_CASE("optimal sets are invariant to a constant added to every reward") {
  GridEnv env(EnvConfig{});
  MdpTable m = env.enumerate_states();
  QTable q1 = value_iteration(m, 0.99, 1e-12);

  MdpTable shifted = m;
  shifted.terminal.assign(m.state_count, false);  // +c also on absorbing self-loops
  for (double& r : shifted.reward) r += 0.5;
  QTable q2 = value_iteration(shifted, 0.99, 1e-10);

  auto s1 = optimal_action_sets(q1, 1e-6);
  auto s2 = optimal_action_sets(q2, 1e-6);
  for (int s = 0; s < m.state_count; ++s) {
    if (m.terminal[s]) continue;  // absorbing rows become uniform-c rows
    CHECK(s1[s] == s2[s]);
  }
}
