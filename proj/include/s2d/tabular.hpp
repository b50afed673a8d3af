#pragma once

#include <set>
#include <vector>

namespace s2d {

// Deterministic finite MDP laid out as flat (state, action) tables. Terminal
// states follow the absorbing convention: they map to themselves with reward
// 0, which keeps discounted values well defined without special cases in the
// solvers.
struct MdpTable {
  int state_count = 0;
  int action_count = 0;
  std::vector<int> next_state;    // [state * action_count + action]
  std::vector<double> reward;     // [state * action_count + action]
  std::vector<bool> terminal;     // per state

  int idx(int s, int a) const { return s * action_count + a; }
  int next(int s, int a) const { return next_state[idx(s, a)]; }
  double r(int s, int a) const { return reward[idx(s, a)]; }

  void validate() const;
};

struct QTable {
  std::vector<double> values;  // [state * action_count + action]
  int state_count = 0;
  int action_count = 0;
  double gamma = 0.0;
  double residual = 0.0;

  double q(int s, int a) const { return values[s * action_count + a]; }
  double max_q(int s) const;
};

inline constexpr int kValueIterationSweepCap = 100000;
inline constexpr double kTieTolDefault = 1e-9;

// Solves Q* by synchronous sweeps until the Bellman residual drops below tol.
// For gamma = 1 the caller must supply a proper MDP (every policy eventually
// reaches an absorbing state); otherwise the sweep cap fires.
QTable value_iteration(const MdpTable& mdp, double gamma, double tol);

// Per-state set of actions within tie_tol of the best Q value. Terminal
// states have Q == 0 for every action and therefore report the full set.
std::vector<std::set<int>> optimal_action_sets(const QTable& q, double tie_tol = kTieTolDefault);

// Fixed point of the given deterministic policy's Bellman operator.
std::vector<double> policy_evaluation(const MdpTable& mdp, const std::vector<int>& policy,
                                      double gamma, double tol);

// Greedy policy (lowest-index tie break) from a solved Q table.
std::vector<int> greedy_policy(const QTable& q);

}  // namespace s2d
