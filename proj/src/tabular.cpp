#include "s2d/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "s2d/csv.hpp"

namespace s2d {

void MdpTable::validate() const {
  if (state_count <= 0 || action_count <= 0)
    throw std::invalid_argument("MdpTable: state_count and action_count must be positive");
  size_t n = static_cast<size_t>(state_count) * action_count;
  if (next_state.size() != n || reward.size() != n ||
      terminal.size() != static_cast<size_t>(state_count))
    throw std::invalid_argument("MdpTable: table sizes do not match state/action counts");
  for (int s = 0; s < state_count; ++s) {
    for (int a = 0; a < action_count; ++a) {
      int ns = next(s, a);
      if (ns < 0 || ns >= state_count)
        throw std::invalid_argument("MdpTable: next_state out of range at state " +
                                    std::to_string(s) + " action " + std::to_string(a));
      if (terminal[s] && (ns != s || r(s, a) != 0.0))
        throw std::invalid_argument("MdpTable: terminal state " + std::to_string(s) +
                                    " must be absorbing with zero reward");
    }
  }
}

double QTable::max_q(int s) const {
  double m = values[s * action_count];
  for (int a = 1; a < action_count; ++a) m = std::max(m, q(s, a));
  return m;
}

QTable value_iteration(const MdpTable& mdp, double gamma, double tol) {
  if (gamma <= 0.0 || gamma > 1.0)
    throw std::invalid_argument("value_iteration: gamma must be in (0, 1]");
  if (tol <= 0.0) throw std::invalid_argument("value_iteration: tol must be positive");

  QTable q;
  q.state_count = mdp.state_count;
  q.action_count = mdp.action_count;
  q.gamma = gamma;
  q.values.assign(static_cast<size_t>(mdp.state_count) * mdp.action_count, 0.0);

  std::vector<double> next_values(q.values.size(), 0.0);
  std::vector<double> state_max(mdp.state_count, 0.0);

  double residual = 0.0;
  for (int sweep = 0; sweep < kValueIterationSweepCap; ++sweep) {
    for (int s = 0; s < mdp.state_count; ++s) {
      double m = q.values[static_cast<size_t>(s) * mdp.action_count];
      for (int a = 1; a < mdp.action_count; ++a) m = std::max(m, q.q(s, a));
      state_max[s] = m;
    }
    residual = 0.0;
    for (int s = 0; s < mdp.state_count; ++s) {
      for (int a = 0; a < mdp.action_count; ++a) {
        size_t i = static_cast<size_t>(s) * mdp.action_count + a;
        next_values[i] = mdp.reward[i] + gamma * state_max[mdp.next_state[i]];
        residual = std::max(residual, std::abs(next_values[i] - q.values[i]));
      }
    }
    q.values.swap(next_values);
    if (residual < tol) {
      q.residual = residual;
      return q;
    }
  }
  throw std::runtime_error("value_iteration: no convergence after " +
                           std::to_string(kValueIterationSweepCap) +
                           " sweeps (gamma=" + format_double(gamma) +
                           ", residual=" + format_double(residual) + ")");
}

std::vector<std::set<int>> optimal_action_sets(const QTable& q, double tie_tol) {
  std::vector<std::set<int>> sets(q.state_count);
  for (int s = 0; s < q.state_count; ++s) {
    double best = q.max_q(s);
    for (int a = 0; a < q.action_count; ++a) {
      double v = q.q(s, a);
      if (!std::isfinite(v))
        throw std::invalid_argument("optimal_action_sets: non-finite Q at state " +
                                    std::to_string(s));
      if (v >= best - tie_tol) sets[s].insert(a);
    }
  }
  return sets;
}

std::vector<double> policy_evaluation(const MdpTable& mdp, const std::vector<int>& policy,
                                      double gamma, double tol) {
  if (gamma <= 0.0 || gamma > 1.0)
    throw std::invalid_argument("policy_evaluation: gamma must be in (0, 1]");
  if (policy.size() != static_cast<size_t>(mdp.state_count))
    throw std::invalid_argument("policy_evaluation: policy size mismatch");

  std::vector<double> v(mdp.state_count, 0.0);
  std::vector<double> nv(mdp.state_count, 0.0);
  double residual = 0.0;
  for (int sweep = 0; sweep < kValueIterationSweepCap; ++sweep) {
    residual = 0.0;
    for (int s = 0; s < mdp.state_count; ++s) {
      int a = policy[s];
      nv[s] = mdp.r(s, a) + gamma * v[mdp.next(s, a)];
      residual = std::max(residual, std::abs(nv[s] - v[s]));
    }
    v.swap(nv);
    if (residual < tol) return v;
  }
  throw std::runtime_error("policy_evaluation: no convergence after " +
                           std::to_string(kValueIterationSweepCap) +
                           " sweeps (gamma=" + format_double(gamma) +
                           ", residual=" + format_double(residual) + ")");
}

std::vector<int> greedy_policy(const QTable& q) {
  std::vector<int> policy(q.state_count, 0);
  for (int s = 0; s < q.state_count; ++s) {
    int best = 0;
    for (int a = 1; a < q.action_count; ++a)
      if (q.q(s, a) > q.q(s, best)) best = a;
    policy[s] = best;
  }
  return policy;
}

}  // namespace s2d
