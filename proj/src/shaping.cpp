#include "s2d/shaping.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace s2d {

double p_dist(GridPos a, GridPos b, int p) {
  double dx = std::abs(a.x - b.x);
  double dy = std::abs(a.y - b.y);
  if (p == 1) return dx + dy;
  if (p == 2) return std::sqrt(dx * dx + dy * dy);
  throw std::invalid_argument("p_dist: norm order must be 1 or 2");
}

void PotentialSpec::validate() const {
  if (p != 1 && p != 2) throw std::invalid_argument("PotentialSpec: p must be 1 or 2");
  if (diam <= 0.0) throw std::invalid_argument("PotentialSpec: diam must be positive");
}

PotentialSpec make_potential_spec(const std::vector<GridPos>& free_cells, int p, GridPos goal) {
  if (free_cells.empty())
    throw std::invalid_argument("make_potential_spec: empty free-cell set");
  double diam = 0.0;
  for (size_t i = 0; i < free_cells.size(); ++i)
    for (size_t j = i + 1; j < free_cells.size(); ++j)
      diam = std::max(diam, p_dist(free_cells[i], free_cells[j], p));
  PotentialSpec spec{p, goal, diam};
  spec.validate();
  return spec;
}

double potential(const PotentialSpec& spec, GridPos s) {
  return spec.diam - p_dist(s, spec.goal, spec.p);
}

void RewardStage::validate() const {
  if (shaping_enabled && !potential.has_value())
    throw std::invalid_argument("RewardStage: shaping enabled without a potential");
  if (shaping_enabled) potential->validate();
  if (gamma <= 0.0 || gamma > 1.0)
    throw std::invalid_argument("RewardStage: gamma must be in (0, 1]");
  if (progress_bonus_mode && !gate_radius.has_value())
    throw std::invalid_argument("RewardStage: progress_bonus_mode requires gate_radius");
  if (gate_radius && *gate_radius < 0.0)
    throw std::invalid_argument("RewardStage: gate_radius must be >= 0");
}

double shaping_term(const RewardStage& stage, GridPos s, GridPos s_next, bool done) {
  if (!stage.shaping_enabled)
    throw std::logic_error("shaping_term: stage has shaping disabled");
  const PotentialSpec& phi = *stage.potential;

  if (stage.progress_bonus_mode) {
    double d_prev = p_dist(s, phi.goal, phi.p);
    double d_next = p_dist(s_next, phi.goal, phi.p);
    if (d_next <= *stage.gate_radius && d_next < d_prev) return kProgressBonus;
    if (d_prev <= *stage.gate_radius && d_next > d_prev) return -kProgressBonus;
    return 0.0;
  }

  if (stage.gate_radius) {
    double d_prev = p_dist(s, phi.goal, phi.p);
    double d_next = p_dist(s_next, phi.goal, phi.p);
    if (d_prev > *stage.gate_radius && d_next > *stage.gate_radius) return 0.0;
  }

  double phi_next = done ? 0.0 : potential(phi, s_next);
  return stage.gamma * phi_next - potential(phi, s);
}

void Curriculum::validate() const {
  if (stages.empty()) throw std::invalid_argument("Curriculum: needs at least one stage");
  if (transitions.size() + 1 != stages.size())
    throw std::invalid_argument("Curriculum: stage count must equal transition count + 1");
  long prev = 0;
  for (long t : transitions) {
    if (t <= prev)
      throw std::invalid_argument("Curriculum: transitions must be strictly increasing and positive");
    prev = t;
  }
  for (const RewardStage& st : stages) st.validate();
}

int stage_index(const std::vector<long>& transitions, long t) {
  int i = 1;
  for (long T : transitions) {
    if (t >= T)
      ++i;
    else
      break;
  }
  return i;
}

double shaped_reward(const Curriculum& curriculum, long t, GridPos s, GridPos s_next,
                     double r_env, bool done) {
  const RewardStage& stage = curriculum.stages[stage_index(curriculum.transitions, t) - 1];
  if (!stage.shaping_enabled) return r_env;
  return r_env + shaping_term(stage, s, s_next, done);
}

void refresh_stage_potentials(Curriculum& curriculum, const GridEnv& env) {
  for (RewardStage& stage : curriculum.stages) {
    if (!stage.shaping_enabled) continue;
    int p = stage.potential ? stage.potential->p : 1;
    stage.potential = make_potential_spec(env.free_cells(), p, env.goal());
  }
}

namespace {
constexpr double kSupportEps = 1e-12;
}

std::set<int> support_set(const GridEnv& env, const RewardStage& stage,
                          bool include_living_penalty) {
  MdpTable mdp = env.enumerate_states();  // throws when goal randomization is live
  const std::vector<GridPos>& cells = env.free_cells();
  const double living = env.config().living_penalty;

  std::set<int> support;
  for (int s = 0; s < mdp.state_count; ++s) {
    if (mdp.terminal[s]) continue;
    for (int a = 0; a < mdp.action_count; ++a) {
      int ns = mdp.next(s, a);
      double r = mdp.r(s, a);
      if (!include_living_penalty) r -= living;
      if (stage.shaping_enabled)
        r += shaping_term(stage, cells[s], cells[ns], mdp.terminal[ns]);
      if (std::abs(r) > kSupportEps) {
        support.insert(s);
        break;
      }
    }
  }
  return support;
}

StageMdp build_stage_mdp(const GridEnv& env, const RewardStage& stage) {
  StageMdp out;
  out.mdp = env.enumerate_states();
  const std::vector<GridPos>& cells = env.free_cells();
  if (stage.shaping_enabled) {
    for (int s = 0; s < out.mdp.state_count; ++s) {
      if (out.mdp.terminal[s]) continue;
      for (int a = 0; a < out.mdp.action_count; ++a) {
        int ns = out.mdp.next(s, a);
        out.mdp.reward[out.mdp.idx(s, a)] +=
            shaping_term(stage, cells[s], cells[ns], out.mdp.terminal[ns]);
      }
    }
  }
  out.support = support_set(env, stage);
  out.invariance_guaranteed =
      !stage.gate_radius.has_value() && !stage.progress_bonus_mode;
  return out;
}

S2dValidity validate_s2d_stages(const std::vector<StageMdp>& stages, double gamma, double tol,
                                double tie_tol) {
  if (stages.empty()) throw std::invalid_argument("validate_s2d: no stages");

  S2dValidity report;
  std::ostringstream detail;
  std::vector<std::vector<std::set<int>>> per_stage_sets;
  per_stage_sets.reserve(stages.size());
  for (const StageMdp& st : stages) {
    QTable q = value_iteration(st.mdp, gamma, tol);
    per_stage_sets.push_back(optimal_action_sets(q, tie_tol));
    report.invariance_guaranteed.push_back(st.invariance_guaranteed);
  }

  bool all_nested = true;
  for (size_t i = 0; i + 1 < stages.size(); ++i) {
    bool supp_nested = std::includes(stages[i + 1].support.begin(), stages[i + 1].support.end(),
                                     stages[i].support.begin(), stages[i].support.end());
    bool sets_equal = true;
    bool sets_nested = true;  // Pi*_i contains Pi*_{i+1}, checked per state
    const auto& earlier = per_stage_sets[i];
    const auto& later = per_stage_sets[i + 1];
    for (size_t s = 0; s < earlier.size(); ++s) {
      if (earlier[s] != later[s]) sets_equal = false;
      if (!std::includes(earlier[s].begin(), earlier[s].end(), later[s].begin(), later[s].end()))
        sets_nested = false;
    }
    report.support_nested.push_back(supp_nested);
    report.optimal_sets_equal.push_back(sets_equal);
    report.optimal_sets_nested.push_back(sets_nested);
    all_nested = all_nested && supp_nested && sets_nested;
    detail << "stage " << (i + 1) << "->" << (i + 2) << ": support_nested=" << supp_nested
           << " optimal_equal=" << sets_equal << " optimal_nested=" << sets_nested << "\n";
  }
  for (size_t i = 0; i < stages.size(); ++i)
    if (!stages[i].invariance_guaranteed)
      detail << "stage " << (i + 1)
             << ": gated or progress-mode shaping, invariance not guaranteed\n";

  report.valid = all_nested;
  report.detail = detail.str();
  return report;
}

S2dValidity validate_s2d(const Curriculum& curriculum, const GridEnv& env, double gamma,
                         double tol) {
  curriculum.validate();
  std::vector<StageMdp> stages;
  stages.reserve(curriculum.stages.size());
  for (const RewardStage& st : curriculum.stages) {
    StageMdp sm = build_stage_mdp(env, st);
    if (st.shaping_enabled && st.gamma != gamma) sm.invariance_guaranteed = false;
    stages.push_back(std::move(sm));
  }
  return validate_s2d_stages(stages, gamma, tol);
}

}  // namespace s2d
