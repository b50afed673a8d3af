#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "s2d/envs.hpp"
#include "s2d/tabular.hpp"

namespace s2d {

// Distance-to-goal potential: phi(s) = diam - ||s - goal||_p, non-negative on
// the free-cell set by construction of diam.
struct PotentialSpec {
  int p = 1;  // norm order, 1 or 2
  GridPos goal{};
  double diam = 0.0;

  void validate() const;
};

double p_dist(GridPos a, GridPos b, int p);

// diam computed exactly as the max pairwise p-distance over free cells.
PotentialSpec make_potential_spec(const std::vector<GridPos>& free_cells, int p, GridPos goal);

double potential(const PotentialSpec& spec, GridPos s);

// Fixed bonus magnitude for the gated progress-reward variant.
inline constexpr double kProgressBonus = 0.001;

struct RewardStage {
  bool shaping_enabled = false;
  std::optional<PotentialSpec> potential;
  double gamma = 0.99;
  std::optional<double> gate_radius;  // p-radius within which shaping applies
  bool progress_bonus_mode = false;

  void validate() const;
};

// Shaping term F for one transition. Terminal transitions use the absorbing
// convention phi(next) = 0, which makes the discounted sum over any finished
// episode telescope to -phi(s0).
double shaping_term(const RewardStage& stage, GridPos s, GridPos s_next, bool done);

struct Curriculum {
  std::vector<RewardStage> stages;   // length N >= 1
  std::vector<long> transitions;     // N-1 strictly increasing positive values

  void validate() const;
  int stage_count() const { return static_cast<int>(stages.size()); }
};

// Def.-style stage indicator: the unique i with t in [T_{i-1}, T_i),
// T_0 = 0 and T_N = infinity. 1-based.
int stage_index(const std::vector<long>& transitions, long t);

double shaped_reward(const Curriculum& curriculum, long t, GridPos s, GridPos s_next,
                     double r_env, bool done);

// Rebuilds each shaping stage's potential against the environment's current
// goal; called after every reset on random-goal environments.
void refresh_stage_potentials(Curriculum& curriculum, const GridEnv& env);

// States with some action yielding nonzero goal or shaping reward. The
// uniform living penalty is excluded unless asked for, since it would make
// every reward function trivially dense.
std::set<int> support_set(const GridEnv& env, const RewardStage& stage,
                          bool include_living_penalty = false);

// One curriculum stage prepared for oracle validation.
struct StageMdp {
  MdpTable mdp;                       // base rewards plus the stage's additive term
  std::set<int> support;
  bool invariance_guaranteed = true;  // false for gated / progress / gamma-mismatched stages
};

struct S2dValidity {
  bool valid = false;
  std::vector<bool> support_nested;        // consecutive pairs: supp_i subset of supp_{i+1}
  std::vector<bool> optimal_sets_equal;    // consecutive pairs, per-state equality everywhere
  std::vector<bool> optimal_sets_nested;   // consecutive pairs: sets_i superset of sets_{i+1}
  std::vector<bool> invariance_guaranteed; // per stage
  std::string detail;
};

// Core checker over prepared stage MDPs (used directly by tests that craft
// non-potential counterexamples).
S2dValidity validate_s2d_stages(const std::vector<StageMdp>& stages, double gamma, double tol,
                                double tie_tol = kTieTolDefault);

// Builds each stage's shaped MDP from the environment and runs the oracle
// checks of the S2D definition: support nesting and optimal-set nesting.
S2dValidity validate_s2d(const Curriculum& curriculum, const GridEnv& env, double gamma,
                         double tol);

StageMdp build_stage_mdp(const GridEnv& env, const RewardStage& stage);

}  // namespace s2d
