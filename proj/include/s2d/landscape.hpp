#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "s2d/config.hpp"
#include "s2d/nn.hpp"

namespace s2d {

using LossFn = std::function<double(const ParamVector&)>;
using GradFn = std::function<ParamVector(const ParamVector&)>;

struct DirectionPair {
  ParamVector x, y;
  uint64_t seed = 0;
};

// Two seeded standard-normal vectors, Gram-Schmidt orthogonalized and unit
// normalized. dim must be >= 2.
DirectionPair make_directions(size_t dim, uint64_t seed);

struct LandscapeGrid {
  std::vector<double> alphas, betas;
  std::vector<double> losses;        // row-major [alpha][beta]
  std::vector<uint8_t> overflow;     // 1 where the loss was non-finite
  double base_loss = 0.0;
  long checkpoint_step = 0;
  uint64_t batch_fingerprint = 0;

  double at(size_t i, size_t j) const { return losses[i * betas.size() + j]; }
};

// 41 points spanning [-10, 10]; the range follows the visualization protocol,
// the resolution is a project default.
std::vector<double> default_axes();

// losses[i][j] = L(theta + a_i x + b_j y) on a batch the evaluator has
// already frozen. The exact (0, 0) entry is evaluated at theta itself so the
// center matches base_loss bit for bit. Non-finite losses are flagged, not
// fatal.
LandscapeGrid loss_grid(const LossFn& loss, const ParamVector& theta, const DirectionPair& dirs,
                        const std::vector<double>& alphas, const std::vector<double>& betas);

struct SharpnessReport {
  double rho = 0.02;
  double loss_at_theta = 0.0;
  double loss_at_perturbed = 0.0;
  double sharpness = 0.0;
  double gradient_norm = 0.0;
  bool degenerate = false;  // gradient below 1e-12, sharpness forced to 0
};

// One-step estimate of max_{|eps|_2 <= rho} L(theta+eps) - L(theta) with the
// p = q = 2 maximizer eps = rho * grad / |grad|_2.
SharpnessReport sharpness(const LossFn& loss, const GradFn& grad, const ParamVector& theta,
                          double rho = 0.02);

// --- Cross-density protocol over completed run directories ---------------

struct CrossDensityGrid {
  std::string run_label;  // "A" or "B"
  int stage_def = 1;      // 1 or 2: reward definition the loss used
  long checkpoint_step = 0;
  LandscapeGrid grid;
};

struct CrossDensityOptions {
  std::vector<double> alphas = default_axes();
  std::vector<double> betas = default_axes();
  uint64_t direction_seed = 2024;
  uint64_t batch_seed = 7;
  int batch_size = 128;          // DQN replay sample size
  int rollout_episodes = 4;      // PPO frozen rollout size
};

// For each requested checkpoint step, evaluates both runs' checkpoints under
// both runs' stage-1 and stage-2 reward definitions on one shared frozen
// batch and shared directions, yielding four grids per step.
std::vector<CrossDensityGrid> cross_density_protocol(const std::filesystem::path& run_a,
                                                     const std::filesystem::path& run_b,
                                                     const std::vector<long>& checkpoint_steps,
                                                     const CrossDensityOptions& opts = {});

// End-of-training sharpness of a completed run under its final-stage loss.
SharpnessReport run_sharpness(const std::filesystem::path& run_dir, double rho = 0.02,
                              uint64_t batch_seed = 7, int batch_size = 128,
                              int rollout_episodes = 4);

// Loss evaluator over a run's frozen batch at a given stage definition.
// bind_loss(center) fixes everything the loss needs besides the perturbed
// parameters; for DQN the TD target network is frozen at `center`, so grids
// around a checkpoint use that checkpoint as their target.
struct RunLossContext {
  std::function<LossFn(const ParamVector& center)> bind_loss;
  std::function<GradFn(const ParamVector& center)> bind_grad;
  NetSpec spec;
  uint64_t batch_fingerprint = 0;
};

RunLossContext make_run_loss(const std::filesystem::path& run_dir, int stage_def,
                             uint64_t batch_seed = 7, int batch_size = 128,
                             int rollout_episodes = 4);

std::vector<long> list_checkpoint_steps(const std::filesystem::path& run_dir);
std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, long step);

void write_landscape_csv(const std::filesystem::path& path, const LandscapeGrid& grid);

}  // namespace s2d
