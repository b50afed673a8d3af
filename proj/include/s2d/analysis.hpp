#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "s2d/agents.hpp"
#include "s2d/envs.hpp"
#include "s2d/nn.hpp"

namespace s2d {

struct EpisodeRecord {
  uint64_t seed = 0;
  long episode = 0;
  int length = 0;
  double return_env = 0.0;
  double return_shaped = 0.0;
  bool success = false;
  std::vector<GridPos> positions;  // length + 1 entries
};

// Per-episode action proportions averaged over episodes (outer 1/n, inner
// 1/T_i); the result sums to 1.
std::vector<double> action_frequencies(Actor& actor, GridEnv& env, int episode_count,
                                       uint64_t seed, ActMode mode = ActMode::sample);

double mean_pairwise_distance(const std::vector<std::vector<double>>& vectors);

struct FeatureCurve {
  std::vector<long> checkpoint_steps;
  std::vector<double> mean_distance;
};

// Replays one fixed observation trajectory through each checkpoint's
// recurrent cell (hidden state reset to zero each time) and reports the mean
// pairwise l2 distance between the hidden states along the trajectory.
FeatureCurve feature_mean_distance(const std::vector<std::filesystem::path>& checkpoints,
                                   const std::vector<double>& trajectory_obs, int steps);

struct Heatmap {
  int width = 0, height = 0;
  std::vector<long> visits;  // row-major [y][x]
  std::vector<GridPos> most_frequent_path;  // empty when no successful episode

  long at(int x, int y) const { return visits[static_cast<size_t>(y) * width + x]; }
  long total() const;
};

// Visit counts over every logged position; the most frequent path is the
// successful position sequence with the highest exact multiplicity
// (ties: shortest, then earliest).
Heatmap trajectory_heatmap(const std::vector<EpisodeRecord>& records, int width, int height);

struct SummaryStats {
  double success_rate = 0.0;
  double mean_len = 0.0, std_len = 0.0;
  double mean_return = 0.0, std_return = 0.0;
  int count = 0;
  bool degenerate_n = false;  // single record: std reported as 0
};

// Unbiased (n-1) standard deviations over env returns and episode lengths.
SummaryStats metrics_summary(const std::vector<EpisodeRecord>& records);

// Fixed-trajectory selection for the feature analysis: the first evaluation
// episode whose length falls within [min_len, max_len].
struct TrajectoryPick {
  std::vector<double> obs_flat;
  int steps = 0;
};

TrajectoryPick pick_fixed_trajectory(Actor& actor, GridEnv& env, uint64_t seed, int min_len,
                                     int max_len, int max_tries = 100,
                                     ActMode mode = ActMode::sample);

}  // namespace s2d
