#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "s2d/analysis.hpp"
#include "s2d/config.hpp"
#include "s2d/landscape.hpp"

namespace s2d {

struct RunOutcome {
  std::string baseline;
  uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::filesystem::path dir;
};

// Executes every (baseline x seed) run of the experiment on a small worker
// pool and writes the per-run artifacts plus a top-level manifest. Returns
// the outcomes in deterministic (baseline, seed) order.
std::vector<RunOutcome> run_experiment(const ExperimentConfig& cfg,
                                       const std::filesystem::path& out_override = {},
                                       bool force = false, int workers = 0);

// Resolved output directory honoring the S2D_OUT_ROOT override.
std::filesystem::path resolve_out_dir(const ExperimentConfig& cfg,
                                      const std::filesystem::path& out_override);

std::filesystem::path run_dir_for(const std::filesystem::path& out_dir,
                                  const std::string& baseline, uint64_t seed);

// Executes one run in-process and writes its artifacts; used by the pool and
// directly by tests.
RunOutcome execute_single_run(const ExperimentConfig& cfg, const std::string& baseline,
                              uint64_t seed, const std::filesystem::path& run_dir);

// Post-hoc analyses over a completed run directory.
struct AnalyzeRequest {
  bool actions = false;
  bool features = false;
  bool heatmap = false;
  bool sharpness = false;
  std::filesystem::path trajectory_csv;  // optional shared trajectory for features
  int action_episodes = 5;
};

void analyze_run(const std::filesystem::path& run_dir, const AnalyzeRequest& req);

// Cross-density comparison between two completed runs; writes one CSV and one
// SVG per grid into out_dir.
void compare_landscapes(const std::filesystem::path& run_a, const std::filesystem::path& run_b,
                        const std::vector<long>& steps, const std::filesystem::path& out_dir,
                        const CrossDensityOptions& opts = {});

// Oracle-backed curriculum validation for every baseline in the config;
// returns true when all multi-stage baselines satisfy the S2D conditions.
bool validate_curriculum_config(const ExperimentConfig& cfg, std::string& report);

std::vector<EpisodeRecord> load_episode_records(const std::filesystem::path& run_dir);

void write_trajectory_csv(const std::filesystem::path& path, const std::vector<double>& obs_flat,
                          int steps, int dim);
TrajectoryPick load_trajectory_csv(const std::filesystem::path& path);

std::string emit_run_config(const ExperimentConfig& cfg, const std::string& baseline,
                            uint64_t seed);

}  // namespace s2d
