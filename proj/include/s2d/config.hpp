#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "s2d/agents.hpp"

namespace s2d {

// Raw parse of the nested-section key=value config format. Keys are stored as
// "section.sub.key"; every entry carries its source line for error messages.
struct ParsedConfig {
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };
  std::map<std::string, Entry> entries;
  std::string source_name;

  bool has(const std::string& key) const { return entries.count(key) > 0; }
  std::string require(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const;
  void check_all_used() const;  // unknown keys are configuration errors
};

ParsedConfig parse_config_text(const std::string& text, const std::string& source_name);
ParsedConfig parse_config_file(const std::filesystem::path& path);

struct AnalysisToggles {
  bool landscape = false;
  bool sharpness = false;
  bool actions = false;
  bool features = false;
  bool heatmap = false;
};

// A parsed experiment: everything except the per-(baseline, seed) curriculum
// instantiation, which depends on the run's environment goal.
struct ExperimentConfig {
  TrainConfig base;  // env + agent + units + budget + checkpoints (no curriculum/seed)
  std::vector<std::string> baselines;
  std::vector<uint64_t> seeds;
  int potential_p = 1;
  std::optional<double> gate_radius;
  bool progress_bonus = false;
  std::vector<long> transitions;
  std::vector<RewardStage> custom_stages;  // when baselines include "custom"
  AnalysisToggles analyses;
  std::filesystem::path out_dir = "out";
  std::string config_hash;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig bind_experiment_config(const ParsedConfig& pc);

// Whitespace-insensitive hash over the semantic key=value pairs.
std::string canonical_config_hash(const ParsedConfig& pc);

// Builds the curriculum for one baseline preset (only_sparse, only_dense,
// s2d, d2s or custom). Potentials are seeded against the probe environment's
// free cells and current goal; the training loop refreshes them per episode.
Curriculum make_curriculum(const ExperimentConfig& cfg, const std::string& baseline);

inline constexpr const char* kVersionTag = "s2d-lab 0.1.0";

}  // namespace s2d
