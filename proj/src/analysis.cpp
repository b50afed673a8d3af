#include "s2d/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace s2d {

std::vector<double> action_frequencies(Actor& actor, GridEnv& env, int episode_count,
                                       uint64_t seed, ActMode mode) {
  if (episode_count < 1)
    throw std::invalid_argument("action_frequencies: need at least one episode");
  Rng rng(derive_seed(seed, "action-freq"));
  std::vector<double> freq(kActionCount, 0.0);
  for (int e = 0; e < episode_count; ++e) {
    Observation obs = env.reset(derive_seed(seed, "action-freq-episode", e));
    actor.begin_episode();
    std::vector<long> counts(kActionCount, 0);
    long steps = 0;
    bool done = false;
    while (!done) {
      int a = actor.act(obs.features, mode, 0.0, rng);
      counts[a] += 1;
      ++steps;
      GridEnv::StepResult sr = env.step(a);
      done = sr.done;
      obs = sr.obs;
    }
    if (steps == 0) throw std::runtime_error("action_frequencies: zero-length episode");
    for (int a = 0; a < kActionCount; ++a)
      freq[a] += static_cast<double>(counts[a]) / static_cast<double>(steps);
  }
  for (double& f : freq) f /= static_cast<double>(episode_count);
  return freq;
}

double mean_pairwise_distance(const std::vector<std::vector<double>>& vectors) {
  size_t n = vectors.size();
  if (n < 2) return 0.0;
  double sum = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (size_t k = 0; k < vectors[i].size(); ++k) {
        double d = vectors[i][k] - vectors[j][k];
        d2 += d * d;
      }
      sum += std::sqrt(d2);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

FeatureCurve feature_mean_distance(const std::vector<std::filesystem::path>& checkpoints,
                                   const std::vector<double>& trajectory_obs, int steps) {
  FeatureCurve curve;
  for (const std::filesystem::path& path : checkpoints) {
    Checkpoint ck = load_checkpoint(path);
    if (!ck.spec.recurrent)
      throw std::runtime_error("feature_mean_distance: checkpoint is not recurrent: " +
                               path.string());
    RnnForwardResult f = rnn_forward(ck.spec, ck.params, trajectory_obs, steps, nullptr);
    int h = ck.spec.recurrent->hidden_size;
    std::vector<std::vector<double>> hs(steps);
    for (int t = 0; t < steps; ++t)
      hs[t].assign(f.hidden.begin() + static_cast<size_t>(t) * h,
                   f.hidden.begin() + static_cast<size_t>(t + 1) * h);
    std::string name = path.filename().string();
    long step = 0;
    if (name.rfind("ckpt_", 0) == 0) step = std::stol(name.substr(5));
    curve.checkpoint_steps.push_back(step);
    curve.mean_distance.push_back(mean_pairwise_distance(hs));
  }
  return curve;
}

long Heatmap::total() const {
  long t = 0;
  for (long v : visits) t += v;
  return t;
}

Heatmap trajectory_heatmap(const std::vector<EpisodeRecord>& records, int width, int height) {
  Heatmap hm;
  hm.width = width;
  hm.height = height;
  hm.visits.assign(static_cast<size_t>(width) * height, 0);
  for (const EpisodeRecord& rec : records) {
    for (GridPos p : rec.positions) {
      if (p.x < 0 || p.x >= width || p.y < 0 || p.y >= height)
        throw std::runtime_error("trajectory_heatmap: position outside grid bounds");
      hm.visits[static_cast<size_t>(p.y) * width + p.x] += 1;
    }
  }

  // Most frequent successful path, exact-sequence multiplicity.
  std::map<std::vector<GridPos>, std::pair<long, size_t>> counts;  // path -> (count, first idx)
  for (size_t i = 0; i < records.size(); ++i) {
    if (!records[i].success) continue;
    auto it = counts.find(records[i].positions);
    if (it == counts.end())
      counts[records[i].positions] = {1, i};
    else
      it->second.first += 1;
  }
  long best_count = 0;
  size_t best_len = 0, best_first = 0;
  for (const auto& [path, meta] : counts) {
    auto [count, first] = meta;
    bool better = false;
    if (count > best_count)
      better = true;
    else if (count == best_count && best_count > 0) {
      if (path.size() < best_len)
        better = true;
      else if (path.size() == best_len && first < best_first)
        better = true;
    }
    if (better) {
      best_count = count;
      best_len = path.size();
      best_first = first;
      hm.most_frequent_path = path;
    }
  }
  return hm;
}

SummaryStats metrics_summary(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw std::invalid_argument("metrics_summary: empty record group");
  SummaryStats s;
  s.count = static_cast<int>(records.size());
  double n = static_cast<double>(records.size());
  for (const EpisodeRecord& r : records) {
    s.success_rate += r.success ? 1.0 : 0.0;
    s.mean_len += r.length;
    s.mean_return += r.return_env;
  }
  s.success_rate /= n;
  s.mean_len /= n;
  s.mean_return /= n;
  if (records.size() == 1) {
    s.degenerate_n = true;
    return s;
  }
  double var_len = 0.0, var_ret = 0.0;
  for (const EpisodeRecord& r : records) {
    var_len += (r.length - s.mean_len) * (r.length - s.mean_len);
    var_ret += (r.return_env - s.mean_return) * (r.return_env - s.mean_return);
  }
  s.std_len = std::sqrt(var_len / (n - 1.0));
  s.std_return = std::sqrt(var_ret / (n - 1.0));
  return s;
}

TrajectoryPick pick_fixed_trajectory(Actor& actor, GridEnv& env, uint64_t seed, int min_len,
                                     int max_len, int max_tries, ActMode mode) {
  Rng rng(derive_seed(seed, "fixed-trajectory"));
  for (int e = 0; e < max_tries; ++e) {
    Observation obs = env.reset(derive_seed(seed, "fixed-trajectory-episode", e));
    actor.begin_episode();
    TrajectoryPick pick;
    bool done = false;
    while (!done) {
      pick.obs_flat.insert(pick.obs_flat.end(), obs.features.begin(), obs.features.end());
      ++pick.steps;
      int a = actor.act(obs.features, mode, 0.0, rng);
      GridEnv::StepResult sr = env.step(a);
      done = sr.done;
      obs = sr.obs;
    }
    if (pick.steps >= min_len && pick.steps <= max_len) return pick;
  }
  throw std::runtime_error("pick_fixed_trajectory: no episode in the length window after " +
                           std::to_string(max_tries) + " tries");
}

}  // namespace s2d
