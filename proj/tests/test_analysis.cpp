#include <doctest.h>
#include <stdexcept>

#include <cmath>
#include <filesystem>

#include "s2d/analysis.hpp"

using namespace s2d;

namespace {

GridEnv crossmaze_env(uint64_t seed = 2) {
  EnvConfig c;
  c.kind = EnvKind::crossmaze;
  c.seed = seed;
  return GridEnv(c);
}

Actor biased_actor(int favored_action) {
  NetSpec spec;
  spec.layer_sizes = {4, 4};
  ParamVector params(param_count(spec), 0.0);
  params[4 * 4 + favored_action] = 50.0;  // bias so softmax is ~deterministic
  return Actor(spec, params);
}

}  // namespace

TEST_CASE("action frequencies: deterministic policy, uniform policy, simplex") {
  EnvConfig cfg;  // fixed4
  GridEnv env(cfg);

  Actor down_actor = biased_actor(kDown);
  std::vector<double> f = action_frequencies(down_actor, env, 3, 5, ActMode::greedy);
  CHECK(f[kDown] == doctest::Approx(1.0));
  CHECK(f[kUp] == 0.0);

  NetSpec spec;
  spec.layer_sizes = {4, 4};
  Actor uniform(spec, ParamVector(param_count(spec), 0.0));
  std::vector<double> uf = action_frequencies(uniform, env, 40, 7, ActMode::sample);
  double sum = 0.0;
  for (double v : uf) sum += v;
  CHECK(std::abs(sum - 1.0) < 1e-9);
  // crude multinomial bound at ~40 episodes x ~13 steps
  for (double v : uf) CHECK(std::abs(v - 0.25) < 0.06);

  std::vector<double> again = action_frequencies(uniform, env, 40, 7, ActMode::sample);
  CHECK(uf == again);  // rerun-identical
}

TEST_CASE("mean pairwise distance: hand case, permutation invariance, zero iff equal") {
  CHECK(mean_pairwise_distance({{0.0, 0.0}, {3.0, 4.0}}) == doctest::Approx(5.0));
  CHECK(mean_pairwise_distance({{1.0, 1.0}}) == 0.0);

  std::vector<std::vector<double>> hs = {{0, 0}, {1, 0}, {0, 1}};
  std::vector<std::vector<double>> hs2 = {{0, 1}, {0, 0}, {1, 0}};
  CHECK(mean_pairwise_distance(hs) == doctest::Approx(mean_pairwise_distance(hs2)));

  std::vector<std::vector<double>> same = {{2, 2}, {2, 2}, {2, 2}};
  CHECK(mean_pairwise_distance(same) == 0.0);
  CHECK(mean_pairwise_distance(hs) > 0.0);
}

TEST_CASE("feature curve: identical checkpoints match, zero params give zero") {
  NetSpec spec;
  spec.layer_sizes = {75, 16, 4};
  spec.recurrent = RecurrentSpec{8, 8};
  ParamVector params = init_params(spec, 4);

  std::filesystem::path dir = std::filesystem::temp_directory_path() / "s2d_feat_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "ckpt_100.txt", spec, params);
  save_checkpoint(dir / "ckpt_200.txt", spec, params);
  save_checkpoint(dir / "ckpt_300.txt", spec, ParamVector(params.size(), 0.0));

  GridEnv env = crossmaze_env();
  env.reset(0);
  std::vector<double> obs_flat;
  int steps = 12;
  Rng rng(3);
  for (int t = 0; t < steps; ++t) {
    Observation o = env.observe();
    obs_flat.insert(obs_flat.end(), o.features.begin(), o.features.end());
    env.step(static_cast<int>(rng.below(4)));
  }

  FeatureCurve curve = feature_mean_distance(
      {dir / "ckpt_100.txt", dir / "ckpt_200.txt", dir / "ckpt_300.txt"}, obs_flat, steps);
  REQUIRE(curve.mean_distance.size() == 3);
  CHECK(curve.checkpoint_steps == std::vector<long>{100, 200, 300});
  CHECK(curve.mean_distance[0] == curve.mean_distance[1]);
  CHECK(curve.mean_distance[0] > 0.0);
  CHECK(curve.mean_distance[2] == 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("heatmap: counts, totals and most-frequent-path extraction") {
  EpisodeRecord resting;
  resting.success = false;
  resting.length = 4;
  resting.positions = {{0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}};
  Heatmap hm = trajectory_heatmap({resting}, 4, 4);
  CHECK(hm.at(0, 0) == 5);
  CHECK(hm.total() == 5);
  CHECK(hm.most_frequent_path.empty());  // no successful episode

  EpisodeRecord a;
  a.success = true;
  a.length = 2;
  a.positions = {{0, 0}, {1, 0}, {1, 1}};
  EpisodeRecord b = a;
  EpisodeRecord c;
  c.success = true;
  c.length = 2;
  c.positions = {{0, 0}, {0, 1}, {1, 1}};
  Heatmap hm2 = trajectory_heatmap({c, a, b}, 4, 4);
  CHECK(hm2.most_frequent_path == a.positions);  // duplicated path wins
  CHECK(hm2.total() == 9);

  // tie on count: shorter wins; tie on length: earliest wins
  EpisodeRecord s1;
  s1.success = true;
  s1.length = 1;
  s1.positions = {{0, 0}, {0, 1}};
  Heatmap hm3 = trajectory_heatmap({c, s1}, 4, 4);
  CHECK(hm3.most_frequent_path == s1.positions);
  EpisodeRecord s2 = s1;
  s2.positions = {{0, 0}, {1, 0}};
  Heatmap hm4 = trajectory_heatmap({s1, s2}, 4, 4);
  CHECK(hm4.most_frequent_path == s1.positions);

  EpisodeRecord oob;
  oob.positions = {{9, 9}};
  CHECK_THROWS_AS(trajectory_heatmap({oob}, 4, 4), std::runtime_error);
}

TEST_CASE("metrics summary: hand stats and degenerate single record") {
  EpisodeRecord a, b;
  a.length = 4;
  a.return_env = 1.0;
  a.success = true;
  b.length = 6;
  b.return_env = 2.0;
  b.success = true;
  SummaryStats s = metrics_summary({a, b});
  CHECK(s.success_rate == doctest::Approx(1.0));
  CHECK(s.mean_len == doctest::Approx(5.0));
  CHECK(s.std_len == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(s.mean_return == doctest::Approx(1.5));
  CHECK_FALSE(s.degenerate_n);

  SummaryStats single = metrics_summary({a});
  CHECK(single.degenerate_n);
  CHECK(single.std_len == 0.0);

  CHECK_THROWS_AS(metrics_summary({}), std::invalid_argument);
}

TEST_CASE("fixed-trajectory selection respects the length window") {
  GridEnv env = crossmaze_env(9);
  NetSpec spec;
  spec.layer_sizes = {75, 8, 4};
  spec.recurrent = RecurrentSpec{8, 8};
  Actor actor(spec, init_params(spec, 6));
  TrajectoryPick pick = pick_fixed_trajectory(actor, env, 77, 1, 50);
  CHECK(pick.steps >= 1);
  CHECK(pick.steps <= 50);
  CHECK(pick.obs_flat.size() == static_cast<size_t>(pick.steps) * 75);

  CHECK_THROWS_AS(pick_fixed_trajectory(actor, env, 77, 51, 60, 5), std::runtime_error);
}
