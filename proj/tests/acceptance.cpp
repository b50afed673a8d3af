// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line. Training-based criteria run real experiments into a scratch
// directory; budgets follow the gridworld protocol defaults.
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "s2d/csv.hpp"
#include "s2d/runner.hpp"

using namespace s2d;
namespace fs = std::filesystem;

namespace {

fs::path scratch_root() {
  fs::path p = fs::temp_directory_path() / "s2d_acceptance";
  fs::create_directories(p);
  return p;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void report(int criterion, bool pass, const std::string& what, double seconds) {
  std::printf("[ACCEPT] C%-2d %s  %s  (%.1fs)\n", criterion, pass ? "PASS" : "FAIL",
              what.c_str(), seconds);
  std::fflush(stdout);
}

GridEnv frozen_random10(uint64_t instance) {
  EnvConfig c;
  c.kind = EnvKind::random10;
  c.seed = 1000 + instance;
  GridEnv env(c);
  env.reset(instance);
  env.freeze_goal(env.goal());
  return env;
}

RewardStage dense_stage_for(const GridEnv& env, int p, double gamma) {
  RewardStage st;
  st.shaping_enabled = true;
  st.gamma = gamma;
  st.potential = make_potential_spec(env.free_cells(), p, env.goal());
  return st;
}

double csv_value(const fs::path& csv, const std::string& key_col, const std::string& key,
                 const std::string& value_col) {
  CsvTable t = read_csv(csv);
  int kc = t.column(key_col), vc = t.column(value_col);
  for (const auto& row : t.rows)
    if (row[kc] == key) return std::stod(row[vc]);
  throw std::runtime_error("csv_value: key not found: " + key + " in " + csv.string());
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ExperimentConfig config_from(const std::string& text) {
  return bind_experiment_config(parse_config_text(text, "acceptance"));
}

std::string fixed4_dqn_study(const fs::path& out, const std::string& baselines, long budget,
                             const std::string& seeds) {
  return "[env]\nkind = fixed4\n\n[agent]\nalgo = dqn\n\n[curriculum]\nbaselines = " +
         baselines + "\np = 1\ntransitions = 200\nunit = episodes\n\n[run]\nseeds = " + seeds +
         "\nbudget = " + std::to_string(budget) +
         "\nbudget_unit = episodes\neval_episodes = 10\ncheckpoint_every_steps = 2000\n" +
         "out_dir = " + out.string() + "\n\n[analyses]\nheatmap = on\n";
}

std::string random10_ppo_study(const fs::path& out, const std::string& baselines,
                               const std::string& seeds, long budget, long t1) {
  return "[env]\nkind = random10\n\n[agent]\nalgo = ppo\n\n[curriculum]\nbaselines = " +
         baselines + "\np = 1\ntransitions = " + std::to_string(t1) +
         "\nunit = steps\n\n[run]\nseeds = " + seeds + "\nbudget = " + std::to_string(budget) +
         "\nbudget_unit = steps\neval_episodes = 10\ncheckpoint_every_steps = 20000\n" +
         "out_dir = " + out.string() + "\n\n[analyses]\nsharpness = on\n";
}

std::string crossmaze_ppo_study(const fs::path& out, const std::string& baselines,
                                const std::string& seeds, long budget, long t1) {
  return "[env]\nkind = crossmaze\ntrain_goals = 0,1\n\n[agent]\nalgo = ppo\n\n"
         "[curriculum]\nbaselines = " +
         baselines + "\np = 1\ntransitions = " + std::to_string(t1) +
         "\nunit = steps\n\n[run]\nseeds = " + seeds + "\nbudget = " + std::to_string(budget) +
         "\nbudget_unit = steps\neval_episodes = 20\ncheckpoint_every_steps = 20000\n" +
         "out_dir = " + out.string() + "\n\n[analyses]\nheatmap = on\n";
}

double mean_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  return m / static_cast<double>(v.size());
}

double ci95_halfwidth(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  double sd = std::sqrt(var / (v.size() - 1.0));
  return 1.96 * sd / std::sqrt(static_cast<double>(v.size()));
}

}  // namespace

TEST_CASE("C1: PBRS invariance on fixed4 and five frozen random10 instances") {
  Timer timer;
  bool pass = true;
  std::vector<GridEnv> envs;
  envs.emplace_back(EnvConfig{});
  for (uint64_t i = 0; i < 5; ++i) envs.push_back(frozen_random10(i));

  for (GridEnv& env : envs) {
    MdpTable base = env.enumerate_states();
    for (int p : {1, 2}) {
      for (double gamma : {0.9, 0.99}) {
        RewardStage dense = dense_stage_for(env, p, gamma);
        StageMdp shaped = build_stage_mdp(env, dense);
        QTable qb = value_iteration(base, gamma, 1e-12);
        QTable qs = value_iteration(shaped.mdp, gamma, 1e-12);
        auto sb = optimal_action_sets(qb);
        auto ss = optimal_action_sets(qs);
        for (int s = 0; s < base.state_count; ++s) {
          if (sb[s] != ss[s]) pass = false;
          if (base.terminal[s]) continue;  // absorbing rows are zero by convention
          double phi = potential(*dense.potential, env.free_cells()[s]);
          for (int a = 0; a < base.action_count; ++a)
            if (std::abs(qs.q(s, a) - (qb.q(s, a) - phi)) > 1e-8) pass = false;
        }
      }
    }
  }
  double secs = timer.seconds();
  pass = pass && secs < 5.0;
  report(1, pass, "PBRS optimal sets identical, Q offset -phi within 1e-8", secs);
  CHECK(pass);
}

TEST_CASE("C2: telescoping identity over 1000 random trajectories per environment") {
  Timer timer;
  bool pass = true;
  Rng rng(424242);
  for (EnvKind kind : {EnvKind::fixed4, EnvKind::random10, EnvKind::crossmaze}) {
    EnvConfig c;
    c.kind = kind;
    c.seed = 99;
    GridEnv env(c);
    int per_gamma = 334;  // >= 1000 per env across the three gammas
    for (double gamma : {0.9, 0.99, 1.0}) {
      for (int ep = 0; ep < per_gamma; ++ep) {
        env.reset(ep);
        RewardStage st = dense_stage_for(env, 1, gamma);
        GridPos s0 = env.agent();
        double sum = 0.0, disc = 1.0;
        bool done = false;
        while (!done) {
          GridPos prev = env.agent();
          GridEnv::StepResult sr = env.step(static_cast<int>(rng.below(4)));
          done = sr.done;
          sum += disc * shaping_term(st, prev, env.agent(), done);
          disc *= gamma;
        }
        if (std::abs(sum + potential(*st.potential, s0)) >= 1e-9) pass = false;
      }
    }
  }
  double secs = timer.seconds();
  pass = pass && secs < 2.0;
  report(2, pass, "sum gamma^t F_t = -phi(s0) within 1e-9, all envs and gammas", secs);
  CHECK(pass);
}

TEST_CASE("C3: support nesting for every S2D preset; counterexample rejected") {
  Timer timer;
  bool pass = true;

  std::vector<GridEnv> envs;
  envs.emplace_back(EnvConfig{});
  envs.push_back(frozen_random10(3));
  {
    EnvConfig c;
    c.kind = EnvKind::crossmaze;
    GridEnv cm(c);
    cm.freeze_goal_index(1);
    envs.push_back(std::move(cm));
  }
  for (GridEnv& env : envs) {
    for (int p : {1, 2}) {
      RewardStage sparse;
      RewardStage dense = dense_stage_for(env, p, 0.99);
      Curriculum curr;
      curr.stages = {sparse, dense};
      curr.transitions = {100};
      S2dValidity v = validate_s2d(curr, env, 0.99, 1e-12);
      if (!v.valid || !v.support_nested[0]) pass = false;
    }
  }

  // crafted non-potential counterexample: +0.5 on "up" everywhere
  GridEnv env(EnvConfig{});
  StageMdp stage1;
  stage1.mdp = env.enumerate_states();
  stage1.support = support_set(env, RewardStage{});
  StageMdp stage2 = stage1;
  for (int s = 0; s < stage2.mdp.state_count; ++s)
    if (!stage2.mdp.terminal[s]) {
      stage2.mdp.reward[stage2.mdp.idx(s, kUp)] += 0.5;
      stage2.support.insert(s);
    }
  S2dValidity bad = validate_s2d_stages({stage1, stage2}, 0.99, 1e-12);
  if (bad.valid) pass = false;

  double secs = timer.seconds();
  pass = pass && secs < 1.0;
  report(3, pass, "S2D presets nest supports; non-potential bonus curriculum rejected", secs);
  CHECK(pass);
}

TEST_CASE("C4: exact gradients match central finite differences over 20 nets") {
  Timer timer;
  bool pass = true;
  const double h = 1e-5;

  auto fd = [&](const std::function<double(const ParamVector&)>& loss, ParamVector p) {
    ParamVector g(p.size());
    for (size_t i = 0; i < p.size(); ++i) {
      double orig = p[i];
      p[i] = orig + h;
      double up = loss(p);
      p[i] = orig - h;
      double down = loss(p);
      p[i] = orig;
      g[i] = (up - down) / (2 * h);
    }
    return g;
  };
  auto rel = [](const ParamVector& a, const ParamVector& b) {
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
      worst = std::max(worst,
                       std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), 1e-6}));
    return worst;
  };

  std::vector<NetSpec> specs;
  {
    NetSpec s;
    s.layer_sizes = {4, 64, 64, 4};
    specs.push_back(s);  // Q / policy net
    s.layer_sizes = {4, 64, 64, 1};
    specs.push_back(s);  // value net
    s.layer_sizes = {3, 8, 5};
    specs.push_back(s);
    NetSpec r;
    r.layer_sizes = {75, 16, 4};
    r.recurrent = RecurrentSpec{12, 8};
    specs.push_back(r);  // crossmaze policy shape
    r.layer_sizes = {5, 6, 1};
    r.recurrent = RecurrentSpec{7, 8};
    specs.push_back(r);
  }
  int count = 0;
  for (size_t si = 0; si < specs.size(); ++si) {
    for (int rep = 0; rep < 4; ++rep, ++count) {
      const NetSpec& spec = specs[si];
      ParamVector params = init_params(spec, 100 * si + rep);
      Rng rng(500 + count);
      if (!spec.recurrent) {
        std::vector<double> input(3 * spec.input_size());
        for (double& v : input) v = rng.uniform(-1, 1);
        auto loss = [&](const ParamVector& p) {
          std::vector<double> out = forward(spec, p, input, 3, nullptr);
          double l = 0;
          for (double v : out) l += 0.5 * v * v;
          return l;
        };
        ForwardCache cache;
        std::vector<double> out = forward(spec, params, input, 3, &cache);
        if (rel(backward(spec, params, cache, out), fd(loss, params)) >= 1e-4) pass = false;
      } else {
        int steps = 6;  // within the truncation window: truncated grad is exact
        std::vector<double> obs(static_cast<size_t>(steps) * spec.input_size());
        for (double& v : obs) v = rng.uniform(-1, 1);
        auto loss = [&](const ParamVector& p) {
          RnnForwardResult f = rnn_forward(spec, p, obs, steps, nullptr);
          double l = 0;
          for (double v : f.outputs) l += 0.5 * v * v;
          return l;
        };
        RnnCache cache;
        RnnForwardResult f = rnn_forward(spec, params, obs, steps, &cache);
        if (rel(rnn_backward(spec, params, cache, f.outputs), fd(loss, params)) >= 1e-4)
          pass = false;
      }
    }
  }
  double secs = timer.seconds();
  pass = pass && count == 20 && secs < 10.0;
  report(4, pass, "max relative gradient error < 1e-4 on 20 dense/recurrent nets", secs);
  CHECK(pass);
}

TEST_CASE("C5: sharpness oracle exact on the quadratic") {
  Timer timer;
  bool pass = true;
  const double rho = 0.02;
  for (double lambda : {0.1, 1.0, 10.0}) {
    ParamVector w(20);
    Rng rng(17);
    for (double& v : w) v = rng.uniform(-2, 2);
    LossFn loss = [lambda](const ParamVector& p) {
      double s = 0;
      for (double v : p) s += v * v;
      return 0.5 * lambda * s;
    };
    GradFn grad = [lambda](const ParamVector& p) {
      ParamVector g(p.size());
      for (size_t i = 0; i < p.size(); ++i) g[i] = lambda * p[i];
      return g;
    };
    SharpnessReport rep = sharpness(loss, grad, w, rho);
    double norm = 0;
    for (double v : w) norm += v * v;
    norm = std::sqrt(norm);
    if (std::abs(rep.sharpness - (lambda * rho * norm + 0.5 * lambda * rho * rho)) > 1e-6)
      pass = false;
  }
  double secs = timer.seconds();
  pass = pass && secs < 1.0;
  report(5, pass, "quadratic sharpness = lambda*rho*|w| + lambda*rho^2/2 within 1e-6", secs);
  CHECK(pass);
}

TEST_CASE("C6: landscape contract on a 41x41 grid over a batch-128 TD loss") {
  Timer timer;
  bool pass = true;

  NetSpec spec;
  spec.layer_sizes = {4, 64, 64, 4};
  ParamVector theta = init_params(spec, 8);
  std::vector<DqnFrozenItem> items(128);
  Rng rng(9);
  for (DqnFrozenItem& it : items) {
    it.obs = {rng.uniform01(), rng.uniform01(), rng.uniform01(), rng.uniform01()};
    it.next_obs = {rng.uniform01(), rng.uniform01(), rng.uniform01(), rng.uniform01()};
    it.action = static_cast<int>(rng.below(4));
    it.reward[0] = rng.uniform(-1, 1);
    it.done = rng.uniform01() < 0.1;
  }
  LossFn loss = [&](const ParamVector& p) {
    return dqn_batch_loss(spec, p, items, 0, 0.99, theta);
  };

  std::vector<double> axes = default_axes();
  if (axes.size() != 41 || axes.front() != -10.0 || axes.back() != 10.0) pass = false;

  DirectionPair dirs = make_directions(theta.size(), 2024);
  double nx = 0, ny = 0, xy = 0;
  for (size_t i = 0; i < theta.size(); ++i) {
    nx += dirs.x[i] * dirs.x[i];
    ny += dirs.y[i] * dirs.y[i];
    xy += dirs.x[i] * dirs.y[i];
  }
  if (std::abs(std::sqrt(nx) - 1) > 1e-10 || std::abs(std::sqrt(ny) - 1) > 1e-10 ||
      std::abs(xy) > 1e-10)
    pass = false;

  LandscapeGrid grid = loss_grid(loss, theta, dirs, axes, axes);
  if (grid.at(20, 20) != grid.base_loss) pass = false;

  DirectionPair mirrored = dirs;
  for (double& v : mirrored.x) v = -v;
  LandscapeGrid grid2 = loss_grid(loss, theta, mirrored, axes, axes);
  for (size_t i = 0; i < 41 && pass; ++i)
    for (size_t j = 0; j < 41; ++j)
      if (grid.at(i, j) != grid2.at(40 - i, j)) {
        pass = false;
        break;
      }

  double secs = timer.seconds();
  pass = pass && secs < 30.0;
  report(6, pass, "grid center bit-equal, orthonormal dirs, reflection equivariance", secs);
  CHECK(pass);
}

TEST_CASE("C7: fixed4 DQN reaches the oracle-optimal 6-step policy under every preset") {
  Timer timer;
  fs::path out = scratch_root() / "c7_fixed4_dqn";
  fs::remove_all(out);
  ExperimentConfig cfg = config_from(
      fixed4_dqn_study(out, "only_sparse,only_dense,s2d,d2s", 1000, "1,2,3,4,5"));
  std::vector<RunOutcome> outcomes = run_experiment(cfg, "", true, 0);

  bool pass = true;
  std::map<std::string, int> seeds_ok;
  for (const RunOutcome& oc : outcomes) {
    if (!oc.ok) {
      std::printf("  C7 run failed: %s\n", oc.error.c_str());
      pass = false;
      continue;
    }
    CsvTable eval = read_csv(oc.dir / "eval.csv");
    int c_len = eval.column("length"), c_succ = eval.column("success");
    int optimal = 0;
    for (const auto& row : eval.rows)
      if (row[c_succ] == "1" && std::stoi(row[c_len]) == 6) ++optimal;
    if (optimal >= 9) seeds_ok[oc.baseline] += 1;
  }
  for (const std::string& baseline : cfg.baselines) {
    std::printf("  C7 %-12s: %d/5 seeds optimal\n", baseline.c_str(), seeds_ok[baseline]);
    if (seeds_ok[baseline] < 4) pass = false;
  }

  // trained-policy trajectory analysis: the most frequent successful path in
  // the late training window is the oracle shortest path (7 positions)
  {
    std::vector<EpisodeRecord> recs = load_episode_records(outcomes[0].dir);
    std::vector<EpisodeRecord> late(recs.end() - std::min<size_t>(recs.size(), 300), recs.end());
    Heatmap hm = trajectory_heatmap(late, 4, 4);
    if (hm.most_frequent_path.size() != 7) {
      std::printf("  C7 most frequent path has %zu positions (want 7)\n",
                  hm.most_frequent_path.size());
      pass = false;
    }
  }

  report(7, pass, ">=9/10 greedy evals at 6 steps for >=4/5 seeds per preset", timer.seconds());
  CHECK(pass);
}

TEST_CASE("C8: random10 PPO S2D final-window success beats Only Sparse and D2S") {
  Timer timer;
  fs::path out = scratch_root() / "c8_random10_ppo";
  fs::remove_all(out);
  ExperimentConfig cfg = config_from(random10_ppo_study(
      out, "s2d,only_sparse,only_dense,d2s", "1,2,3,4,5", 100000, 5000));
  std::vector<RunOutcome> outcomes = run_experiment(cfg, "", true, 0);

  bool pass = true;
  std::map<std::string, std::vector<double>> success;
  for (const RunOutcome& oc : outcomes) {
    if (!oc.ok) {
      std::printf("  C8 run failed: %s\n", oc.error.c_str());
      pass = false;
      continue;
    }
    success[oc.baseline].push_back(
        csv_value(oc.dir / "summary.csv", "window", "final10", "success_rate"));
  }
  for (auto& [baseline, vals] : success) {
    std::printf("  C8 %-12s final10 success: mean %.3f (", baseline.c_str(), mean_of(vals));
    for (double v : vals) std::printf(" %.3f", v);
    std::printf(" )\n");
  }
  if (pass) {
    if (!(mean_of(success["s2d"]) >= mean_of(success["only_sparse"]))) pass = false;
    if (!(mean_of(success["s2d"]) >= mean_of(success["d2s"]))) pass = false;
  }
  report(8, pass, "mean(S2D) >= mean(Only Sparse) and >= mean(D2S), last-10% window",
         timer.seconds());
  CHECK(pass);
}

TEST_CASE("C9: sharpness trend S2D vs Only Dense (soft, warning on violation)") {
  Timer timer;
  fs::path out = scratch_root() / "c8_random10_ppo";  // reuses the C8 runs
  std::map<std::string, std::vector<double>> sharp;
  bool have_all = true;
  for (const std::string& baseline : {"s2d", "only_dense"}) {
    for (int seed = 1; seed <= 5; ++seed) {
      fs::path f = run_dir_for(out, baseline, seed) / "sharpness.csv";
      if (!fs::exists(f)) {
        have_all = false;
        continue;
      }
      CsvTable t = read_csv(f);
      sharp[baseline].push_back(std::stod(t.rows.at(0).at(t.column("sharpness"))));
    }
  }
  REQUIRE(have_all);
  double m_s2d = mean_of(sharp["s2d"]);
  double m_dense = mean_of(sharp["only_dense"]);
  std::printf("  C9 sharpness: S2D %.6g +- %.2g, Only Dense %.6g +- %.2g\n", m_s2d,
              ci95_halfwidth(sharp["s2d"]), m_dense, ci95_halfwidth(sharp["only_dense"]));
  bool trend = m_s2d <= m_dense;
  if (!trend) {
    // soft criterion: record a warning artifact instead of failing
    atomic_write(out / "acceptance_warning_c9.txt",
                 "sharpness trend violated: mean sharpness S2D = " + format_double(m_s2d) +
                     " > Only Dense = " + format_double(m_dense) + "\n");
  }
  report(9, true,
         trend ? "mean end-of-training sharpness S2D <= Only Dense"
               : "trend violated; warning artifact written (soft criterion)",
         timer.seconds());
  CHECK(true);
}

TEST_CASE("C10: analysis determinism and hand values") {
  Timer timer;
  bool pass = true;

  // frequencies sum to one and are rerun-identical
  EnvConfig fc;
  GridEnv env(fc);
  NetSpec spec;
  spec.layer_sizes = {4, 4};
  Actor uniform(spec, ParamVector(param_count(spec), 0.0));
  std::vector<double> f1 = action_frequencies(uniform, env, 5, 33);
  std::vector<double> f2 = action_frequencies(uniform, env, 5, 33);
  double sum = 0;
  for (double v : f1) sum += v;
  if (std::abs(sum - 1.0) >= 1e-9 || f1 != f2) pass = false;

  if (mean_pairwise_distance({{0.0, 0.0}, {3.0, 4.0}}) != 5.0) pass = false;

  // heatmap totals equal sum(length + 1) on a real run
  fs::path run = run_dir_for(scratch_root() / "c7_fixed4_dqn", "s2d", 1);
  REQUIRE(fs::exists(run / "metrics.csv"));
  std::vector<EpisodeRecord> recs = load_episode_records(run);
  long expected = 0;
  for (const EpisodeRecord& r : recs) expected += r.length + 1;
  Heatmap hm = trajectory_heatmap(recs, 4, 4);
  if (hm.total() != expected) pass = false;

  double secs = timer.seconds();
  pass = pass && secs < 10.0;
  report(10, pass, "frequency simplex + rerun-identical; distance hand case; heatmap totals",
         secs);
  CHECK(pass);
}

TEST_CASE("C11: crossmaze held-out goal, S2D eval length <= Only Sparse") {
  Timer timer;
  fs::path out = scratch_root() / "c11_crossmaze";
  fs::remove_all(out);
  ExperimentConfig cfg = config_from(
      crossmaze_ppo_study(out, "s2d,only_sparse", "1,2,3,4,5", 60000, 12000));
  std::vector<RunOutcome> outcomes = run_experiment(cfg, "", true, 0);

  bool pass = true;
  std::map<std::string, std::vector<double>> heldout_len;
  for (const RunOutcome& oc : outcomes) {
    if (!oc.ok) {
      std::printf("  C11 run failed: %s\n", oc.error.c_str());
      pass = false;
      continue;
    }
    CsvTable eval = read_csv(oc.dir / "eval.csv");
    int c_goal = eval.column("goal"), c_len = eval.column("length");
    double mean_len = 0;
    int n = 0;
    for (const auto& row : eval.rows)
      if (row[c_goal] == "2") {  // goal 2 held out of {0,1} training goals
        mean_len += std::stod(row[c_len]);
        ++n;
      }
    REQUIRE(n > 0);
    heldout_len[oc.baseline].push_back(mean_len / n);
  }
  for (auto& [baseline, vals] : heldout_len) {
    std::printf("  C11 %-12s held-out mean episode length: %.2f (", baseline.c_str(),
                mean_of(vals));
    for (double v : vals) std::printf(" %.1f", v);
    std::printf(" )\n");
  }
  if (pass && !(mean_of(heldout_len["s2d"]) <= mean_of(heldout_len["only_sparse"])))
    pass = false;
  report(11, pass, "held-out-goal mean eval length: S2D <= Only Sparse over 5 seeds",
         timer.seconds());
  CHECK(pass);
}

TEST_CASE("C12: end-to-end rerun produces byte-identical metrics and analysis CSVs") {
  Timer timer;
  fs::path out_a = scratch_root() / "c12_a";
  fs::path out_b = scratch_root() / "c12_b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);

  std::string text = fixed4_dqn_study(out_a, "s2d,only_sparse", 60, "1");
  ExperimentConfig cfg = config_from(text);
  run_experiment(cfg, "", true, 0);
  run_experiment(cfg, out_b, true, 0);

  bool pass = true;
  for (const std::string& baseline : {"s2d", "only_sparse"}) {
    for (const char* file : {"metrics.csv", "trajectories.csv", "eval.csv", "heatmap.csv",
                             "summary.csv", "policy_final.txt"}) {
      std::string a = read_file(run_dir_for(out_a, baseline, 1) / file);
      std::string b = read_file(run_dir_for(out_b, baseline, 1) / file);
      if (a.empty() || a != b) {
        std::printf("  C12 mismatch: %s/%s\n", baseline.c_str(), file);
        pass = false;
      }
    }
  }
  report(12, pass, "identical config run twice: byte-identical outputs", timer.seconds());
  CHECK(pass);
}
