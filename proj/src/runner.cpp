#include "s2d/runner.hpp"

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <thread>

#include "s2d/csv.hpp"
#include "s2d/svg.hpp"

namespace s2d {

namespace {

std::string bool01(bool b) { return b ? "1" : "0"; }

double gamma_of(const ExperimentConfig& cfg) {
  return cfg.base.algo == Algo::dqn ? cfg.base.dqn.gamma : cfg.base.ppo.gamma;
}

void write_metrics_csv(const std::filesystem::path& path, const TrainResult& tr) {
  CsvWriter w("episode,end_step,length,return_env,return_shaped,success,stage");
  for (const EpisodeMetric& m : tr.metrics)
    w.raw_row(std::to_string(m.episode) + "," + std::to_string(m.end_step) + "," +
              std::to_string(m.length) + "," + format_double(m.return_env) + "," +
              format_double(m.return_shaped) + "," + bool01(m.success) + "," +
              std::to_string(m.stage));
  w.save(path);
}

void write_trajectories_csv(const std::filesystem::path& path, const TrainResult& tr) {
  CsvWriter w("episode,t,x,y");
  for (size_t e = 0; e < tr.trajectories.size(); ++e)
    for (size_t t = 0; t < tr.trajectories[e].size(); ++t)
      w.raw_row(std::to_string(e) + "," + std::to_string(t) + "," +
                std::to_string(tr.trajectories[e][t].x) + "," +
                std::to_string(tr.trajectories[e][t].y));
  w.save(path);
}

void write_eval_csv(const std::filesystem::path& path, const TrainResult& tr) {
  CsvWriter w("goal,episode,length,success,return_env");
  for (const EvalRecord& r : tr.eval)
    w.raw_row(std::to_string(r.goal) + "," + std::to_string(r.episode) + "," +
              std::to_string(r.length) + "," + bool01(r.success) + "," +
              format_double(r.return_env));
  w.save(path);
}

void write_replay_csv(const std::filesystem::path& path, const TrainResult& tr) {
  CsvWriter w("sx,sy,nsx,nsy,gx,gy,action,r_env,done");
  for (const Transition& t : tr.final_replay)
    w.raw_row(std::to_string(t.s.x) + "," + std::to_string(t.s.y) + "," +
              std::to_string(t.s_next.x) + "," + std::to_string(t.s_next.y) + "," +
              std::to_string(t.goal.x) + "," + std::to_string(t.goal.y) + "," +
              std::to_string(t.action) + "," + format_double(t.reward_env) + "," +
              bool01(t.done));
  w.save(path);
}

void write_ckpt_index(const std::filesystem::path& run_dir, const TrainResult& tr) {
  CsvWriter w("global_step,stage,rng_fingerprint,file");
  for (const CheckpointBundle& c : tr.checkpoints)
    w.raw_row(std::to_string(c.global_step) + "," + std::to_string(c.stage) + "," +
              std::to_string(c.rng_fingerprint) + ",ckpt_" + std::to_string(c.global_step) +
              ".txt");
  w.save(run_dir / "ckpt_index.csv");
}

void write_summary_csv(const std::filesystem::path& path, const ExperimentConfig& cfg,
                       const std::string& baseline, uint64_t seed, const TrainResult& tr) {
  std::vector<EpisodeRecord> all;
  for (size_t e = 0; e < tr.metrics.size(); ++e) {
    EpisodeRecord r;
    r.seed = seed;
    r.episode = tr.metrics[e].episode;
    r.length = tr.metrics[e].length;
    r.return_env = tr.metrics[e].return_env;
    r.return_shaped = tr.metrics[e].return_shaped;
    r.success = tr.metrics[e].success;
    all.push_back(std::move(r));
  }
  std::vector<EpisodeRecord> final10;
  long threshold = cfg.base.budget * 9 / 10;
  for (size_t e = 0; e < all.size(); ++e) {
    bool in_window = cfg.base.budget_unit == UnitKind::episodes
                         ? tr.metrics[e].episode >= threshold
                         : tr.metrics[e].end_step > threshold;
    if (in_window) final10.push_back(all[e]);
  }
  if (final10.empty() && !all.empty()) final10.push_back(all.back());

  CsvWriter w("run_id,seed,window,success_rate,mean_len,std_len,mean_return,std_return");
  auto emit = [&](const std::string& window, const std::vector<EpisodeRecord>& recs) {
    if (recs.empty()) return;
    SummaryStats s = metrics_summary(recs);
    w.raw_row(baseline + "," + std::to_string(seed) + "," + window + "," +
              format_double(s.success_rate) + "," + format_double(s.mean_len) + "," +
              format_double(s.std_len) + "," + format_double(s.mean_return) + "," +
              format_double(s.std_return));
  };
  emit("all", all);
  emit("final10", final10);
  w.save(path);
}

int env_workers_override() {
  const char* v = std::getenv("S2D_WORKERS");
  if (!v) return 0;
  int n = std::atoi(v);
  return n > 0 ? n : 0;
}

}  // namespace

std::filesystem::path resolve_out_dir(const ExperimentConfig& cfg,
                                      const std::filesystem::path& out_override) {
  std::filesystem::path out = out_override.empty() ? cfg.out_dir : out_override;
  const char* root = std::getenv("S2D_OUT_ROOT");
  if (root && *root && out.is_relative()) return std::filesystem::path(root) / out;
  return out;
}

std::filesystem::path run_dir_for(const std::filesystem::path& out_dir,
                                  const std::string& baseline, uint64_t seed) {
  return out_dir / baseline / std::to_string(seed);
}

std::string emit_run_config(const ExperimentConfig& cfg, const std::string& baseline,
                            uint64_t seed) {
  std::ostringstream o;
  o << "# resolved single-run configuration\n";
  o << "[env]\n";
  o << "kind = " << to_string(cfg.base.env.kind) << "\n";
  o << "max_steps = " << cfg.base.env.max_steps << "\n";
  o << "living_penalty = " << format_double(cfg.base.env.living_penalty) << "\n";
  o << "goal_bonus = " << format_double(cfg.base.env.goal_bonus) << "\n";
  o << "goal_radius_p1 = " << cfg.base.env.goal_radius_p1 << "\n";
  o << "seed = " << cfg.base.env.seed << "\n";
  if (cfg.base.env.kind == EnvKind::crossmaze) {
    o << "arm_length = " << cfg.base.env.arm_length << "\n";
    o << "view_radius = " << cfg.base.env.view_radius << "\n";
    o << "train_goals = ";
    bool first = true;
    for (int g : cfg.base.env.train_goals) {
      if (!first) o << ",";
      o << g;
      first = false;
    }
    o << "\n";
  }
  o << "\n[agent]\n";
  o << "algo = " << (cfg.base.algo == Algo::dqn ? "dqn" : "ppo") << "\n";
  if (cfg.base.algo == Algo::dqn) {
    const DqnConfig& d = cfg.base.dqn;
    o << "\n[agent.dqn]\n";
    o << "lr = " << format_double(d.lr) << "\n";
    o << "gamma = " << format_double(d.gamma) << "\n";
    o << "batch = " << d.batch << "\n";
    o << "replay_capacity = " << d.replay_capacity << "\n";
    o << "target_sync = " << d.target_sync << "\n";
    o << "eps_start = " << format_double(d.eps_start) << "\n";
    o << "eps_end = " << format_double(d.eps_end) << "\n";
    o << "hidden = ";
    for (size_t i = 0; i < d.hidden.size(); ++i) o << (i ? "," : "") << d.hidden[i];
    o << "\n";
  } else {
    const PpoConfig& p = cfg.base.ppo;
    o << "\n[agent.ppo]\n";
    o << "lr = " << format_double(p.lr) << "\n";
    o << "gamma = " << format_double(p.gamma) << "\n";
    o << "clip = " << format_double(p.clip) << "\n";
    o << "gae_lambda = " << format_double(p.gae_lambda) << "\n";
    o << "entropy_coef = " << format_double(p.entropy_coef) << "\n";
    o << "value_coef = " << format_double(p.value_coef) << "\n";
    o << "update_every_episodes = " << p.update_every_episodes << "\n";
    o << "epochs = " << p.epochs << "\n";
    o << "minibatch = " << p.minibatch << "\n";
    o << "hidden = ";
    for (size_t i = 0; i < p.hidden.size(); ++i) o << (i ? "," : "") << p.hidden[i];
    o << "\n";
    o << "rnn_truncation = " << p.rnn_truncation << "\n";
  }
  o << "\n[curriculum]\n";
  o << "baselines = " << baseline << "\n";
  o << "p = " << cfg.potential_p << "\n";
  if (cfg.gate_radius) o << "gate_radius = " << format_double(*cfg.gate_radius) << "\n";
  if (cfg.progress_bonus) o << "progress_bonus = on\n";
  o << "unit = " << (cfg.base.transition_unit == UnitKind::episodes ? "episodes" : "steps")
    << "\n";
  if (!cfg.transitions.empty()) {
    o << "transitions = ";
    for (size_t i = 0; i < cfg.transitions.size(); ++i) o << (i ? "," : "") << cfg.transitions[i];
    o << "\n";
  }
  for (size_t k = 0; k < cfg.custom_stages.size(); ++k) {
    const RewardStage& st = cfg.custom_stages[k];
    o << "\n[curriculum.stage" << (k + 1) << "]\n";
    o << "shaping = " << (st.shaping_enabled ? "on" : "off") << "\n";
    o << "gamma = " << format_double(st.gamma) << "\n";
    if (st.potential) o << "p = " << st.potential->p << "\n";
    if (st.gate_radius) o << "gate_radius = " << format_double(*st.gate_radius) << "\n";
    if (st.progress_bonus_mode) o << "progress_bonus = on\n";
  }
  o << "\n[run]\n";
  o << "seeds = " << seed << "\n";
  o << "budget = " << cfg.base.budget << "\n";
  o << "budget_unit = " << (cfg.base.budget_unit == UnitKind::episodes ? "episodes" : "steps")
    << "\n";
  if (cfg.base.checkpoint_every > 0)
    o << "checkpoint_every_steps = " << cfg.base.checkpoint_every << "\n";
  if (!cfg.base.checkpoint_at.empty()) {
    o << "checkpoint_at_steps = ";
    for (size_t i = 0; i < cfg.base.checkpoint_at.size(); ++i)
      o << (i ? "," : "") << cfg.base.checkpoint_at[i];
    o << "\n";
  }
  o << "eval_episodes = " << cfg.base.eval_episodes << "\n";
  o << "out_dir = .\n";
  o << "\n[analyses]\n";
  o << "landscape = " << (cfg.analyses.landscape ? "on" : "off") << "\n";
  o << "sharpness = " << (cfg.analyses.sharpness ? "on" : "off") << "\n";
  o << "actions = " << (cfg.analyses.actions ? "on" : "off") << "\n";
  o << "features = " << (cfg.analyses.features ? "on" : "off") << "\n";
  o << "heatmap = " << (cfg.analyses.heatmap ? "on" : "off") << "\n";
  return o.str();
}

RunOutcome execute_single_run(const ExperimentConfig& cfg, const std::string& baseline,
                              uint64_t seed, const std::filesystem::path& run_dir) {
  RunOutcome outcome;
  outcome.baseline = baseline;
  outcome.seed = seed;
  outcome.dir = run_dir;
  try {
    std::filesystem::create_directories(run_dir);

    TrainConfig tc = cfg.base;
    tc.curriculum = make_curriculum(cfg, baseline);
    // Same master seed across baselines: paired runs share environment and
    // initialization streams, so reward schemes are the only difference.
    tc.master_seed = seed;
    TrainResult tr = train(tc);

    atomic_write(run_dir / "run_config.txt", emit_run_config(cfg, baseline, seed));
    write_metrics_csv(run_dir / "metrics.csv", tr);
    write_trajectories_csv(run_dir / "trajectories.csv", tr);
    write_eval_csv(run_dir / "eval.csv", tr);
    write_ckpt_index(run_dir, tr);
    for (const CheckpointBundle& c : tr.checkpoints)
      save_checkpoint(checkpoint_path(run_dir, c.global_step), tr.policy_spec, c.params);
    save_checkpoint(run_dir / "policy_final.txt", tr.policy_spec, tr.policy_params);
    if (cfg.base.algo == Algo::ppo)
      save_checkpoint(run_dir / "value_final.txt", tr.value_spec, tr.value_params);
    else
      write_replay_csv(run_dir / "replay_final.csv", tr);
    write_summary_csv(run_dir / "summary.csv", cfg, baseline, seed, tr);

    AnalyzeRequest req;
    req.actions = cfg.analyses.actions;
    req.features = cfg.analyses.features;
    req.heatmap = cfg.analyses.heatmap;
    req.sharpness = cfg.analyses.sharpness;
    analyze_run(run_dir, req);

    if (cfg.analyses.landscape) {
      // Final-checkpoint landscape under the run's first and last stage
      // definitions.
      Checkpoint final = load_checkpoint(run_dir / "policy_final.txt");
      DirectionPair dirs = make_directions(final.params.size(), 2024);
      Curriculum curr = make_curriculum(cfg, baseline);
      int defs = curr.stages.size() > 1 ? 2 : 1;
      for (int d = 1; d <= defs; ++d) {
        RunLossContext ctx = make_run_loss(run_dir, d);
        LandscapeGrid grid = loss_grid(ctx.bind_loss(final.params), final.params, dirs,
                                       default_axes(), default_axes());
        grid.checkpoint_step = tr.total_steps;
        grid.batch_fingerprint = ctx.batch_fingerprint;
        write_landscape_csv(run_dir / ("landscape_stage" + std::to_string(d) + ".csv"), grid);
      }
    }

    atomic_write(run_dir / "status.txt", "complete\n");
    outcome.ok = true;
  } catch (const std::exception& e) {
    outcome.ok = false;
    outcome.error = e.what();
  }
  return outcome;
}

std::vector<RunOutcome> run_experiment(const ExperimentConfig& cfg,
                                       const std::filesystem::path& out_override, bool force,
                                       int workers) {
  std::filesystem::path out_dir = resolve_out_dir(cfg, out_override);

  struct Job {
    std::string baseline;
    uint64_t seed;
    std::filesystem::path dir;
  };
  std::vector<Job> jobs;
  for (const std::string& baseline : cfg.baselines)
    for (uint64_t seed : cfg.seeds)
      jobs.push_back({baseline, seed, run_dir_for(out_dir, baseline, seed)});

  for (const Job& j : jobs) {
    if (std::filesystem::exists(j.dir)) {
      if (!force)
        throw std::runtime_error("run directory already exists (partial or complete): " +
                                 j.dir.string() + "; pass --force to overwrite");
      std::filesystem::remove_all(j.dir);
    }
  }

  if (workers <= 0) workers = env_workers_override();
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers <= 0) workers = 1;
  workers = std::min<int>(workers, static_cast<int>(jobs.size()));

  std::vector<RunOutcome> outcomes(jobs.size());
  std::atomic<size_t> next{0};
  auto worker_fn = [&] {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= jobs.size()) break;
      outcomes[i] = execute_single_run(cfg, jobs[i].baseline, jobs[i].seed, jobs[i].dir);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
  for (std::thread& t : pool) t.join();

  std::string manifest;
  manifest += "config_hash=" + cfg.config_hash + "\n";
  manifest += std::string("version=") + kVersionTag + "\n";
  for (const RunOutcome& oc : outcomes) {
    manifest += "run " + oc.baseline + " seed=" + std::to_string(oc.seed) +
                " status=" + (oc.ok ? "ok" : ("failed: " + oc.error)) + "\n";
  }
  std::filesystem::create_directories(out_dir);
  atomic_write(out_dir / "manifest.txt", manifest);
  return outcomes;
}

std::vector<EpisodeRecord> load_episode_records(const std::filesystem::path& run_dir) {
  CsvTable metrics = read_csv(run_dir / "metrics.csv");
  CsvTable traj = read_csv(run_dir / "trajectories.csv");
  ExperimentConfig cfg = load_experiment_config(run_dir / "run_config.txt");

  int m_ep = metrics.column("episode"), m_len = metrics.column("length");
  int m_re = metrics.column("return_env"), m_rs = metrics.column("return_shaped");
  int m_su = metrics.column("success");
  std::vector<EpisodeRecord> records(metrics.rows.size());
  for (size_t i = 0; i < metrics.rows.size(); ++i) {
    const auto& row = metrics.rows[i];
    records[i].seed = cfg.seeds.at(0);
    records[i].episode = std::stol(row[m_ep]);
    records[i].length = std::stoi(row[m_len]);
    records[i].return_env = std::stod(row[m_re]);
    records[i].return_shaped = std::stod(row[m_rs]);
    records[i].success = row[m_su] == "1";
  }
  int t_ep = traj.column("episode"), t_x = traj.column("x"), t_y = traj.column("y");
  for (const auto& row : traj.rows) {
    size_t e = static_cast<size_t>(std::stol(row[t_ep]));
    if (e < records.size())
      records[e].positions.push_back({std::stoi(row[t_x]), std::stoi(row[t_y])});
  }
  return records;
}

void write_trajectory_csv(const std::filesystem::path& path, const std::vector<double>& obs_flat,
                          int steps, int dim) {
  std::string header = "t";
  for (int i = 0; i < dim; ++i) header += ",f" + std::to_string(i);
  CsvWriter w(header);
  for (int t = 0; t < steps; ++t) {
    std::string row = std::to_string(t);
    for (int i = 0; i < dim; ++i)
      row += "," + format_double(obs_flat[static_cast<size_t>(t) * dim + i]);
    w.raw_row(row);
  }
  w.save(path);
}

TrajectoryPick load_trajectory_csv(const std::filesystem::path& path) {
  CsvTable t = read_csv(path);
  TrajectoryPick pick;
  pick.steps = static_cast<int>(t.rows.size());
  int dim = static_cast<int>(t.header.size()) - 1;
  for (const auto& row : t.rows)
    for (int i = 0; i < dim; ++i) pick.obs_flat.push_back(std::stod(row[i + 1]));
  return pick;
}

void analyze_run(const std::filesystem::path& run_dir, const AnalyzeRequest& req) {
  if (!req.actions && !req.features && !req.heatmap && !req.sharpness) return;
  ExperimentConfig cfg = load_experiment_config(run_dir / "run_config.txt");
  const std::string baseline = cfg.baselines.at(0);
  uint64_t seed = cfg.seeds.at(0);

  if (req.heatmap) {
    std::vector<EpisodeRecord> records = load_episode_records(run_dir);
    GridEnv probe(cfg.base.env);
    int dims = 1;
    for (GridPos p : probe.free_cells()) dims = std::max({dims, p.x + 1, p.y + 1});
    Heatmap hm = trajectory_heatmap(records, dims, dims);
    CsvWriter w("x,y,visits");
    for (int y = 0; y < hm.height; ++y)
      for (int x = 0; x < hm.width; ++x)
        w.raw_row(std::to_string(x) + "," + std::to_string(y) + "," +
                  std::to_string(hm.at(x, y)));
    w.save(run_dir / "heatmap.csv");
  }

  if (req.actions) {
    CsvWriter w("checkpoint_step,action_id,frequency");
    EnvConfig env_cfg = cfg.base.env;
    env_cfg.seed = derive_seed(seed ^ cfg.base.env.seed, "env");
    for (long step : list_checkpoint_steps(run_dir)) {
      Checkpoint ck = load_checkpoint(checkpoint_path(run_dir, step));
      Actor actor(ck.spec, ck.params);
      GridEnv env(env_cfg);
      std::vector<double> freq = action_frequencies(actor, env, req.action_episodes,
                                                    derive_seed(seed, "actions", step));
      for (size_t a = 0; a < freq.size(); ++a)
        w.raw_row(std::to_string(step) + "," + std::to_string(a) + "," + format_double(freq[a]));
    }
    w.save(run_dir / "actions.csv");
  }

  if (req.features) {
    Checkpoint final = load_checkpoint(run_dir / "policy_final.txt");
    if (!final.spec.recurrent)
      throw std::runtime_error("analyze --features: run's policy is not recurrent");
    TrajectoryPick pick;
    if (!req.trajectory_csv.empty()) {
      pick = load_trajectory_csv(req.trajectory_csv);
    } else {
      EnvConfig env_cfg = cfg.base.env;
      env_cfg.seed = derive_seed(seed ^ cfg.base.env.seed, "env");
      GridEnv env(env_cfg);
      Actor actor(final.spec, final.params);
      pick = pick_fixed_trajectory(actor, env, derive_seed(seed, "feature-traj"), 1,
                                   cfg.base.env.max_steps);
      write_trajectory_csv(run_dir / "trajectory.csv", pick.obs_flat, pick.steps,
                           final.spec.input_size());
    }
    std::vector<std::filesystem::path> ckpts;
    for (long step : list_checkpoint_steps(run_dir)) ckpts.push_back(checkpoint_path(run_dir, step));
    FeatureCurve curve = feature_mean_distance(ckpts, pick.obs_flat, pick.steps);
    CsvWriter w("checkpoint_step,mean_pairwise_distance");
    for (size_t i = 0; i < curve.checkpoint_steps.size(); ++i)
      w.raw_row(std::to_string(curve.checkpoint_steps[i]) + "," +
                format_double(curve.mean_distance[i]));
    w.save(run_dir / "features.csv");
  }

  if (req.sharpness) {
    SharpnessReport rep = run_sharpness(run_dir);
    long final_step = list_checkpoint_steps(run_dir).empty()
                          ? 0
                          : list_checkpoint_steps(run_dir).back();
    CsvWriter w("run_id,seed,checkpoint_step,rho,sharpness,gradient_norm,degenerate_flag");
    w.raw_row(baseline + "," + std::to_string(seed) + "," + std::to_string(final_step) + "," +
              format_double(rep.rho) + "," + format_double(rep.sharpness) + "," +
              format_double(rep.gradient_norm) + "," + bool01(rep.degenerate));
    w.save(run_dir / "sharpness.csv");
  }
}

void compare_landscapes(const std::filesystem::path& run_a, const std::filesystem::path& run_b,
                        const std::vector<long>& steps, const std::filesystem::path& out_dir,
                        const CrossDensityOptions& opts) {
  std::vector<CrossDensityGrid> grids = cross_density_protocol(run_a, run_b, steps, opts);
  std::filesystem::create_directories(out_dir);
  for (const CrossDensityGrid& g : grids) {
    std::string stem = "landscape_step" + std::to_string(g.checkpoint_step) + "_run" +
                       g.run_label + "_stage" + std::to_string(g.stage_def);
    write_landscape_csv(out_dir / (stem + ".csv"), g.grid);
    SvgStyle style;
    style.title = stem;
    render_svg(out_dir / (stem + ".csv"), out_dir / (stem + ".svg"), style);
  }
}

bool validate_curriculum_config(const ExperimentConfig& cfg, std::string& report) {
  std::ostringstream out;
  bool all_ok = true;
  EnvConfig env_cfg = cfg.base.env;
  GridEnv env(env_cfg);
  if (!env.goal_frozen()) {
    // Freeze a canonical goal so the environment is enumerable: random10 uses
    // the episode-0 goal, crossmaze its first training goal.
    if (cfg.base.env.kind == EnvKind::crossmaze) {
      env.freeze_goal_index(*cfg.base.env.train_goals.begin());
    } else {
      env.reset(0);
      env.freeze_goal(env.goal());
    }
  }
  for (const std::string& baseline : cfg.baselines) {
    Curriculum curr = make_curriculum(cfg, baseline);
    refresh_stage_potentials(curr, env);
    S2dValidity v = validate_s2d(curr, env, gamma_of(cfg), 1e-10);
    out << "baseline " << baseline << ": " << (v.valid ? "valid" : "INVALID") << "\n" << v.detail;
    if (!v.valid && (baseline == "s2d" || baseline == "custom")) all_ok = false;
  }
  report = out.str();
  return all_ok;
}

}  // namespace s2d
