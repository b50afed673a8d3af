#include "s2d/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <stdexcept>

#include "s2d/csv.hpp"
#include "s2d/rng.hpp"

namespace s2d {

DirectionPair make_directions(size_t dim, uint64_t seed) {
  if (dim < 2)
    throw std::invalid_argument("make_directions: dim must be >= 2 for an orthogonal pair");
  Rng rng(derive_seed(seed, "landscape-directions"));
  DirectionPair d;
  d.seed = seed;
  d.x.resize(dim);
  d.y.resize(dim);
  for (double& v : d.x) v = rng.normal();
  for (double& v : d.y) v = rng.normal();

  auto dot = [](const ParamVector& a, const ParamVector& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  double nx = std::sqrt(dot(d.x, d.x));
  for (double& v : d.x) v /= nx;
  double proj = dot(d.x, d.y);
  for (size_t i = 0; i < dim; ++i) d.y[i] -= proj * d.x[i];
  double ny = std::sqrt(dot(d.y, d.y));
  if (ny < 1e-300) throw std::runtime_error("make_directions: degenerate direction pair");
  for (double& v : d.y) v /= ny;
  return d;
}

std::vector<double> default_axes() {
  std::vector<double> axes(41);
  for (int i = 0; i < 41; ++i) axes[i] = -10.0 + 0.5 * i;
  return axes;
}

LandscapeGrid loss_grid(const LossFn& loss, const ParamVector& theta, const DirectionPair& dirs,
                        const std::vector<double>& alphas, const std::vector<double>& betas) {
  if (dirs.x.size() != theta.size() || dirs.y.size() != theta.size())
    throw std::invalid_argument("loss_grid: direction dimension mismatch");
  bool has_zero = false;
  for (double a : alphas)
    for (double b : betas)
      if (a == 0.0 && b == 0.0) has_zero = true;
  if (!has_zero) throw std::invalid_argument("loss_grid: axes must contain the origin");

  LandscapeGrid grid;
  grid.alphas = alphas;
  grid.betas = betas;
  grid.losses.assign(alphas.size() * betas.size(), 0.0);
  grid.overflow.assign(alphas.size() * betas.size(), 0);
  grid.base_loss = loss(theta);

  ParamVector perturbed(theta.size());
  for (size_t i = 0; i < alphas.size(); ++i) {
    for (size_t j = 0; j < betas.size(); ++j) {
      double a = alphas[i], b = betas[j];
      double v;
      if (a == 0.0 && b == 0.0) {
        v = loss(theta);  // same code path and input as base_loss: bit-equal
      } else {
        for (size_t k = 0; k < theta.size(); ++k)
          perturbed[k] = theta[k] + a * dirs.x[k] + b * dirs.y[k];
        v = loss(perturbed);
      }
      size_t idx = i * betas.size() + j;
      grid.losses[idx] = v;
      if (!std::isfinite(v)) grid.overflow[idx] = 1;
    }
  }
  return grid;
}

SharpnessReport sharpness(const LossFn& loss, const GradFn& grad, const ParamVector& theta,
                          double rho) {
  if (rho <= 0.0) throw std::invalid_argument("sharpness: rho must be positive");
  SharpnessReport rep;
  rep.rho = rho;
  rep.loss_at_theta = loss(theta);
  ParamVector g = grad(theta);
  double norm = 0.0;
  for (double v : g) norm += v * v;
  norm = std::sqrt(norm);
  rep.gradient_norm = norm;
  if (norm < 1e-12) {
    rep.degenerate = true;
    rep.loss_at_perturbed = rep.loss_at_theta;
    rep.sharpness = 0.0;
    return rep;
  }
  ParamVector perturbed(theta.size());
  double scale = rho / norm;
  for (size_t i = 0; i < theta.size(); ++i) perturbed[i] = theta[i] + scale * g[i];
  rep.loss_at_perturbed = loss(perturbed);
  if (!std::isfinite(rep.loss_at_perturbed))
    throw std::runtime_error("sharpness: non-finite loss at the perturbed point");
  rep.sharpness = rep.loss_at_perturbed - rep.loss_at_theta;
  return rep;
}

// ---------------------------------------------------------------------------
// Run-directory protocol

namespace {

struct FrozenSet {
  bool is_ppo = false;
  NetSpec spec;
  double gamma = 0.99;
  double clip = 0.2;
  std::vector<DqnFrozenItem> dqn_items;
  std::vector<PpoFrozenSeq> ppo_seqs;
  uint64_t fingerprint = 0;
};

ExperimentConfig run_config_of(const std::filesystem::path& run_dir) {
  return load_experiment_config(run_dir / "run_config.txt");
}

// Stage definitions used for the paired landscapes: the first and, when
// present, second stage of the run's curriculum. Single-stage runs reuse
// their only stage for both definitions unless a fallback curriculum (from
// the paired run) supplies the missing one.
std::pair<RewardStage, RewardStage> stage_pair(const Curriculum& primary,
                                               const Curriculum* fallback) {
  RewardStage s1 = primary.stages.front();
  RewardStage s2 = primary.stages.size() > 1 ? primary.stages[1] : s1;
  if (primary.stages.size() == 1 && fallback && fallback->stages.size() > 1)
    s2 = (*fallback).stages[1];
  if (primary.stages.size() == 1 && fallback && fallback->stages.size() == 1 &&
      fallback->stages.front().shaping_enabled != s1.shaping_enabled)
    s2 = fallback->stages.front();
  return {s1, s2};
}

double reward_under(const RewardStage& stage, const GridEnv& env, GridPos s, GridPos s_next,
                    GridPos goal, double r_env, bool done, int p) {
  if (!stage.shaping_enabled) return r_env;
  RewardStage local = stage;
  int norm = local.potential ? local.potential->p : p;
  local.potential = make_potential_spec(env.free_cells(), norm, goal);
  return r_env + shaping_term(local, s, s_next, done);
}

uint64_t mix_fingerprint(uint64_t h, double v) {
  uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  Rng r(h ^ bits);
  return r.next_u64();
}

FrozenSet build_frozen_set(const std::filesystem::path& run_dir, const ExperimentConfig& cfg,
                           const RewardStage& def1, const RewardStage& def2, uint64_t batch_seed,
                           int batch_size, int rollout_episodes) {
  FrozenSet fs;
  fs.is_ppo = cfg.base.algo == Algo::ppo;
  fs.gamma = fs.is_ppo ? cfg.base.ppo.gamma : cfg.base.dqn.gamma;
  fs.clip = cfg.base.ppo.clip;

  GridEnv env(cfg.base.env);
  uint64_t fp = batch_seed;

  if (!fs.is_ppo) {
    CsvTable replay = read_csv(run_dir / "replay_final.csv");
    if (replay.rows.empty())
      throw std::runtime_error("cross-density: empty replay_final.csv in " + run_dir.string());
    int c_sx = replay.column("sx"), c_sy = replay.column("sy");
    int c_nx = replay.column("nsx"), c_ny = replay.column("nsy");
    int c_gx = replay.column("gx"), c_gy = replay.column("gy");
    int c_a = replay.column("action"), c_r = replay.column("r_env"), c_d = replay.column("done");
    Rng rng(derive_seed(batch_seed, "dqn-frozen-batch"));
    for (int i = 0; i < batch_size; ++i) {
      const auto& row = replay.rows[rng.below(replay.rows.size())];
      GridPos s{std::stoi(row[c_sx]), std::stoi(row[c_sy])};
      GridPos ns{std::stoi(row[c_nx]), std::stoi(row[c_ny])};
      GridPos goal{std::stoi(row[c_gx]), std::stoi(row[c_gy])};
      double r_env = std::stod(row[c_r]);
      bool done = row[c_d] == "1";
      env.freeze_goal(goal);
      DqnFrozenItem item;
      item.obs = env.observe_at(s).features;
      item.next_obs = env.observe_at(ns).features;
      item.action = std::stoi(row[c_a]);
      item.done = done;
      item.reward[0] = reward_under(def1, env, s, ns, goal, r_env, done, cfg.potential_p);
      item.reward[1] = reward_under(def2, env, s, ns, goal, r_env, done, cfg.potential_p);
      fp = mix_fingerprint(fp, item.reward[0] + item.reward[1] + item.action + r_env);
      fs.dqn_items.push_back(std::move(item));
    }
    Checkpoint final = load_checkpoint(run_dir / "policy_final.txt");
    fs.spec = final.spec;
    fs.fingerprint = fp;
    return fs;
  }

  // PPO: fresh frozen rollout set under the run's final policy, with
  // advantages computed from the run's final value net under each definition.
  Checkpoint policy = load_checkpoint(run_dir / "policy_final.txt");
  Checkpoint value = load_checkpoint(run_dir / "value_final.txt");
  fs.spec = policy.spec;
  Actor actor(policy.spec, policy.params);
  Rng act_rng(derive_seed(batch_seed, "frozen-rollout-act"));

  std::vector<double> all_adv[2];
  for (int e = 0; e < rollout_episodes; ++e) {
    Observation obs = env.reset(derive_seed(batch_seed, "frozen-rollout-episode", e));
    actor.begin_episode();
    PpoFrozenSeq seq;
    std::vector<double> r1, r2;
    std::vector<bool> done_flags;
    bool done = false;
    while (!done) {
      seq.obs_flat.insert(seq.obs_flat.end(), obs.features.begin(), obs.features.end());
      GridPos prev = env.agent();
      int action = actor.act(obs.features, ActMode::sample, 0.0, act_rng);
      GridEnv::StepResult sr = env.step(action);
      done = sr.done;
      seq.actions.push_back(action);
      r1.push_back(reward_under(def1, env, prev, env.agent(), env.goal(), sr.reward_env, done,
                                cfg.potential_p));
      r2.push_back(reward_under(def2, env, prev, env.agent(), env.goal(), sr.reward_env, done,
                                cfg.potential_p));
      done_flags.push_back(done);
      obs = sr.obs;
    }
    seq.steps = static_cast<int>(seq.actions.size());

    // logp_old from a replay through the final policy (sequence-exact for
    // recurrent policies).
    std::vector<double> logits =
        policy.spec.recurrent
            ? rnn_forward(policy.spec, policy.params, seq.obs_flat, seq.steps, nullptr).outputs
            : forward(policy.spec, policy.params, seq.obs_flat, seq.steps, nullptr);
    int na = policy.spec.output_size();
    for (int t = 0; t < seq.steps; ++t) {
      std::vector<double> lg(logits.begin() + static_cast<size_t>(t) * na,
                             logits.begin() + static_cast<size_t>(t + 1) * na);
      seq.logp_old.push_back(softmax_logp(lg, seq.actions[t]));
    }

    std::vector<double> values =
        value.spec.recurrent
            ? rnn_forward(value.spec, value.params, seq.obs_flat, seq.steps, nullptr).outputs
            : forward(value.spec, value.params, seq.obs_flat, seq.steps, nullptr);
    values.push_back(0.0);
    GaeResult g1 = gae(r1, values, done_flags, cfg.base.ppo.gamma, cfg.base.ppo.gae_lambda);
    GaeResult g2 = gae(r2, values, done_flags, cfg.base.ppo.gamma, cfg.base.ppo.gae_lambda);
    seq.adv[0] = g1.advantages;
    seq.adv[1] = g2.advantages;
    all_adv[0].insert(all_adv[0].end(), g1.advantages.begin(), g1.advantages.end());
    all_adv[1].insert(all_adv[1].end(), g2.advantages.begin(), g2.advantages.end());
    for (double v : seq.logp_old) fp = mix_fingerprint(fp, v);
    fs.ppo_seqs.push_back(std::move(seq));
  }

  // Normalize advantages per definition, matching the training-loss convention.
  for (int which = 0; which < 2; ++which) {
    normalize_advantages(all_adv[which]);
    size_t k = 0;
    for (PpoFrozenSeq& seq : fs.ppo_seqs)
      for (double& a : seq.adv[which]) a = all_adv[which][k++];
  }
  fs.fingerprint = fp;
  return fs;
}

RunLossContext context_from(const FrozenSet& fs, int which) {
  RunLossContext ctx;
  ctx.spec = fs.spec;
  ctx.batch_fingerprint = fs.fingerprint;
  if (fs.is_ppo) {
    auto seqs = std::make_shared<std::vector<PpoFrozenSeq>>(fs.ppo_seqs);
    NetSpec spec = fs.spec;
    double clip = fs.clip;
    ctx.bind_loss = [seqs, spec, clip, which](const ParamVector&) -> LossFn {
      return [seqs, spec, clip, which](const ParamVector& theta) {
        return ppo_surrogate_loss(spec, theta, *seqs, which, clip);
      };
    };
    ctx.bind_grad = [seqs, spec, clip, which](const ParamVector&) -> GradFn {
      return [seqs, spec, clip, which](const ParamVector& theta) {
        return ppo_surrogate_grad(spec, theta, *seqs, which, clip);
      };
    };
  } else {
    auto items = std::make_shared<std::vector<DqnFrozenItem>>(fs.dqn_items);
    NetSpec spec = fs.spec;
    double gamma = fs.gamma;
    ctx.bind_loss = [items, spec, gamma, which](const ParamVector& center) -> LossFn {
      ParamVector target = center;
      return [items, spec, gamma, which, target](const ParamVector& theta) {
        return dqn_batch_loss(spec, theta, *items, which, gamma, target);
      };
    };
    ctx.bind_grad = [items, spec, gamma, which](const ParamVector& center) -> GradFn {
      ParamVector target = center;
      return [items, spec, gamma, which, target](const ParamVector& theta) {
        return dqn_batch_grad(spec, theta, *items, which, gamma, target);
      };
    };
  }
  return ctx;
}

}  // namespace

std::vector<long> list_checkpoint_steps(const std::filesystem::path& run_dir) {
  std::vector<long> steps;
  if (!std::filesystem::exists(run_dir)) return steps;
  for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("ckpt_", 0) == 0 && name.size() > 9 &&
        name.substr(name.size() - 4) == ".txt")
      steps.push_back(std::stol(name.substr(5, name.size() - 9)));
  }
  std::sort(steps.begin(), steps.end());
  return steps;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, long step) {
  return run_dir / ("ckpt_" + std::to_string(step) + ".txt");
}

std::vector<CrossDensityGrid> cross_density_protocol(const std::filesystem::path& run_a,
                                                     const std::filesystem::path& run_b,
                                                     const std::vector<long>& checkpoint_steps,
                                                     const CrossDensityOptions& opts) {
  ExperimentConfig cfg_a = run_config_of(run_a);
  ExperimentConfig cfg_b = run_config_of(run_b);

  Curriculum curr_a = make_curriculum(cfg_a, cfg_a.baselines.at(0));
  Curriculum curr_b = make_curriculum(cfg_b, cfg_b.baselines.at(0));
  auto [def1, def2] = stage_pair(curr_a, &curr_b);

  // Both runs must share the network spec for the shared directions.
  Checkpoint probe_a = load_checkpoint(run_a / "policy_final.txt");
  Checkpoint probe_b = load_checkpoint(run_b / "policy_final.txt");
  if (!(probe_a.spec == probe_b.spec))
    throw std::runtime_error("cross-density: network specs differ between runs");

  for (long step : checkpoint_steps) {
    for (const auto& dir : {run_a, run_b}) {
      if (!std::filesystem::exists(checkpoint_path(dir, step))) {
        std::string avail;
        for (long s : list_checkpoint_steps(dir)) avail += (avail.empty() ? "" : ",") +
                                                           std::to_string(s);
        throw std::runtime_error("cross-density: missing checkpoint " + std::to_string(step) +
                                 " in " + dir.string() + " (available: " + avail + ")");
      }
    }
  }

  // One shared frozen batch, sourced from run A (the reference run).
  FrozenSet frozen = build_frozen_set(run_a, cfg_a, def1, def2, opts.batch_seed, opts.batch_size,
                                      opts.rollout_episodes);
  DirectionPair dirs = make_directions(param_count(probe_a.spec), opts.direction_seed);

  std::vector<CrossDensityGrid> grids;
  for (long step : checkpoint_steps) {
    for (int which = 0; which < 2; ++which) {
      RunLossContext ctx = context_from(frozen, which);
      for (const auto& [label, dir] : {std::pair<std::string, std::filesystem::path>{"A", run_a},
                                       {"B", run_b}}) {
        Checkpoint ck = load_checkpoint(checkpoint_path(dir, step));
        if (!(ck.spec == probe_a.spec))
          throw std::runtime_error("cross-density: checkpoint spec mismatch in " + dir.string());
        LossFn loss = ctx.bind_loss(ck.params);
        CrossDensityGrid out;
        out.run_label = label;
        out.stage_def = which + 1;
        out.checkpoint_step = step;
        out.grid = loss_grid(loss, ck.params, dirs, opts.alphas, opts.betas);
        out.grid.checkpoint_step = step;
        out.grid.batch_fingerprint = frozen.fingerprint;
        grids.push_back(std::move(out));
      }
    }
  }
  return grids;
}

RunLossContext make_run_loss(const std::filesystem::path& run_dir, int stage_def,
                             uint64_t batch_seed, int batch_size, int rollout_episodes) {
  ExperimentConfig cfg = run_config_of(run_dir);
  Curriculum curr = make_curriculum(cfg, cfg.baselines.at(0));
  auto [def1, def2] = stage_pair(curr, nullptr);
  FrozenSet frozen =
      build_frozen_set(run_dir, cfg, def1, def2, batch_seed, batch_size, rollout_episodes);
  return context_from(frozen, stage_def == 1 ? 0 : 1);
}

SharpnessReport run_sharpness(const std::filesystem::path& run_dir, double rho,
                              uint64_t batch_seed, int batch_size, int rollout_episodes) {
  ExperimentConfig cfg = run_config_of(run_dir);
  Curriculum curr = make_curriculum(cfg, cfg.baselines.at(0));
  // End-of-training sharpness: measured under the final stage's reward
  // definition.
  int final_def = curr.stages.size() > 1 ? 2 : 1;
  RunLossContext ctx = make_run_loss(run_dir, final_def, batch_seed, batch_size, rollout_episodes);
  Checkpoint final = load_checkpoint(run_dir / "policy_final.txt");
  return sharpness(ctx.bind_loss(final.params), ctx.bind_grad(final.params), final.params, rho);
}

void write_landscape_csv(const std::filesystem::path& path, const LandscapeGrid& grid) {
  CsvWriter w("checkpoint_step,alpha,beta,loss,overflow_flag");
  for (size_t i = 0; i < grid.alphas.size(); ++i)
    for (size_t j = 0; j < grid.betas.size(); ++j) {
      size_t idx = i * grid.betas.size() + j;
      w.raw_row(std::to_string(grid.checkpoint_step) + "," + format_double(grid.alphas[i]) + "," +
                format_double(grid.betas[j]) + "," + format_double(grid.losses[idx]) + "," +
                std::to_string(static_cast<int>(grid.overflow[idx])));
    }
  w.save(path);
}

}  // namespace s2d
