#include "s2d/agents.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace s2d {

int select_action(const std::vector<double>& values, ActMode mode, double eps, Rng& rng) {
  int n = static_cast<int>(values.size());
  auto greedy = [&] {
    int best = 0;
    for (int a = 1; a < n; ++a)
      if (values[a] > values[best]) best = a;
    return best;
  };
  switch (mode) {
    case ActMode::greedy:
      return greedy();
    case ActMode::epsilon:
      if (rng.uniform01() < eps) return static_cast<int>(rng.below(n));
      return greedy();
    case ActMode::sample: {
      std::vector<double> p = softmax(values);
      double u = rng.uniform01();
      double cum = 0.0;
      for (int a = 0; a < n; ++a) {
        cum += p[a];
        if (u < cum) return a;
      }
      return n - 1;
    }
  }
  return 0;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

double softmax_entropy(const std::vector<double>& logits) {
  std::vector<double> p = softmax(logits);
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double softmax_logp(const std::vector<double>& logits, int action) {
  double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  return logits[action] - m - std::log(z);
}

void DqnConfig::validate() const {
  if (batch <= 0 || replay_capacity <= 0 || batch > replay_capacity)
    throw std::invalid_argument("DqnConfig: need 0 < batch <= replay_capacity");
  if (target_sync <= 0) throw std::invalid_argument("DqnConfig: target_sync must be > 0");
  if (gamma <= 0.0 || gamma > 1.0) throw std::invalid_argument("DqnConfig: gamma in (0,1]");
}

void PpoConfig::validate() const {
  if (clip <= 0.0) throw std::invalid_argument("PpoConfig: clip must be > 0");
  if (gae_lambda < 0.0 || gae_lambda > 1.0)
    throw std::invalid_argument("PpoConfig: lambda must be in [0,1]");
  if (gamma <= 0.0 || gamma > 1.0) throw std::invalid_argument("PpoConfig: gamma in (0,1]");
  if (update_every_episodes <= 0 || epochs <= 0 || minibatch <= 0)
    throw std::invalid_argument("PpoConfig: cadence fields must be positive");
}

double dqn_update(const DqnConfig& cfg, const NetSpec& spec, ParamVector& online,
                  const ParamVector& target, AdamState& adam,
                  const std::vector<const Transition*>& batch) {
  int n = static_cast<int>(batch.size());
  int d = spec.input_size();
  int na = spec.output_size();
  std::vector<double> x(static_cast<size_t>(n) * d), xn(static_cast<size_t>(n) * d);
  for (int i = 0; i < n; ++i) {
    std::memcpy(x.data() + static_cast<size_t>(i) * d, batch[i]->obs.data(), sizeof(double) * d);
    std::memcpy(xn.data() + static_cast<size_t>(i) * d, batch[i]->next_obs.data(),
                sizeof(double) * d);
  }
  std::vector<double> q_next = forward(spec, target, xn, n, nullptr);
  ForwardCache cache;
  std::vector<double> q = forward(spec, online, x, n, &cache);

  std::vector<double> grad_out(static_cast<size_t>(n) * na, 0.0);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    double max_next = q_next[static_cast<size_t>(i) * na];
    for (int a = 1; a < na; ++a)
      max_next = std::max(max_next, q_next[static_cast<size_t>(i) * na + a]);
    double td_target =
        batch[i]->reward_shaped + (batch[i]->done ? 0.0 : cfg.gamma * max_next);
    double err = q[static_cast<size_t>(i) * na + batch[i]->action] - td_target;
    loss += err * err;
    grad_out[static_cast<size_t>(i) * na + batch[i]->action] = 2.0 * err / n;
  }
  loss /= n;
  if (!std::isfinite(loss)) throw std::runtime_error("dqn_update: non-finite loss");
  ParamVector grads = backward(spec, online, cache, grad_out);
  adam_step(adam, online, grads);
  return loss;
}

GaeResult gae(const std::vector<double>& rewards, const std::vector<double>& values,
              const std::vector<bool>& done, double gamma, double lambda) {
  size_t t_len = rewards.size();
  if (values.size() != t_len + 1)
    throw std::invalid_argument("gae: values must have length T+1");
  if (done.size() != t_len) throw std::invalid_argument("gae: done flags length mismatch");
  GaeResult res;
  res.advantages.assign(t_len, 0.0);
  res.returns.assign(t_len, 0.0);
  double carry = 0.0;
  for (size_t i = t_len; i-- > 0;) {
    double mask = done[i] ? 0.0 : 1.0;
    double delta = rewards[i] + gamma * values[i + 1] * mask - values[i];
    carry = delta + gamma * lambda * mask * carry;
    res.advantages[i] = carry;
    res.returns[i] = carry + values[i];
  }
  return res;
}

namespace {

// Gradient of (-min(ratio*A, clip(ratio)*A) - ent_coef*H) w.r.t. the logits of
// one sample, scaled by `scale`, accumulated into grad_row.
void accumulate_policy_grad(const std::vector<double>& logits, int action, double adv,
                            double logp_old, double clip, double ent_coef, double scale,
                            double* grad_row) {
  std::vector<double> p = softmax(logits);
  double logp = std::log(std::max(p[action], 1e-300));
  double ratio = std::exp(logp - logp_old);
  double lo = 1.0 - clip, hi = 1.0 + clip;
  double unclipped = ratio * adv;
  double clipped = std::clamp(ratio, lo, hi) * adv;
  // d surrogate / d logp: nonzero only when the unclipped branch is active.
  double dsurr_dlogp = (unclipped <= clipped) ? -ratio * adv : 0.0;

  double entropy = 0.0;
  for (double v : p)
    if (v > 0.0) entropy -= v * std::log(v);

  int n = static_cast<int>(logits.size());
  for (int j = 0; j < n; ++j) {
    double onehot = (j == action) ? 1.0 : 0.0;
    double g = dsurr_dlogp * (onehot - p[j]);
    if (p[j] > 0.0) g += ent_coef * p[j] * (std::log(p[j]) + entropy);
    grad_row[j] += scale * g;
  }
}

double surrogate_term(const std::vector<double>& logits, int action, double adv,
                      double logp_old, double clip) {
  double logp = softmax_logp(logits, action);
  double ratio = std::exp(logp - logp_old);
  double unclipped = ratio * adv;
  double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
  return -std::min(unclipped, clipped);
}

std::vector<double> row(const std::vector<double>& flat, int i, int width) {
  return {flat.begin() + static_cast<size_t>(i) * width,
          flat.begin() + static_cast<size_t>(i + 1) * width};
}

}  // namespace

void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  double stdev = std::sqrt(var / static_cast<double>(adv.size()));
  double denom = stdev > 1e-12 ? stdev : 1.0;
  for (double& a : adv) a = (a - mean) / denom;
}

PpoStats ppo_update(const PpoConfig& cfg, const NetSpec& policy_spec, ParamVector& policy,
                    AdamState& policy_adam, const NetSpec& value_spec, ParamVector& value,
                    AdamState& value_adam, const std::vector<PpoEpisode>& episodes, Rng& rng) {
  cfg.validate();
  bool recurrent = policy_spec.recurrent.has_value();
  int d = policy_spec.input_size();
  int na = policy_spec.output_size();

  // Per-episode observation matrices and value estimates.
  size_t total = 0;
  for (const PpoEpisode& ep : episodes) total += ep.size();
  if (total == 0) throw std::invalid_argument("ppo_update: empty rollout");

  std::vector<std::vector<double>> obs_mats;
  std::vector<std::vector<double>> adv_per_ep, ret_per_ep;
  std::vector<double> all_adv;
  all_adv.reserve(total);
  for (const PpoEpisode& ep : episodes) {
    int t_len = static_cast<int>(ep.size());
    std::vector<double> obs_mat(static_cast<size_t>(t_len) * d);
    std::vector<double> rewards(t_len);
    std::vector<bool> done(t_len);
    for (int t = 0; t < t_len; ++t) {
      std::memcpy(obs_mat.data() + static_cast<size_t>(t) * d, ep[t].obs.data(),
                  sizeof(double) * d);
      rewards[t] = ep[t].reward_shaped;
      done[t] = ep[t].done;
    }
    std::vector<double> v;
    if (recurrent) {
      v = rnn_forward(value_spec, value, obs_mat, t_len, nullptr).outputs;
    } else {
      v = forward(value_spec, value, obs_mat, t_len, nullptr);
    }
    v.push_back(0.0);  // bootstrap slot; episodes end done, so it is masked
    GaeResult g = gae(rewards, v, done, cfg.gamma, cfg.gae_lambda);
    all_adv.insert(all_adv.end(), g.advantages.begin(), g.advantages.end());
    adv_per_ep.push_back(std::move(g.advantages));
    ret_per_ep.push_back(std::move(g.returns));
    obs_mats.push_back(std::move(obs_mat));
  }

  normalize_advantages(all_adv);
  {
    size_t k = 0;
    for (auto& ep_adv : adv_per_ep)
      for (double& a : ep_adv) a = all_adv[k++];
  }

  // Pre-update statistics (ratio = 1 on the first pass by construction).
  PpoStats stats;
  {
    size_t k = 0;
    for (size_t e = 0; e < episodes.size(); ++e) {
      int t_len = static_cast<int>(episodes[e].size());
      std::vector<double> logits_mat =
          recurrent ? rnn_forward(policy_spec, policy, obs_mats[e], t_len, nullptr).outputs
                    : forward(policy_spec, policy, obs_mats[e], t_len, nullptr);
      std::vector<double> v_mat =
          recurrent ? rnn_forward(value_spec, value, obs_mats[e], t_len, nullptr).outputs
                    : forward(value_spec, value, obs_mats[e], t_len, nullptr);
      for (int t = 0; t < t_len; ++t, ++k) {
        std::vector<double> lg = row(logits_mat, t, na);
        stats.policy_loss += surrogate_term(lg, episodes[e][t].action, adv_per_ep[e][t],
                                            episodes[e][t].logp_old, cfg.clip);
        stats.entropy += softmax_entropy(lg);
        double dv = v_mat[t] - ret_per_ep[e][t];
        stats.value_loss += dv * dv;
      }
    }
    stats.policy_loss /= static_cast<double>(total);
    stats.entropy /= static_cast<double>(total);
    stats.value_loss /= static_cast<double>(total);
  }

  if (recurrent) {
    // Whole-batch epochs: sequences must be replayed in order, so gradients
    // are accumulated across episodes and applied once per epoch.
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      ParamVector pgrad(policy.size(), 0.0), vgrad(value.size(), 0.0);
      for (size_t e = 0; e < episodes.size(); ++e) {
        int t_len = static_cast<int>(episodes[e].size());
        RnnCache pcache;
        RnnForwardResult pf = rnn_forward(policy_spec, policy, obs_mats[e], t_len, &pcache);
        std::vector<double> grad_out(static_cast<size_t>(t_len) * na, 0.0);
        for (int t = 0; t < t_len; ++t) {
          std::vector<double> lg = row(pf.outputs, t, na);
          accumulate_policy_grad(lg, episodes[e][t].action, adv_per_ep[e][t],
                                 episodes[e][t].logp_old, cfg.clip, cfg.entropy_coef,
                                 1.0 / static_cast<double>(total),
                                 grad_out.data() + static_cast<size_t>(t) * na);
        }
        ParamVector g = rnn_backward(policy_spec, policy, pcache, grad_out);
        for (size_t i = 0; i < g.size(); ++i) pgrad[i] += g[i];

        RnnCache vcache;
        RnnForwardResult vf = rnn_forward(value_spec, value, obs_mats[e], t_len, &vcache);
        std::vector<double> vgrad_out(static_cast<size_t>(t_len), 0.0);
        for (int t = 0; t < t_len; ++t)
          vgrad_out[t] = cfg.value_coef * 2.0 * (vf.outputs[t] - ret_per_ep[e][t]) /
                         static_cast<double>(total);
        ParamVector gv = rnn_backward(value_spec, value, vcache, vgrad_out);
        for (size_t i = 0; i < gv.size(); ++i) vgrad[i] += gv[i];
      }
      adam_step(policy_adam, policy, pgrad);
      adam_step(value_adam, value, vgrad);
    }
    return stats;
  }

  // Dense path: flatten and run shuffled minibatches.
  std::vector<double> obs_flat(total * d);
  std::vector<int> actions(total);
  std::vector<double> logp_old(total), adv(total), ret(total);
  {
    size_t k = 0;
    for (size_t e = 0; e < episodes.size(); ++e) {
      for (size_t t = 0; t < episodes[e].size(); ++t, ++k) {
        std::memcpy(obs_flat.data() + k * d, episodes[e][t].obs.data(), sizeof(double) * d);
        actions[k] = episodes[e][t].action;
        logp_old[k] = episodes[e][t].logp_old;
        adv[k] = adv_per_ep[e][t];
        ret[k] = ret_per_ep[e][t];
      }
    }
  }

  std::vector<size_t> order(total);
  for (size_t i = 0; i < total; ++i) order[i] = i;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = total; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (size_t start = 0; start < total; start += cfg.minibatch) {
      size_t n_mb = std::min(static_cast<size_t>(cfg.minibatch), total - start);
      std::vector<double> x(n_mb * d);
      for (size_t i = 0; i < n_mb; ++i)
        std::memcpy(x.data() + i * d, obs_flat.data() + order[start + i] * d,
                    sizeof(double) * d);

      ForwardCache pcache;
      std::vector<double> logits = forward(policy_spec, policy, x, static_cast<int>(n_mb), &pcache);
      std::vector<double> grad_out(n_mb * na, 0.0);
      for (size_t i = 0; i < n_mb; ++i) {
        size_t k = order[start + i];
        std::vector<double> lg = row(logits, static_cast<int>(i), na);
        accumulate_policy_grad(lg, actions[k], adv[k], logp_old[k], cfg.clip, cfg.entropy_coef,
                               1.0 / static_cast<double>(n_mb), grad_out.data() + i * na);
      }
      ParamVector pgrad = backward(policy_spec, policy, pcache, grad_out);
      adam_step(policy_adam, policy, pgrad);

      ForwardCache vcache;
      std::vector<double> v = forward(value_spec, value, x, static_cast<int>(n_mb), &vcache);
      std::vector<double> vgrad_out(n_mb, 0.0);
      for (size_t i = 0; i < n_mb; ++i)
        vgrad_out[i] =
            cfg.value_coef * 2.0 * (v[i] - ret[order[start + i]]) / static_cast<double>(n_mb);
      ParamVector vgrad = backward(value_spec, value, vcache, vgrad_out);
      adam_step(value_adam, value, vgrad);
    }
  }
  if (!std::isfinite(stats.policy_loss) || !std::isfinite(stats.value_loss))
    throw std::runtime_error("ppo_update: non-finite loss");
  return stats;
}

NetSpec policy_spec_for(const TrainConfig& cfg) {
  GridEnv probe(cfg.env);
  int obs = probe.observation_size();
  NetSpec spec;
  if (cfg.algo == Algo::dqn) {
    spec.layer_sizes.push_back(obs);
    for (int h : cfg.dqn.hidden) spec.layer_sizes.push_back(h);
    spec.layer_sizes.push_back(kActionCount);
    return spec;
  }
  if (cfg.env.kind == EnvKind::crossmaze) {
    // Partially observable: Elman cell in front of the dense head.
    spec.layer_sizes = {obs, cfg.ppo.hidden.size() > 1 ? cfg.ppo.hidden[1] : 64, kActionCount};
    spec.recurrent = RecurrentSpec{cfg.ppo.hidden.empty() ? 64 : cfg.ppo.hidden[0],
                                   cfg.ppo.rnn_truncation};
    return spec;
  }
  spec.layer_sizes.push_back(obs);
  for (int h : cfg.ppo.hidden) spec.layer_sizes.push_back(h);
  spec.layer_sizes.push_back(kActionCount);
  return spec;
}

NetSpec value_spec_for(const TrainConfig& cfg) {
  NetSpec spec = policy_spec_for(cfg);
  spec.layer_sizes.back() = 1;
  return spec;
}

Actor::Actor(NetSpec spec, ParamVector params) : spec_(std::move(spec)), params_(std::move(params)) {
  if (spec_.recurrent) hidden_.assign(spec_.recurrent->hidden_size, 0.0);
}

void Actor::begin_episode() {
  if (spec_.recurrent) std::fill(hidden_.begin(), hidden_.end(), 0.0);
}

int Actor::act(const std::vector<double>& features, ActMode mode, double eps, Rng& rng) {
  std::vector<double> out(spec_.output_size());
  if (spec_.recurrent) {
    std::vector<double> h_next(hidden_.size());
    rnn_policy_step(spec_, params_, features.data(), hidden_.data(), h_next.data(), out.data());
    hidden_ = std::move(h_next);
  } else {
    out = forward(spec_, params_, features, 1, nullptr);
  }
  return select_action(out, mode, eps, rng);
}

namespace {

double eps_schedule(const DqnConfig& cfg, double progress) {
  double ramp = std::min(1.0, progress / 0.5);
  return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * ramp;
}

struct CkptTracker {
  std::vector<CheckpointBundle>& out;
  std::vector<long> taken;

  void take(long step, const ParamVector& params, int stage, uint64_t fingerprint) {
    if (std::find(taken.begin(), taken.end(), step) != taken.end()) return;
    taken.push_back(step);
    out.push_back({step, params, stage, fingerprint});
  }
};

}  // namespace

TrainResult train(const TrainConfig& cfg) {
  cfg.curriculum.validate();
  if (cfg.budget <= 0) throw std::invalid_argument("train: budget must be positive");
  if (!cfg.curriculum.transitions.empty() &&
      cfg.transition_unit == cfg.budget_unit &&
      cfg.curriculum.transitions.back() >= cfg.budget)
    throw std::invalid_argument("train: budget must exceed the last transition");

  EnvConfig env_cfg = cfg.env;
  env_cfg.seed = derive_seed(cfg.master_seed ^ cfg.env.seed, "env");
  GridEnv env(env_cfg);

  Curriculum curriculum = cfg.curriculum;

  TrainResult res;
  res.policy_spec = policy_spec_for(cfg);
  res.policy_params = init_params(res.policy_spec, derive_seed(cfg.master_seed, "init-policy"));
  const bool is_ppo = cfg.algo == Algo::ppo;
  if (is_ppo) {
    cfg.ppo.validate();
    res.value_spec = value_spec_for(cfg);
    res.value_params = init_params(res.value_spec, derive_seed(cfg.master_seed, "init-value"));
  } else {
    cfg.dqn.validate();
  }

  AdamState policy_adam = make_adam(res.policy_params.size(), is_ppo ? cfg.ppo.lr : cfg.dqn.lr);
  AdamState value_adam =
      is_ppo ? make_adam(res.value_params.size(), cfg.ppo.lr) : AdamState{};

  ParamVector target = res.policy_params;  // DQN target network
  ReplayBuffer replay(cfg.dqn.replay_capacity);
  Rng act_rng(derive_seed(cfg.master_seed, "act"));
  Rng replay_rng(derive_seed(cfg.master_seed, "replay-sample"));
  Rng ppo_rng(derive_seed(cfg.master_seed, "ppo-shuffle"));

  std::vector<long> ckpt_at = cfg.checkpoint_at;
  std::sort(ckpt_at.begin(), ckpt_at.end());
  CkptTracker ckpts{res.checkpoints, {}};

  long episode = 0;
  long global_step = 0;
  auto unit_now = [&] { return cfg.transition_unit == UnitKind::episodes ? episode : global_step; };
  auto budget_done = [&] {
    return cfg.budget_unit == UnitKind::episodes ? episode >= cfg.budget
                                                 : global_step >= cfg.budget;
  };
  int last_stage = stage_index(curriculum.transitions, 0);
  if (cfg.checkpoint_every > 0)
    ckpts.take(0, res.policy_params, last_stage, act_rng.state());

  std::vector<PpoEpisode> pending;
  std::vector<double> hidden, hidden_next;
  if (res.policy_spec.recurrent) {
    hidden.assign(res.policy_spec.recurrent->hidden_size, 0.0);
    hidden_next.assign(hidden.size(), 0.0);
  }

  while (!budget_done()) {
    Observation obs = env.reset(derive_seed(cfg.master_seed, "episode", episode));
    refresh_stage_potentials(curriculum, env);
    if (res.policy_spec.recurrent) std::fill(hidden.begin(), hidden.end(), 0.0);

    std::vector<GridPos> positions{env.agent()};
    PpoEpisode ep_steps;
    double ret_env = 0.0, ret_shaped = 0.0;
    bool success = false;
    bool done = false;

    while (!done) {
      int action;
      double logp = 0.0;
      std::vector<double> values_out(res.policy_spec.output_size());
      if (res.policy_spec.recurrent) {
        rnn_policy_step(res.policy_spec, res.policy_params, obs.features.data(), hidden.data(),
                        hidden_next.data(), values_out.data());
        std::swap(hidden, hidden_next);
      } else {
        values_out = forward(res.policy_spec, res.policy_params, obs.features, 1, nullptr);
      }
      if (is_ppo) {
        action = select_action(values_out, ActMode::sample, 0.0, act_rng);
        logp = softmax_logp(values_out, action);
      } else {
        double progress = cfg.budget_unit == UnitKind::episodes
                              ? static_cast<double>(episode) / static_cast<double>(cfg.budget)
                              : static_cast<double>(global_step) / static_cast<double>(cfg.budget);
        action = select_action(values_out, ActMode::epsilon, eps_schedule(cfg.dqn, progress),
                               act_rng);
      }

      GridPos prev = env.agent();
      GridEnv::StepResult sr = env.step(action);
      done = sr.done;
      double r_shaped =
          shaped_reward(curriculum, unit_now(), prev, env.agent(), sr.reward_env, done);
      ret_env += sr.reward_env;
      ret_shaped += r_shaped;
      if (env.in_goal_region(env.agent())) success = true;
      positions.push_back(env.agent());

      if (is_ppo) {
        ep_steps.push_back({obs.features, action, logp, r_shaped, done});
      } else {
        Transition t;
        t.obs = obs.features;
        t.next_obs = sr.obs.features;
        t.action = action;
        t.reward_env = sr.reward_env;
        t.reward_shaped = r_shaped;
        t.done = done;
        t.global_step = global_step;
        t.episode_step = env.episode_step();
        t.s = prev;
        t.s_next = env.agent();
        t.goal = env.goal();
        replay.push(std::move(t));
        if (replay.size() >= static_cast<size_t>(cfg.dqn.batch)) {
          std::vector<const Transition*> batch(cfg.dqn.batch);
          for (int i = 0; i < cfg.dqn.batch; ++i)
            batch[i] = &replay.at(replay_rng.below(replay.size()));
          dqn_update(cfg.dqn, res.policy_spec, res.policy_params, target, policy_adam, batch);
        }
      }

      ++global_step;
      if (!is_ppo && global_step % cfg.dqn.target_sync == 0) target = res.policy_params;

      int stage_now = stage_index(curriculum.transitions, unit_now());
      if (cfg.checkpoint_every > 0 && global_step % cfg.checkpoint_every == 0)
        ckpts.take(global_step, res.policy_params, stage_now, act_rng.state());
      if (std::binary_search(ckpt_at.begin(), ckpt_at.end(), global_step))
        ckpts.take(global_step, res.policy_params, stage_now, act_rng.state());
      if (cfg.transition_unit == UnitKind::steps && stage_now != last_stage) {
        ckpts.take(global_step, res.policy_params, stage_now, act_rng.state());
        last_stage = stage_now;
      }
      obs = sr.obs;
    }

    res.metrics.push_back({episode, global_step, env.episode_step(), ret_env, ret_shaped,
                           success, stage_index(curriculum.transitions, unit_now())});
    res.trajectories.push_back(std::move(positions));

    if (is_ppo) {
      pending.push_back(std::move(ep_steps));
      if (static_cast<int>(pending.size()) >= cfg.ppo.update_every_episodes) {
        ppo_update(cfg.ppo, res.policy_spec, res.policy_params, policy_adam, res.value_spec,
                   res.value_params, value_adam, pending, ppo_rng);
        pending.clear();
      }
    }

    ++episode;
    if (cfg.transition_unit == UnitKind::episodes) {
      int stage_now = stage_index(curriculum.transitions, episode);
      if (stage_now != last_stage) {
        ckpts.take(global_step, res.policy_params, stage_now, act_rng.state());
        last_stage = stage_now;
      }
    }
  }

  ckpts.take(global_step, res.policy_params,
             stage_index(curriculum.transitions, unit_now()), act_rng.state());
  res.total_steps = global_step;
  if (!is_ppo) res.final_replay = replay.snapshot();

  // Post-training evaluation. DQN evaluates its greedy policy; PPO samples
  // from the trained stochastic policy.
  Actor actor(res.policy_spec, res.policy_params);
  Rng eval_rng(derive_seed(cfg.master_seed, "eval-rng"));
  ActMode eval_mode = is_ppo ? ActMode::sample : ActMode::greedy;
  auto run_eval_episode = [&](long idx, int goal) {
    Observation o = env.reset(derive_seed(cfg.master_seed, "eval-episode", idx));
    actor.begin_episode();
    bool d = false;
    double r_env = 0.0;
    bool succ = false;
    while (!d) {
      int a = actor.act(o.features, eval_mode, 0.0, eval_rng);
      GridEnv::StepResult sr = env.step(a);
      d = sr.done;
      r_env += sr.reward_env;
      if (env.in_goal_region(env.agent())) succ = true;
      o = sr.obs;
    }
    res.eval.push_back({goal, idx, env.episode_step(), succ, r_env});
  };
  if (cfg.env.kind == EnvKind::crossmaze) {
    for (int g = 0; g < 3; ++g) {
      env.set_active_goals({g});
      for (int i = 0; i < cfg.eval_episodes; ++i)
        run_eval_episode(static_cast<long>(g) * cfg.eval_episodes + i, g);
    }
    env.set_active_goals(cfg.env.train_goals);
  } else {
    for (int i = 0; i < cfg.eval_episodes; ++i) run_eval_episode(i, -1);
  }
  return res;
}

double dqn_batch_loss(const NetSpec& spec, const ParamVector& params,
                      const std::vector<DqnFrozenItem>& items, int which, double gamma,
                      const ParamVector& target_params) {
  int n = static_cast<int>(items.size());
  int d = spec.input_size(), na = spec.output_size();
  std::vector<double> x(static_cast<size_t>(n) * d), xn(static_cast<size_t>(n) * d);
  for (int i = 0; i < n; ++i) {
    std::memcpy(x.data() + static_cast<size_t>(i) * d, items[i].obs.data(), sizeof(double) * d);
    std::memcpy(xn.data() + static_cast<size_t>(i) * d, items[i].next_obs.data(),
                sizeof(double) * d);
  }
  std::vector<double> q = forward(spec, params, x, n, nullptr);
  std::vector<double> qn = forward(spec, target_params, xn, n, nullptr);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    double max_next = qn[static_cast<size_t>(i) * na];
    for (int a = 1; a < na; ++a) max_next = std::max(max_next, qn[static_cast<size_t>(i) * na + a]);
    double td = items[i].reward[which] + (items[i].done ? 0.0 : gamma * max_next);
    double err = q[static_cast<size_t>(i) * na + items[i].action] - td;
    loss += err * err;
  }
  return loss / n;
}

ParamVector dqn_batch_grad(const NetSpec& spec, const ParamVector& params,
                           const std::vector<DqnFrozenItem>& items, int which, double gamma,
                           const ParamVector& target_params) {
  int n = static_cast<int>(items.size());
  int d = spec.input_size(), na = spec.output_size();
  std::vector<double> x(static_cast<size_t>(n) * d), xn(static_cast<size_t>(n) * d);
  for (int i = 0; i < n; ++i) {
    std::memcpy(x.data() + static_cast<size_t>(i) * d, items[i].obs.data(), sizeof(double) * d);
    std::memcpy(xn.data() + static_cast<size_t>(i) * d, items[i].next_obs.data(),
                sizeof(double) * d);
  }
  ForwardCache cache;
  std::vector<double> q = forward(spec, params, x, n, &cache);
  std::vector<double> qn = forward(spec, target_params, xn, n, nullptr);
  std::vector<double> grad_out(static_cast<size_t>(n) * na, 0.0);
  for (int i = 0; i < n; ++i) {
    double max_next = qn[static_cast<size_t>(i) * na];
    for (int a = 1; a < na; ++a) max_next = std::max(max_next, qn[static_cast<size_t>(i) * na + a]);
    double td = items[i].reward[which] + (items[i].done ? 0.0 : gamma * max_next);
    double err = q[static_cast<size_t>(i) * na + items[i].action] - td;
    grad_out[static_cast<size_t>(i) * na + items[i].action] = 2.0 * err / n;
  }
  return backward(spec, params, cache, grad_out);
}

double ppo_surrogate_loss(const NetSpec& spec, const ParamVector& params,
                          const std::vector<PpoFrozenSeq>& seqs, int which, double clip) {
  double loss = 0.0;
  size_t total = 0;
  int na = spec.output_size();
  for (const PpoFrozenSeq& seq : seqs) {
    std::vector<double> logits =
        spec.recurrent ? rnn_forward(spec, params, seq.obs_flat, seq.steps, nullptr).outputs
                       : forward(spec, params, seq.obs_flat, seq.steps, nullptr);
    for (int t = 0; t < seq.steps; ++t) {
      loss += surrogate_term(row(logits, t, na), seq.actions[t], seq.adv[which][t],
                             seq.logp_old[t], clip);
    }
    total += seq.steps;
  }
  return loss / static_cast<double>(total);
}

ParamVector ppo_surrogate_grad(const NetSpec& spec, const ParamVector& params,
                               const std::vector<PpoFrozenSeq>& seqs, int which, double clip) {
  size_t total = 0;
  for (const PpoFrozenSeq& seq : seqs) total += seq.steps;
  int na = spec.output_size();
  ParamVector grads(params.size(), 0.0);
  for (const PpoFrozenSeq& seq : seqs) {
    std::vector<double> grad_out(static_cast<size_t>(seq.steps) * na, 0.0);
    if (spec.recurrent) {
      RnnCache cache;
      RnnForwardResult f = rnn_forward(spec, params, seq.obs_flat, seq.steps, &cache);
      for (int t = 0; t < seq.steps; ++t)
        accumulate_policy_grad(row(f.outputs, t, na), seq.actions[t], seq.adv[which][t],
                               seq.logp_old[t], clip, 0.0, 1.0 / static_cast<double>(total),
                               grad_out.data() + static_cast<size_t>(t) * na);
      ParamVector g = rnn_backward(spec, params, cache, grad_out);
      for (size_t i = 0; i < g.size(); ++i) grads[i] += g[i];
    } else {
      ForwardCache cache;
      std::vector<double> logits = forward(spec, params, seq.obs_flat, seq.steps, &cache);
      for (int t = 0; t < seq.steps; ++t)
        accumulate_policy_grad(row(logits, t, na), seq.actions[t], seq.adv[which][t],
                               seq.logp_old[t], clip, 0.0, 1.0 / static_cast<double>(total),
                               grad_out.data() + static_cast<size_t>(t) * na);
      ParamVector g = backward(spec, params, cache, grad_out);
      for (size_t i = 0; i < g.size(); ++i) grads[i] += g[i];
    }
  }
  return grads;
}

}  // namespace s2d
