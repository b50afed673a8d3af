#pragma once

#include <deque>
#include <memory>
#include <vector>

#include "s2d/envs.hpp"
#include "s2d/nn.hpp"
#include "s2d/rng.hpp"
#include "s2d/shaping.hpp"

namespace s2d {

enum class ActMode { greedy, epsilon, sample };

// Action selection from a vector of per-action values (Q values or logits).
// greedy breaks ties toward the lowest index; sample draws from the softmax.
int select_action(const std::vector<double>& values, ActMode mode, double eps, Rng& rng);

std::vector<double> softmax(const std::vector<double>& logits);
double softmax_entropy(const std::vector<double>& logits);
double softmax_logp(const std::vector<double>& logits, int action);

struct DqnConfig {
  double lr = 5e-4;
  double gamma = 0.99;
  int batch = 128;
  int replay_capacity = 10000;
  int target_sync = 100;  // steps between target <- online copies
  double eps_start = 1.0;
  double eps_end = 0.05;  // reached after the first half of training
  std::vector<int> hidden = {64, 64};

  void validate() const;
};

struct PpoConfig {
  double lr = 5e-4;
  double gamma = 0.99;
  double clip = 0.2;
  double gae_lambda = 0.95;
  double entropy_coef = 0.03;
  double value_coef = 0.5;
  int update_every_episodes = 2;
  int epochs = 4;
  int minibatch = 128;
  std::vector<int> hidden = {64, 64};
  int rnn_truncation = 8;

  void validate() const;
};

struct Transition {
  std::vector<double> obs;
  std::vector<double> next_obs;
  int action = 0;
  double reward_env = 0.0;
  double reward_shaped = 0.0;
  bool done = false;
  long global_step = 0;
  int episode_step = 0;
  // ground-truth positions, kept so rewards under any stage definition can be
  // recomputed later (cross-density protocol).
  GridPos s, s_next, goal;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(capacity) {}
  void push(Transition t) {
    if (static_cast<int>(items_.size()) == capacity_) items_.pop_front();
    items_.push_back(std::move(t));
  }
  size_t size() const { return items_.size(); }
  const Transition& at(size_t i) const { return items_[i]; }
  std::vector<Transition> snapshot() const { return {items_.begin(), items_.end()}; }

 private:
  int capacity_;
  std::deque<Transition> items_;
};

// One Adam step on the squared TD error against max_a' Q_target(s', a') with
// zero bootstrap on done transitions. Returns the batch loss.
double dqn_update(const DqnConfig& cfg, const NetSpec& spec, ParamVector& online,
                  const ParamVector& target, AdamState& adam,
                  const std::vector<const Transition*>& batch);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// values must have length T+1 (bootstrap slot); done masks the bootstrap.
GaeResult gae(const std::vector<double>& rewards, const std::vector<double>& values,
              const std::vector<bool>& done, double gamma, double lambda);

struct PpoStep {
  std::vector<double> obs;
  int action = 0;
  double logp_old = 0.0;
  double reward_shaped = 0.0;
  bool done = false;
};

using PpoEpisode = std::vector<PpoStep>;

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

// In-place shift/scale to mean 0, population std 1 (no-op scale when the
// spread is below 1e-12). Applied to advantages once per PPO update.
void normalize_advantages(std::vector<double>& adv);

// Clipped-surrogate update over the collected episodes; advantages are
// normalized per update. Handles both dense and recurrent policy/value nets.
PpoStats ppo_update(const PpoConfig& cfg, const NetSpec& policy_spec, ParamVector& policy,
                    AdamState& policy_adam, const NetSpec& value_spec, ParamVector& value,
                    AdamState& value_adam, const std::vector<PpoEpisode>& episodes, Rng& rng);

enum class Algo { dqn, ppo };
enum class UnitKind { episodes, steps };

struct TrainConfig {
  EnvConfig env;
  Algo algo = Algo::dqn;
  DqnConfig dqn;
  PpoConfig ppo;
  Curriculum curriculum;
  UnitKind transition_unit = UnitKind::episodes;
  UnitKind budget_unit = UnitKind::episodes;
  long budget = 1000;
  long checkpoint_every = 0;        // in global env steps, 0 disables
  std::vector<long> checkpoint_at;  // explicit global steps
  int eval_episodes = 10;
  uint64_t master_seed = 1;
};

struct CheckpointBundle {
  long global_step = 0;
  ParamVector params;  // policy network (online Q net for DQN)
  int stage = 1;
  uint64_t rng_fingerprint = 0;
};

struct EpisodeMetric {
  long episode = 0;
  long end_step = 0;  // global env steps completed when the episode ended
  int length = 0;
  double return_env = 0.0;
  double return_shaped = 0.0;
  bool success = false;
  int stage = 1;
};

struct EvalRecord {
  int goal = -1;  // crossmaze goal index, -1 otherwise
  long episode = 0;
  int length = 0;
  bool success = false;
  double return_env = 0.0;
};

struct TrainResult {
  NetSpec policy_spec;
  ParamVector policy_params;
  NetSpec value_spec;          // PPO only
  ParamVector value_params;    // PPO only
  std::vector<CheckpointBundle> checkpoints;
  std::vector<EpisodeMetric> metrics;
  std::vector<std::vector<GridPos>> trajectories;  // positions per episode
  std::vector<Transition> final_replay;            // DQN only
  std::vector<EvalRecord> eval;
  long total_steps = 0;
};

NetSpec policy_spec_for(const TrainConfig& cfg);
NetSpec value_spec_for(const TrainConfig& cfg);

// Runs the full stage-switching training loop: every reward passes through
// shaped_reward at the current transition-unit value, checkpoints are taken
// at the configured cadence and at stage boundaries, and a post-training
// evaluation pass is appended.
TrainResult train(const TrainConfig& cfg);

// Step-wise acting over a policy checkpoint (dense or recurrent); used by the
// evaluation pass and the behavioral analyses.
class Actor {
 public:
  Actor(NetSpec spec, ParamVector params);
  void begin_episode();
  int act(const std::vector<double>& features, ActMode mode, double eps, Rng& rng);
  const NetSpec& spec() const { return spec_; }

 private:
  NetSpec spec_;
  ParamVector params_;
  std::vector<double> hidden_;
};

// Frozen-batch loss definitions shared by the landscape and sharpness
// analyses. `which` selects the reward/advantage definition (stage index into
// the stored pair: 0 = first stage, 1 = second stage).
struct DqnFrozenItem {
  std::vector<double> obs, next_obs;
  int action = 0;
  double reward[2] = {0.0, 0.0};
  bool done = false;
};

double dqn_batch_loss(const NetSpec& spec, const ParamVector& params,
                      const std::vector<DqnFrozenItem>& items, int which, double gamma,
                      const ParamVector& target_params);
ParamVector dqn_batch_grad(const NetSpec& spec, const ParamVector& params,
                           const std::vector<DqnFrozenItem>& items, int which, double gamma,
                           const ParamVector& target_params);

struct PpoFrozenSeq {
  std::vector<double> obs_flat;  // steps x obs
  int steps = 0;
  std::vector<int> actions;
  std::vector<double> logp_old;
  std::vector<double> adv[2];
};

double ppo_surrogate_loss(const NetSpec& spec, const ParamVector& params,
                          const std::vector<PpoFrozenSeq>& seqs, int which, double clip);
ParamVector ppo_surrogate_grad(const NetSpec& spec, const ParamVector& params,
                               const std::vector<PpoFrozenSeq>& seqs, int which, double clip);

}  // namespace s2d
