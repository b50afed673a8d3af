#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace s2d {

using ParamVector = std::vector<double>;

struct RecurrentSpec {
  int hidden_size = 64;
  int truncation_length = 8;
  bool operator==(const RecurrentSpec&) const = default;
};

// Dense ReLU stack, optionally fed by an Elman tanh cell. For recurrent
// specs the cell consumes the raw observation (width layer_sizes[0]) and the
// dense stack runs hidden_size -> layer_sizes[1] -> ... -> layer_sizes.back().
struct NetSpec {
  std::vector<int> layer_sizes;
  std::optional<RecurrentSpec> recurrent;

  bool operator==(const NetSpec&) const = default;
  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  // Sizes of the dense chain actually multiplied through.
  std::vector<int> dense_sizes() const;
  void validate() const;
};

size_t param_count(const NetSpec& spec);

// Glorot-uniform weights, zero biases, seeded.
ParamVector init_params(const NetSpec& spec, uint64_t seed);

struct ForwardCache {
  int batch = 0;
  // acts[0] is the dense-stack input, acts.back() the network output;
  // hidden layers hold post-ReLU values (enough to recover the ReLU mask).
  std::vector<std::vector<double>> acts;
};

// Batched forward for non-recurrent specs. input is row-major batch x in.
std::vector<double> forward(const NetSpec& spec, const ParamVector& params,
                            const std::vector<double>& input, int batch, ForwardCache* cache);

// Exact reverse-mode gradients for the dense stack. grad_out is row-major
// batch x out; returns d loss / d params. Optionally accumulates the gradient
// w.r.t. the stack input into grad_input (batch x in).
ParamVector backward(const NetSpec& spec, const ParamVector& params, const ForwardCache& cache,
                     const std::vector<double>& grad_out, std::vector<double>* grad_input = nullptr);

struct RnnCache {
  int steps = 0;
  std::vector<double> inputs;   // T x obs
  std::vector<double> hidden;   // T x H, post-tanh
  ForwardCache head;            // dense stack over the T hidden rows
};

struct RnnForwardResult {
  std::vector<double> hidden;   // T x H
  std::vector<double> outputs;  // T x out
};

// Unrolls h_t = tanh(W_in o_t + W_rec h_{t-1} + b), h_0 = 0, then runs the
// dense head over every hidden state.
RnnForwardResult rnn_forward(const NetSpec& spec, const ParamVector& params,
                             const std::vector<double>& obs_seq, int steps, RnnCache* cache);

// One cell application for step-wise acting; h_prev has hidden_size entries.
void rnn_step(const NetSpec& spec, const ParamVector& params, const double* obs,
              const double* h_prev, double* h_out);

// Cell plus dense head for a single observation, without temporaries sized to
// the whole sequence. out must hold output_size() entries.
void rnn_policy_step(const NetSpec& spec, const ParamVector& params, const double* obs,
                     const double* h_prev, double* h_out, double* out);

// Truncated BPTT: gradients do not flow across chunk boundaries of
// truncation_length steps (forward values are unaffected).
ParamVector rnn_backward(const NetSpec& spec, const ParamVector& params, const RnnCache& cache,
                         const std::vector<double>& grad_outputs);

struct AdamState {
  long step_count = 0;
  std::vector<double> m, v;
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam(size_t dim, double lr);

// Standard bias-corrected Adam update, in place.
void adam_step(AdamState& state, ParamVector& params, const ParamVector& grads);

// Text checkpoint: header lines `format=1`, `layers=...`, `recurrent=...`,
// then one %.17g parameter per line (exact 64-bit round trip).
void save_checkpoint(const std::filesystem::path& path, const NetSpec& spec,
                     const ParamVector& params);

struct Checkpoint {
  NetSpec spec;
  ParamVector params;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace s2d
