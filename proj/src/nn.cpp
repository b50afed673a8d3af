#include "s2d/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "s2d/csv.hpp"
#include "s2d/rng.hpp"

namespace s2d {

namespace {

// y[n x out] += x[n x in] * W^T, W stored row-major out x in.
void gemm_xwt(const double* x, int n, int in, const double* w, int out, double* y) {
  for (int i = 0; i < n; ++i) {
    const double* xi = x + static_cast<size_t>(i) * in;
    double* yi = y + static_cast<size_t>(i) * out;
    for (int o = 0; o < out; ++o) {
      const double* wo = w + static_cast<size_t>(o) * in;
      double acc = 0.0;
      for (int k = 0; k < in; ++k) acc += xi[k] * wo[k];
      yi[o] += acc;
    }
  }
}

// dW[out x in] += dy[n x out]^T * x[n x in]
void accum_dw(const double* dy, const double* x, int n, int in, int out, double* dw) {
  for (int i = 0; i < n; ++i) {
    const double* xi = x + static_cast<size_t>(i) * in;
    const double* dyi = dy + static_cast<size_t>(i) * out;
    for (int o = 0; o < out; ++o) {
      double g = dyi[o];
      if (g == 0.0) continue;
      double* dwo = dw + static_cast<size_t>(o) * in;
      for (int k = 0; k < in; ++k) dwo[k] += g * xi[k];
    }
  }
}

// dx[n x in] += dy[n x out] * W, W row-major out x in.
void accum_dx(const double* dy, const double* w, int n, int in, int out, double* dx) {
  for (int i = 0; i < n; ++i) {
    const double* dyi = dy + static_cast<size_t>(i) * out;
    double* dxi = dx + static_cast<size_t>(i) * in;
    for (int o = 0; o < out; ++o) {
      double g = dyi[o];
      if (g == 0.0) continue;
      const double* wo = w + static_cast<size_t>(o) * in;
      for (int k = 0; k < in; ++k) dxi[k] += g * wo[k];
    }
  }
}

struct DenseLayout {
  std::vector<size_t> w_off, b_off;  // per dense layer
  size_t rnn_win = 0, rnn_wrec = 0, rnn_b = 0;
  size_t total = 0;
};

DenseLayout layout_of(const NetSpec& spec) {
  DenseLayout l;
  std::vector<int> sizes = spec.dense_sizes();
  size_t off = 0;
  for (size_t i = 0; i + 1 < sizes.size(); ++i) {
    l.w_off.push_back(off);
    off += static_cast<size_t>(sizes[i + 1]) * sizes[i];
    l.b_off.push_back(off);
    off += sizes[i + 1];
  }
  if (spec.recurrent) {
    int h = spec.recurrent->hidden_size;
    l.rnn_win = off;
    off += static_cast<size_t>(h) * spec.input_size();
    l.rnn_wrec = off;
    off += static_cast<size_t>(h) * h;
    l.rnn_b = off;
    off += h;
  }
  l.total = off;
  return l;
}

}  // namespace

std::vector<int> NetSpec::dense_sizes() const {
  std::vector<int> sizes = layer_sizes;
  if (recurrent) sizes[0] = recurrent->hidden_size;
  return sizes;
}

void NetSpec::validate() const {
  if (layer_sizes.size() < 2)
    throw std::invalid_argument("NetSpec: needs at least input and output sizes");
  for (int s : layer_sizes)
    if (s <= 0) throw std::invalid_argument("NetSpec: layer sizes must be positive");
  if (recurrent) {
    if (recurrent->hidden_size <= 0)
      throw std::invalid_argument("NetSpec: recurrent hidden_size must be positive");
    if (recurrent->truncation_length < 1)
      throw std::invalid_argument("NetSpec: truncation_length must be >= 1");
  }
}

size_t param_count(const NetSpec& spec) {
  spec.validate();
  return layout_of(spec).total;
}

ParamVector init_params(const NetSpec& spec, uint64_t seed) {
  spec.validate();
  DenseLayout l = layout_of(spec);
  ParamVector params(l.total, 0.0);
  Rng rng(derive_seed(seed, "glorot-init"));
  std::vector<int> sizes = spec.dense_sizes();
  auto fill = [&](size_t off, int fan_out, int fan_in) {
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    size_t n = static_cast<size_t>(fan_out) * fan_in;
    for (size_t i = 0; i < n; ++i) params[off + i] = rng.uniform(-bound, bound);
  };
  for (size_t i = 0; i + 1 < sizes.size(); ++i) fill(l.w_off[i], sizes[i + 1], sizes[i]);
  if (spec.recurrent) {
    int h = spec.recurrent->hidden_size;
    fill(l.rnn_win, h, spec.input_size());
    fill(l.rnn_wrec, h, h);
  }
  return params;
}

std::vector<double> forward(const NetSpec& spec, const ParamVector& params,
                            const std::vector<double>& input, int batch, ForwardCache* cache) {
  spec.validate();
  if (spec.recurrent)
    throw std::logic_error("forward: recurrent spec, use rnn_forward");
  DenseLayout l = layout_of(spec);
  if (params.size() != l.total) throw std::invalid_argument("forward: param length mismatch");
  std::vector<int> sizes = spec.dense_sizes();
  if (input.size() != static_cast<size_t>(batch) * sizes[0])
    throw std::invalid_argument("forward: input width does not match layer_sizes[0]");

  std::vector<std::vector<double>> acts;
  acts.reserve(sizes.size());
  acts.push_back(input);
  for (size_t layer = 0; layer + 1 < sizes.size(); ++layer) {
    int in = sizes[layer], out = sizes[layer + 1];
    std::vector<double> y(static_cast<size_t>(batch) * out);
    const double* b = params.data() + l.b_off[layer];
    for (int i = 0; i < batch; ++i)
      std::memcpy(y.data() + static_cast<size_t>(i) * out, b, sizeof(double) * out);
    gemm_xwt(acts.back().data(), batch, in, params.data() + l.w_off[layer], out, y.data());
    if (layer + 2 < sizes.size())  // ReLU on hidden layers, identity on output
      for (double& v : y) v = v > 0.0 ? v : 0.0;
    acts.push_back(std::move(y));
  }
  std::vector<double> out = acts.back();
  if (cache) {
    cache->batch = batch;
    cache->acts = std::move(acts);
  }
  return out;
}

ParamVector backward(const NetSpec& spec, const ParamVector& params, const ForwardCache& cache,
                     const std::vector<double>& grad_out, std::vector<double>* grad_input) {
  DenseLayout l = layout_of(spec);
  std::vector<int> sizes = spec.dense_sizes();
  if (cache.acts.size() != sizes.size())
    throw std::invalid_argument("backward: cache does not match spec");
  int batch = cache.batch;
  if (grad_out.size() != static_cast<size_t>(batch) * sizes.back())
    throw std::invalid_argument("backward: grad_out shape mismatch");

  ParamVector grads(l.total, 0.0);
  std::vector<double> dy = grad_out;
  for (int layer = static_cast<int>(sizes.size()) - 2; layer >= 0; --layer) {
    int in = sizes[layer], out = sizes[layer + 1];
    const std::vector<double>& x = cache.acts[layer];
    accum_dw(dy.data(), x.data(), batch, in, out, grads.data() + l.w_off[layer]);
    double* db = grads.data() + l.b_off[layer];
    for (int i = 0; i < batch; ++i)
      for (int o = 0; o < out; ++o) db[o] += dy[static_cast<size_t>(i) * out + o];
    if (layer == 0 && !grad_input) break;
    std::vector<double> dx(static_cast<size_t>(batch) * in, 0.0);
    accum_dx(dy.data(), params.data() + l.w_off[layer], batch, in, out, dx.data());
    if (layer > 0) {
      // ReLU subgradient, 0 at 0: mask from the cached post-activation.
      const std::vector<double>& h = cache.acts[layer];
      for (size_t i = 0; i < dx.size(); ++i)
        if (h[i] <= 0.0) dx[i] = 0.0;
    }
    dy = std::move(dx);
    if (layer == 0 && grad_input) *grad_input = dy;
  }
  return grads;
}

void rnn_step(const NetSpec& spec, const ParamVector& params, const double* obs,
              const double* h_prev, double* h_out) {
  DenseLayout l = layout_of(spec);
  int h = spec.recurrent->hidden_size;
  int in = spec.input_size();
  const double* win = params.data() + l.rnn_win;
  const double* wrec = params.data() + l.rnn_wrec;
  const double* b = params.data() + l.rnn_b;
  for (int o = 0; o < h; ++o) {
    double acc = b[o];
    const double* wi = win + static_cast<size_t>(o) * in;
    for (int k = 0; k < in; ++k) acc += wi[k] * obs[k];
    const double* wr = wrec + static_cast<size_t>(o) * h;
    for (int k = 0; k < h; ++k) acc += wr[k] * h_prev[k];
    h_out[o] = std::tanh(acc);
  }
}

void rnn_policy_step(const NetSpec& spec, const ParamVector& params, const double* obs,
                     const double* h_prev, double* h_out, double* out) {
  rnn_step(spec, params, obs, h_prev, h_out);
  DenseLayout l = layout_of(spec);
  std::vector<int> sizes = spec.dense_sizes();
  std::vector<double> x(h_out, h_out + sizes[0]);
  std::vector<double> y;
  for (size_t layer = 0; layer + 1 < sizes.size(); ++layer) {
    int in = sizes[layer], o_n = sizes[layer + 1];
    y.assign(params.data() + l.b_off[layer], params.data() + l.b_off[layer] + o_n);
    gemm_xwt(x.data(), 1, in, params.data() + l.w_off[layer], o_n, y.data());
    if (layer + 2 < sizes.size())
      for (double& v : y) v = v > 0.0 ? v : 0.0;
    x = y;
  }
  std::memcpy(out, x.data(), sizeof(double) * sizes.back());
}

RnnForwardResult rnn_forward(const NetSpec& spec, const ParamVector& params,
                             const std::vector<double>& obs_seq, int steps, RnnCache* cache) {
  spec.validate();
  if (!spec.recurrent) throw std::logic_error("rnn_forward: spec is not recurrent");
  DenseLayout l = layout_of(spec);
  if (params.size() != l.total)
    throw std::invalid_argument("rnn_forward: param length mismatch");
  int in = spec.input_size();
  if (obs_seq.size() != static_cast<size_t>(steps) * in)
    throw std::invalid_argument("rnn_forward: observation sequence shape mismatch");
  int h = spec.recurrent->hidden_size;

  std::vector<double> hidden(static_cast<size_t>(steps) * h, 0.0);
  std::vector<double> h_prev(h, 0.0);
  for (int t = 0; t < steps; ++t) {
    rnn_step(spec, params, obs_seq.data() + static_cast<size_t>(t) * in, h_prev.data(),
             hidden.data() + static_cast<size_t>(t) * h);
    std::memcpy(h_prev.data(), hidden.data() + static_cast<size_t>(t) * h, sizeof(double) * h);
  }

  // Dense head over all timesteps at once; reuse the non-recurrent machinery
  // with a head-only spec.
  NetSpec head_spec;
  head_spec.layer_sizes = spec.dense_sizes();
  ParamVector head_params(params.begin(), params.begin() + l.rnn_win);

  RnnForwardResult res;
  res.hidden = hidden;
  ForwardCache head_cache;
  res.outputs = forward(head_spec, head_params, hidden, steps, &head_cache);
  if (cache) {
    cache->steps = steps;
    cache->inputs = obs_seq;
    cache->hidden = std::move(hidden);
    cache->head = std::move(head_cache);
  }
  return res;
}

ParamVector rnn_backward(const NetSpec& spec, const ParamVector& params, const RnnCache& cache,
                         const std::vector<double>& grad_outputs) {
  if (!spec.recurrent) throw std::logic_error("rnn_backward: spec is not recurrent");
  DenseLayout l = layout_of(spec);
  int in = spec.input_size();
  int h = spec.recurrent->hidden_size;
  int steps = cache.steps;
  int trunc = spec.recurrent->truncation_length;

  NetSpec head_spec;
  head_spec.layer_sizes = spec.dense_sizes();
  ParamVector head_params(params.begin(), params.begin() + l.rnn_win);

  std::vector<double> dh(static_cast<size_t>(steps) * h, 0.0);
  ParamVector head_grads = backward(head_spec, head_params, cache.head, grad_outputs, &dh);

  ParamVector grads(l.total, 0.0);
  std::memcpy(grads.data(), head_grads.data(), sizeof(double) * head_grads.size());

  const double* wrec = params.data() + l.rnn_wrec;
  double* d_win = grads.data() + l.rnn_win;
  double* d_wrec = grads.data() + l.rnn_wrec;
  double* d_b = grads.data() + l.rnn_b;

  std::vector<double> carry(h, 0.0);  // gradient flowing into h_t from t+1
  std::vector<double> dz(h, 0.0);
  for (int t = steps - 1; t >= 0; --t) {
    const double* ht = cache.hidden.data() + static_cast<size_t>(t) * h;
    for (int o = 0; o < h; ++o) {
      double g = dh[static_cast<size_t>(t) * h + o] + carry[o];
      dz[o] = g * (1.0 - ht[o] * ht[o]);  // tanh'
    }
    const double* obs_t = cache.inputs.data() + static_cast<size_t>(t) * in;
    const double* h_prev =
        t > 0 ? cache.hidden.data() + static_cast<size_t>(t - 1) * h : nullptr;
    for (int o = 0; o < h; ++o) {
      double g = dz[o];
      if (g == 0.0) continue;
      double* dwi = d_win + static_cast<size_t>(o) * in;
      for (int k = 0; k < in; ++k) dwi[k] += g * obs_t[k];
      if (h_prev) {
        double* dwr = d_wrec + static_cast<size_t>(o) * h;
        for (int k = 0; k < h; ++k) dwr[k] += g * h_prev[k];
      }
      d_b[o] += g;
    }
    // Truncation: do not propagate into the previous chunk.
    if (t % trunc == 0) {
      std::fill(carry.begin(), carry.end(), 0.0);
    } else {
      std::fill(carry.begin(), carry.end(), 0.0);
      for (int o = 0; o < h; ++o) {
        double g = dz[o];
        if (g == 0.0) continue;
        const double* wr = wrec + static_cast<size_t>(o) * h;
        for (int k = 0; k < h; ++k) carry[k] += g * wr[k];
      }
    }
  }
  return grads;
}

AdamState make_adam(size_t dim, double lr) {
  AdamState st;
  st.lr = lr;
  st.m.assign(dim, 0.0);
  st.v.assign(dim, 0.0);
  return st;
}

void adam_step(AdamState& state, ParamVector& params, const ParamVector& grads) {
  if (params.size() != grads.size() || state.m.size() != params.size())
    throw std::invalid_argument("adam_step: length mismatch");
  for (size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw std::runtime_error("adam_step: non-finite gradient at index " + std::to_string(i));
  state.step_count += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

void save_checkpoint(const std::filesystem::path& path, const NetSpec& spec,
                     const ParamVector& params) {
  if (params.size() != param_count(spec))
    throw std::invalid_argument("save_checkpoint: param length mismatch");
  std::string buf;
  buf.reserve(params.size() * 26 + 64);
  buf += "format=1\n";
  buf += "layers=";
  for (size_t i = 0; i < spec.layer_sizes.size(); ++i) {
    if (i) buf += ',';
    buf += std::to_string(spec.layer_sizes[i]);
  }
  buf += '\n';
  if (spec.recurrent) {
    buf += "recurrent=1," + std::to_string(spec.recurrent->hidden_size) + "," +
           std::to_string(spec.recurrent->truncation_length) + "\n";
  } else {
    buf += "recurrent=0\n";
  }
  for (double p : params) {
    buf += format_double(p);
    buf += '\n';
  }
  atomic_write(path, buf);
}

namespace {
[[noreturn]] void ckpt_error(const std::filesystem::path& path, int line, const std::string& msg) {
  throw std::runtime_error("checkpoint " + path.string() + " line " + std::to_string(line) +
                           ": " + msg);
}
}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::string line;
  int lineno = 0;

  auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) ckpt_error(path, lineno + 1, std::string("missing ") + what);
    ++lineno;
  };

  next_line("format header");
  if (line != "format=1") ckpt_error(path, lineno, "expected format=1");

  next_line("layers header");
  if (line.rfind("layers=", 0) != 0) ckpt_error(path, lineno, "expected layers=");
  Checkpoint ck;
  {
    std::stringstream ss(line.substr(7));
    std::string tok;
    while (std::getline(ss, tok, ',')) ck.spec.layer_sizes.push_back(std::stoi(tok));
  }

  next_line("recurrent header");
  if (line.rfind("recurrent=", 0) != 0) ckpt_error(path, lineno, "expected recurrent=");
  {
    std::string rest = line.substr(10);
    if (rest == "0") {
      ck.spec.recurrent.reset();
    } else {
      std::stringstream ss(rest);
      std::string tok;
      std::vector<int> vals;
      while (std::getline(ss, tok, ',')) vals.push_back(std::stoi(tok));
      if (vals.size() != 3 || vals[0] != 1)
        ckpt_error(path, lineno, "expected recurrent=0 or recurrent=1,<hidden>,<trunc>");
      ck.spec.recurrent = RecurrentSpec{vals[1], vals[2]};
    }
  }
  ck.spec.validate();

  size_t expected = param_count(ck.spec);
  ck.params.reserve(expected);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    char* end = nullptr;
    double v = std::strtod(line.c_str(), &end);
    if (end == line.c_str()) ckpt_error(path, lineno, "cannot parse parameter value");
    if (ck.params.size() == expected) ckpt_error(path, lineno, "extra parameter line");
    ck.params.push_back(v);
  }
  if (ck.params.size() != expected)
    ckpt_error(path, lineno + 1,
               "truncated: expected " + std::to_string(expected) + " parameters, got " +
                   std::to_string(ck.params.size()));
  return ck;
}

}  // namespace s2d
