#include "asrnn/cells.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "asrnn/error.hpp"
#include "asrnn/linalg.hpp"

namespace asrnn {
namespace {

void add_bias(Matrix& m, std::span<const double> bias) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (double& v : m.row(i)) v += bias[i];
}

void accumulate_row_sums(Vector& out, const Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (double v : m.row(i)) s += v;
    out[i] += s;
  }
}

void check_finite(const Matrix& m, std::size_t t, const char* what) {
  if (!m.all_finite()) throw NumericFault(std::string(what) + ": non-finite value", t);
}

void check_inputs(std::span<const Matrix> inputs, std::size_t d_x, const Matrix& h0, std::size_t d_h) {
  if (inputs.empty()) throw ContractViolation("forward: empty input sequence");
  const std::size_t batch = h0.cols();
  if (h0.rows() != d_h) throw ContractViolation("forward: initial state has wrong hidden size");
  for (const auto& x : inputs)
    if (x.rows() != d_x || x.cols() != batch) throw ContractViolation("forward: input shape mismatch");
}

void check_head(const Head& head, std::size_t d_h) {
  if (head.weight.cols() != d_h || head.bias.size() != head.weight.rows())
    throw ContractViolation("head: shape mismatch");
}

std::size_t expected_logits(HeadMode mode, std::size_t steps) { return mode == HeadMode::kPerStep ? steps : 1; }

void check_grad_logits(std::span<const Matrix> grad_logits, HeadMode mode, std::size_t steps) {
  if (grad_logits.size() != expected_logits(mode, steps))
    throw ContractViolation("backward: gradient count does not match head mode");
}

/// Index into grad_logits fed by h_t (1-based t), or -1.
long head_slot(HeadMode mode, std::size_t t, std::size_t steps) {
  if (mode == HeadMode::kPerStep) return static_cast<long>(t - 1);
  return t == steps ? 0 : -1;
}

/// Adds the head's contribution at step t into grad_h and the head gradients.
void head_backward_step(const Head& head, HeadMode mode, std::size_t t, std::size_t steps, const Matrix& hidden,
                        std::span<const Matrix> grad_logits, Matrix& grad_h, Matrix& g_head_w, Vector& g_head_b) {
  const long slot = head_slot(mode, t, steps);
  if (slot < 0) return;
  const Matrix& g = grad_logits[static_cast<std::size_t>(slot)];
  matmul_nt_add(g_head_w, g, hidden);
  accumulate_row_sums(g_head_b, g);
  grad_h += matmul_tn(head.weight, g);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Matrix apply_head(const Head& head, const Matrix& hidden) {
  Matrix out = matmul(head.weight, hidden);
  add_bias(out, head.bias);
  return out;
}

// ---------------------------------------------------------------------------
// asRNN
// ---------------------------------------------------------------------------

AsRnnWeights AsRnnParams::materialize() {
  return AsRnnWeights{w_xh, skew_hh.materialize(), skew_f.materialize(), materialize_diagonal(diag_f), bias, head,
                      mode};
}

std::vector<ParamView> AsRnnParams::views() {
  const std::size_t d = hidden_dim();
  return {
      {"w_xh", w_xh.data(), {w_xh.rows(), w_xh.cols()}, LrGroup::kMain},
      {"skew_hh", skew_hh.mutable_free_params(), {skew_hh.free_count()}, LrGroup::kRecurrent},
      {"skew_f", skew_f.mutable_free_params(), {skew_f.free_count()}, LrGroup::kRecurrent},
      {"diag_seed", diag_f.seed, {d}, LrGroup::kMain},
      {"bias", bias, {d}, LrGroup::kMain},
      {"head_w", head.weight.data(), {head.weight.rows(), head.weight.cols()}, LrGroup::kMain},
      {"head_b", head.bias, {head.bias.size()}, LrGroup::kMain},
  };
}

GradBundle AsRnnParams::zero_grad() const {
  GradBundle g;
  g.add("w_xh", {w_xh.rows(), w_xh.cols()});
  g.add("skew_hh", {skew_hh.free_count()}, LrGroup::kRecurrent);
  g.add("skew_f", {skew_f.free_count()}, LrGroup::kRecurrent);
  g.add("diag_seed", {diag_f.seed.size()});
  g.add("bias", {bias.size()});
  g.add("head_w", {head.weight.rows(), head.weight.cols()});
  g.add("head_b", {head.bias.size()});
  return g;
}

AsRnnForward asrnn_forward(const AsRnnWeights& w, std::span<const Matrix> inputs, const Matrix& h0) {
  const std::size_t d_h = w.hidden_dim();
  if (w.u_f.rows() != d_h || w.u_f.cols() != d_h || w.d_f.size() != d_h || w.bias.size() != d_h ||
      w.w_xh.rows() != d_h)
    throw ContractViolation("asrnn_forward: weight shapes disagree");
  check_head(w.head, d_h);
  check_inputs(inputs, w.input_dim(), h0, d_h);
  Vector inv_d(d_h);
  for (std::size_t i = 0; i < d_h; ++i) {
    if (w.d_f[i] == 0.0)
      throw SingularSaturation("asrnn_forward: d_f[" + std::to_string(i) + "] == 0 makes W_f singular");
    inv_d[i] = 1.0 / w.d_f[i];
  }

  AsRnnForward out;
  BpttCache& cache = out.cache;
  cache.weights = w;
  cache.inputs.assign(inputs.begin(), inputs.end());
  cache.h0 = h0;
  const std::size_t steps = inputs.size();
  cache.z.reserve(steps);
  cache.a.reserve(steps);
  cache.h.reserve(steps);

  for (std::size_t t = 1; t <= steps; ++t) {
    Matrix z = matmul(w.w_xh, inputs[t - 1]);
    matmul_add(z, w.w_hh, cache.hidden(t - 1));
    add_bias(z, w.bias);
    Matrix dz = z;
    scale_rows(dz, w.d_f);
    Matrix a = matmul(w.u_f, dz);
    for (double& v : a.data()) v = std::tanh(v);
    // h = D_f^{-1} U_f^T a; the inverse is never formed.
    Matrix h = matmul_tn(w.u_f, a);
    scale_rows(h, inv_d);
    check_finite(h, t, "asrnn_forward");
    if (w.mode == HeadMode::kPerStep || t == steps) out.logits.push_back(apply_head(w.head, h));
    cache.z.push_back(std::move(z));
    cache.a.push_back(std::move(a));
    cache.h.push_back(std::move(h));
  }
  return out;
}

AsRnnWeightGrads asrnn_backward_weights(const BpttCache& cache, std::span<const Matrix> grad_logits,
                                        const HiddenGradHook& hook) {
  const AsRnnWeights& w = cache.weights;
  const std::size_t d_h = w.hidden_dim(), steps = cache.steps();
  check_grad_logits(grad_logits, w.mode, steps);
  const std::size_t batch = cache.h0.cols();

  AsRnnWeightGrads g{Matrix(d_h, w.input_dim()), Matrix(d_h, d_h), Matrix(d_h, d_h), Vector(d_h, 0.0),
                     Vector(d_h, 0.0),           Matrix(w.head.weight.rows(), d_h), Vector(w.head.bias.size(), 0.0)};

  Vector inv_d(d_h);
  for (std::size_t i = 0; i < d_h; ++i) inv_d[i] = 1.0 / w.d_f[i];

  Matrix carry(d_h, batch);  // dL/dh_t flowing back from step t+1
  for (std::size_t t = steps; t >= 1; --t) {
    Matrix grad_h = carry;
    head_backward_step(w.head, w.mode, t, steps, cache.hidden(t), grad_logits, grad_h, g.head_w, g.head_b);
    if (hook) hook(t, grad_h);

    const Matrix& z = cache.z[t - 1];
    const Matrix& a = cache.a[t - 1];
    const Matrix& h = cache.h[t - 1];

    // h = D^{-1} p: dL/dd_i picks up -sum_b gh_ib h_ib / d_i.
    for (std::size_t i = 0; i < d_h; ++i) {
      double s = 0.0;
      const auto gh = grad_h.row(i);
      const auto hr = h.row(i);
      for (std::size_t b = 0; b < batch; ++b) s += gh[b] * hr[b];
      g.d_f[i] -= s * inv_d[i];
    }
    Matrix grad_p = grad_h;
    scale_rows(grad_p, inv_d);

    // p = U^T a
    Matrix grad_a = matmul(w.u_f, grad_p);
    matmul_nt_add(g.u_f, a, grad_p);

    // a = tanh(v)
    Matrix grad_v = std::move(grad_a);
    {
      auto gv = grad_v.data();
      const auto av = a.data();
      for (std::size_t k = 0; k < gv.size(); ++k) gv[k] *= 1.0 - av[k] * av[k];
    }

    // v = U (D z)
    Matrix dz = z;
    scale_rows(dz, w.d_f);
    matmul_nt_add(g.u_f, grad_v, dz);
    Matrix grad_dz = matmul_tn(w.u_f, grad_v);
    for (std::size_t i = 0; i < d_h; ++i) {
      double s = 0.0;
      const auto gr = grad_dz.row(i);
      const auto zr = z.row(i);
      for (std::size_t b = 0; b < batch; ++b) s += gr[b] * zr[b];
      g.d_f[i] += s;
    }
    Matrix grad_z = std::move(grad_dz);
    scale_rows(grad_z, w.d_f);

    // z = W_xh x + W_hh h_{t-1} + b
    accumulate_row_sums(g.bias, grad_z);
    matmul_nt_add(g.w_xh, grad_z, cache.inputs[t - 1]);
    matmul_nt_add(g.w_hh, grad_z, cache.hidden(t - 1));
    carry = matmul_tn(w.w_hh, grad_z);
    check_finite(carry, t, "asrnn_backward");
  }
  return g;
}

GradBundle asrnn_backward(const AsRnnParams& params, const BpttCache& cache, std::span<const Matrix> grad_logits,
                          const HiddenGradHook& hook) {
  if (params.hidden_dim() != cache.weights.hidden_dim() || params.w_xh.cols() != cache.weights.input_dim() ||
      params.head.weight.rows() != cache.weights.head.weight.rows())
    throw ContractViolation("asrnn_backward: cache was produced by a differently shaped model");
  const AsRnnWeightGrads wg = asrnn_backward_weights(cache, grad_logits, hook);
  GradBundle g = params.zero_grad();
  g.at("w_xh").values = Vector(wg.w_xh.data().begin(), wg.w_xh.data().end());
  g.at("skew_hh").values = backprop_orthogonal(params.skew_hh, wg.w_hh);
  g.at("skew_f").values = backprop_orthogonal(params.skew_f, wg.u_f);
  g.at("diag_seed").values = backprop_diagonal(params.diag_f, wg.d_f);
  g.at("bias").values = wg.bias;
  g.at("head_w").values = Vector(wg.head_w.data().begin(), wg.head_w.data().end());
  g.at("head_b").values = wg.head_b;
  return g;
}

// ---------------------------------------------------------------------------
// Vanilla RNN
// ---------------------------------------------------------------------------

std::vector<ParamView> RnnParams::views() {
  return {
      {"w_xh", w_xh.data(), {w_xh.rows(), w_xh.cols()}, LrGroup::kMain},
      {"w_hh", w_hh.data(), {w_hh.rows(), w_hh.cols()}, LrGroup::kMain},
      {"bias", bias, {bias.size()}, LrGroup::kMain},
      {"head_w", head.weight.data(), {head.weight.rows(), head.weight.cols()}, LrGroup::kMain},
      {"head_b", head.bias, {head.bias.size()}, LrGroup::kMain},
  };
}

GradBundle RnnParams::zero_grad() const {
  GradBundle g;
  g.add("w_xh", {w_xh.rows(), w_xh.cols()});
  g.add("w_hh", {w_hh.rows(), w_hh.cols()});
  g.add("bias", {bias.size()});
  g.add("head_w", {head.weight.rows(), head.weight.cols()});
  g.add("head_b", {head.bias.size()});
  return g;
}

RnnForward vanilla_rnn_forward(const RnnParams& p, std::span<const Matrix> inputs, const Matrix& h0) {
  const std::size_t d_h = p.hidden_dim();
  if (p.w_hh.cols() != d_h || p.w_xh.rows() != d_h || p.bias.size() != d_h)
    throw ContractViolation("vanilla_rnn_forward: weight shapes disagree");
  check_head(p.head, d_h);
  check_inputs(inputs, p.w_xh.cols(), h0, d_h);

  RnnForward out;
  out.cache.inputs.assign(inputs.begin(), inputs.end());
  out.cache.h0 = h0;
  const std::size_t steps = inputs.size();
  out.cache.h.reserve(steps);
  for (std::size_t t = 1; t <= steps; ++t) {
    Matrix h = matmul(p.w_xh, inputs[t - 1]);
    matmul_add(h, p.w_hh, out.cache.hidden(t - 1));
    add_bias(h, p.bias);
    for (double& v : h.data()) v = std::tanh(v);
    check_finite(h, t, "vanilla_rnn_forward");
    if (p.mode == HeadMode::kPerStep || t == steps) out.logits.push_back(apply_head(p.head, h));
    out.cache.h.push_back(std::move(h));
  }
  return out;
}

GradBundle vanilla_rnn_backward(const RnnParams& p, const RnnCache& cache, std::span<const Matrix> grad_logits,
                                const HiddenGradHook& hook) {
  const std::size_t d_h = p.hidden_dim(), steps = cache.steps();
  if (cache.h0.rows() != d_h) throw ContractViolation("vanilla_rnn_backward: cache/params mismatch");
  check_grad_logits(grad_logits, p.mode, steps);
  const std::size_t batch = cache.h0.cols();

  Matrix g_wxh(d_h, p.w_xh.cols()), g_whh(d_h, d_h), g_head_w(p.head.weight.rows(), d_h);
  Vector g_bias(d_h, 0.0), g_head_b(p.head.bias.size(), 0.0);

  Matrix carry(d_h, batch);
  for (std::size_t t = steps; t >= 1; --t) {
    Matrix grad_h = carry;
    head_backward_step(p.head, p.mode, t, steps, cache.hidden(t), grad_logits, grad_h, g_head_w, g_head_b);
    if (hook) hook(t, grad_h);
    Matrix grad_z = std::move(grad_h);
    {
      auto gz = grad_z.data();
      const auto hv = cache.h[t - 1].data();
      for (std::size_t k = 0; k < gz.size(); ++k) gz[k] *= 1.0 - hv[k] * hv[k];
    }
    accumulate_row_sums(g_bias, grad_z);
    matmul_nt_add(g_wxh, grad_z, cache.inputs[t - 1]);
    matmul_nt_add(g_whh, grad_z, cache.hidden(t - 1));
    carry = matmul_tn(p.w_hh, grad_z);
    check_finite(carry, t, "vanilla_rnn_backward");
  }

  GradBundle g = p.zero_grad();
  g.at("w_xh").values = Vector(g_wxh.data().begin(), g_wxh.data().end());
  g.at("w_hh").values = Vector(g_whh.data().begin(), g_whh.data().end());
  g.at("bias").values = g_bias;
  g.at("head_w").values = Vector(g_head_w.data().begin(), g_head_w.data().end());
  g.at("head_b").values = g_head_b;
  return g;
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

std::vector<ParamView> LstmParams::views() {
  return {
      {"w_x", w_x.data(), {w_x.rows(), w_x.cols()}, LrGroup::kMain},
      {"w_h", w_h.data(), {w_h.rows(), w_h.cols()}, LrGroup::kMain},
      {"bias", bias, {bias.size()}, LrGroup::kMain},
      {"head_w", head.weight.data(), {head.weight.rows(), head.weight.cols()}, LrGroup::kMain},
      {"head_b", head.bias, {head.bias.size()}, LrGroup::kMain},
  };
}

GradBundle LstmParams::zero_grad() const {
  GradBundle g;
  g.add("w_x", {w_x.rows(), w_x.cols()});
  g.add("w_h", {w_h.rows(), w_h.cols()});
  g.add("bias", {bias.size()});
  g.add("head_w", {head.weight.rows(), head.weight.cols()});
  g.add("head_b", {head.bias.size()});
  return g;
}

LstmForward lstm_forward(const LstmParams& p, std::span<const Matrix> inputs, const Matrix& h0, const Matrix& c0) {
  const std::size_t d_h = p.hidden_dim();
  if (p.w_h.rows() != 4 * d_h || p.w_x.rows() != 4 * d_h || p.bias.size() != 4 * d_h)
    throw ContractViolation("lstm_forward: weight shapes disagree");
  if (c0.rows() != d_h || c0.cols() != h0.cols()) throw ContractViolation("lstm_forward: cell state shape mismatch");
  check_head(p.head, d_h);
  check_inputs(inputs, p.w_x.cols(), h0, d_h);

  const std::size_t batch = h0.cols(), steps = inputs.size();
  LstmForward out;
  LstmCache& cache = out.cache;
  cache.inputs.assign(inputs.begin(), inputs.end());
  cache.h0 = h0;
  cache.c0 = c0;
  for (std::size_t t = 1; t <= steps; ++t) {
    Matrix gates = matmul(p.w_x, inputs[t - 1]);
    matmul_add(gates, p.w_h, cache.hidden(t - 1));
    add_bias(gates, p.bias);
    for (std::size_t r = 0; r < 4 * d_h; ++r) {
      const bool candidate = r >= 2 * d_h && r < 3 * d_h;
      for (double& v : gates.row(r)) v = candidate ? std::tanh(v) : sigmoid(v);
    }
    Matrix c(d_h, batch), h(d_h, batch);
    const Matrix& c_prev = cache.cell(t - 1);
    for (std::size_t i = 0; i < d_h; ++i) {
      for (std::size_t b = 0; b < batch; ++b) {
        const double ig = gates(i, b), fg = gates(d_h + i, b), cg = gates(2 * d_h + i, b), og = gates(3 * d_h + i, b);
        c(i, b) = fg * c_prev(i, b) + ig * cg;
        h(i, b) = og * std::tanh(c(i, b));
      }
    }
    check_finite(h, t, "lstm_forward");
    if (p.mode == HeadMode::kPerStep || t == steps) out.logits.push_back(apply_head(p.head, h));
    cache.gates.push_back(std::move(gates));
    cache.c.push_back(std::move(c));
    cache.h.push_back(std::move(h));
  }
  return out;
}

GradBundle lstm_backward(const LstmParams& p, const LstmCache& cache, std::span<const Matrix> grad_logits,
                         const HiddenGradHook& hook) {
  const std::size_t d_h = p.hidden_dim(), steps = cache.steps();
  if (cache.h0.rows() != d_h) throw ContractViolation("lstm_backward: cache/params mismatch");
  check_grad_logits(grad_logits, p.mode, steps);
  const std::size_t batch = cache.h0.cols();

  Matrix g_wx(4 * d_h, p.w_x.cols()), g_wh(4 * d_h, d_h), g_head_w(p.head.weight.rows(), d_h);
  Vector g_bias(4 * d_h, 0.0), g_head_b(p.head.bias.size(), 0.0);

  Matrix carry_h(d_h, batch), carry_c(d_h, batch);
  for (std::size_t t = steps; t >= 1; --t) {
    Matrix grad_h = carry_h;
    head_backward_step(p.head, p.mode, t, steps, cache.hidden(t), grad_logits, grad_h, g_head_w, g_head_b);
    if (hook) hook(t, grad_h);

    const Matrix& gates = cache.gates[t - 1];
    const Matrix& c = cache.c[t - 1];
    const Matrix& c_prev = cache.cell(t - 1);
    Matrix grad_pre(4 * d_h, batch);
    for (std::size_t i = 0; i < d_h; ++i) {
      for (std::size_t b = 0; b < batch; ++b) {
        const double ig = gates(i, b), fg = gates(d_h + i, b), cg = gates(2 * d_h + i, b), og = gates(3 * d_h + i, b);
        const double tc = std::tanh(c(i, b));
        const double gh = grad_h(i, b);
        const double gc = carry_c(i, b) + gh * og * (1.0 - tc * tc);
        grad_pre(i, b) = gc * cg * ig * (1.0 - ig);
        grad_pre(d_h + i, b) = gc * c_prev(i, b) * fg * (1.0 - fg);
        grad_pre(2 * d_h + i, b) = gc * ig * (1.0 - cg * cg);
        grad_pre(3 * d_h + i, b) = gh * tc * og * (1.0 - og);
        carry_c(i, b) = gc * fg;
      }
    }
    accumulate_row_sums(g_bias, grad_pre);
    matmul_nt_add(g_wx, grad_pre, cache.inputs[t - 1]);
    matmul_nt_add(g_wh, grad_pre, cache.hidden(t - 1));
    carry_h = matmul_tn(p.w_h, grad_pre);
    check_finite(carry_h, t, "lstm_backward");
  }

  GradBundle g = p.zero_grad();
  g.at("w_x").values = Vector(g_wx.data().begin(), g_wx.data().end());
  g.at("w_h").values = Vector(g_wh.data().begin(), g_wh.data().end());
  g.at("bias").values = g_bias;
  g.at("head_w").values = Vector(g_head_w.data().begin(), g_head_w.data().end());
  g.at("head_b").values = g_head_b;
  return g;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

LossResult loss_and_grad(std::span<const Matrix> logits, const TargetGrid& targets, const MaskGrid& mask) {
  if (targets.size() != logits.size() || mask.size() != logits.size())
    throw ContractViolation("loss_and_grad: position count mismatch");
  LossResult out;
  for (std::size_t p = 0; p < logits.size(); ++p) {
    if (targets[p].size() != logits[p].cols() || mask[p].size() != logits[p].cols())
      throw ContractViolation("loss_and_grad: batch size mismatch");
    for (std::uint8_t m : mask[p]) out.positions += m ? 1 : 0;
  }
  if (out.positions == 0) throw ContractViolation("loss_and_grad: mask selects no positions");
  const double inv_n = 1.0 / static_cast<double>(out.positions);

  double total = 0.0;
  out.grad_logits.reserve(logits.size());
  for (std::size_t p = 0; p < logits.size(); ++p) {
    const Matrix& x = logits[p];
    Matrix g(x.rows(), x.cols());
    for (std::size_t b = 0; b < x.cols(); ++b) {
      if (!mask[p][b]) continue;
      const int target = targets[p][b];
      if (target < 0 || static_cast<std::size_t>(target) >= x.rows())
        throw ContractViolation("loss_and_grad: target id out of range");
      double mx = -std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t k = 0; k < x.rows(); ++k) {
        if (x(k, b) > mx) {
          mx = x(k, b);
          arg = k;
        }
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < x.rows(); ++k) sum += std::exp(x(k, b) - mx);
      const double log_z = mx + std::log(sum);
      total += log_z - x(static_cast<std::size_t>(target), b);
      for (std::size_t k = 0; k < x.rows(); ++k) g(k, b) = std::exp(x(k, b) - log_z) * inv_n;
      g(static_cast<std::size_t>(target), b) -= inv_n;
      if (arg == static_cast<std::size_t>(target)) ++out.correct;
    }
    out.grad_logits.push_back(std::move(g));
  }
  out.loss = total * inv_n;
  return out;
}

}  // namespace asrnn
