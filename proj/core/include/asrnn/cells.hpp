#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "asrnn/matrix.hpp"
#include "asrnn/parameterization.hpp"
#include "asrnn/tensor_bundle.hpp"

namespace asrnn {

// All cells process a minibatch at once. A sequence is a vector of T matrices,
// one per timestep, each laid out features x batch (one column per sample).
using Sequence = std::vector<Matrix>;

enum class HeadMode {
  kFinalState,  // one logits matrix computed from h_T
  kPerStep,     // one logits matrix per timestep, shared weights
};

/// Linear readout: logits = weight * h + bias.
struct Head {
  Matrix weight;  // d_out x d_h
  Vector bias;    // d_out
};

Matrix apply_head(const Head& head, const Matrix& hidden);

/// Called during backward with dL/dh_t (d_h x batch) for t = T..1.
using HiddenGradHook = std::function<void(std::size_t t, const Matrix& grad_hidden)>;

// ---------------------------------------------------------------------------
// asRNN
//
//   z_t = W_xh x_t + W_hh h_{t-1} + b
//   a_t = tanh(W_f z_t),            W_f = U_f D_f
//   h_t = W_f^{-1} a_t = D_f^{-1} U_f^T a_t
// ---------------------------------------------------------------------------

/// The matrices the recurrence actually multiplies by. W_hh need not be
/// orthogonal here; diagnostics build arbitrary instances directly.
struct AsRnnWeights {
  Matrix w_xh;  // d_h x d_x
  Matrix w_hh;  // d_h x d_h
  Matrix u_f;   // d_h x d_h
  Vector d_f;   // d_h, diagonal of D_f
  Vector bias;  // d_h
  Head head;
  HeadMode mode = HeadMode::kPerStep;

  std::size_t hidden_dim() const noexcept { return w_hh.rows(); }
  std::size_t input_dim() const noexcept { return w_xh.cols(); }
};

/// Learnable tensors of the cell.
struct AsRnnParams {
  Matrix w_xh;
  SkewParam skew_hh;
  SkewParam skew_f;
  DiagonalParam diag_f;
  Vector bias;
  Head head;
  HeadMode mode = HeadMode::kPerStep;

  std::size_t hidden_dim() const noexcept { return skew_hh.dim(); }
  /// Refreshes both orthogonal caches and snapshots the effective weights.
  AsRnnWeights materialize();
  /// Views in GradBundle order; marks both skew caches stale.
  std::vector<ParamView> views();
  GradBundle zero_grad() const;
};

/// Everything the backward pass and the Jacobian diagnostics need.
struct BpttCache {
  AsRnnWeights weights;
  Sequence inputs;
  Matrix h0;
  std::vector<Matrix> z;  // pre-activations
  std::vector<Matrix> a;  // tanh(W_f z_t) == W_f h_t
  std::vector<Matrix> h;  // hidden states h_1..h_T

  std::size_t steps() const noexcept { return h.size(); }
  /// h_t for t in [0, T]; h_0 is the initial state.
  const Matrix& hidden(std::size_t t) const { return t == 0 ? h0 : h[t - 1]; }
};

struct AsRnnForward {
  BpttCache cache;
  std::vector<Matrix> logits;  // T matrices (per-step) or 1 (final state)
};

/// Throws SingularSaturation if some d_f,i == 0 and NumericFault on NaN/Inf.
AsRnnForward asrnn_forward(const AsRnnWeights& weights, std::span<const Matrix> inputs, const Matrix& h0);

/// Gradients with respect to the materialized matrices.
struct AsRnnWeightGrads {
  Matrix w_xh, w_hh, u_f;
  Vector d_f, bias;
  Matrix head_w;
  Vector head_b;
};

AsRnnWeightGrads asrnn_backward_weights(const BpttCache& cache, std::span<const Matrix> grad_logits,
                                        const HiddenGradHook& hook = {});

/// Exact reverse-mode gradients for every free parameter, chained through
/// the exponential and |s| + epsilon parameterizations.
GradBundle asrnn_backward(const AsRnnParams& params, const BpttCache& cache, std::span<const Matrix> grad_logits,
                          const HiddenGradHook& hook = {});

// ---------------------------------------------------------------------------
// Vanilla tanh RNN: h_t = tanh(W_xh x_t + W_hh h_{t-1} + b)
// ---------------------------------------------------------------------------

struct RnnParams {
  Matrix w_xh;
  Matrix w_hh;
  Vector bias;
  Head head;
  HeadMode mode = HeadMode::kPerStep;

  std::size_t hidden_dim() const noexcept { return w_hh.rows(); }
  std::vector<ParamView> views();
  GradBundle zero_grad() const;
};

struct RnnCache {
  Sequence inputs;
  Matrix h0;
  std::vector<Matrix> h;

  std::size_t steps() const noexcept { return h.size(); }
  const Matrix& hidden(std::size_t t) const { return t == 0 ? h0 : h[t - 1]; }
};

struct RnnForward {
  RnnCache cache;
  std::vector<Matrix> logits;
};

RnnForward vanilla_rnn_forward(const RnnParams& params, std::span<const Matrix> inputs, const Matrix& h0);
GradBundle vanilla_rnn_backward(const RnnParams& params, const RnnCache& cache, std::span<const Matrix> grad_logits,
                                const HiddenGradHook& hook = {});

// ---------------------------------------------------------------------------
// LSTM, gate rows stacked as [input, forget, cell candidate, output].
// ---------------------------------------------------------------------------

struct LstmParams {
  Matrix w_x;   // 4 d_h x d_x
  Matrix w_h;   // 4 d_h x d_h
  Vector bias;  // 4 d_h
  Head head;
  HeadMode mode = HeadMode::kPerStep;

  std::size_t hidden_dim() const noexcept { return w_h.cols(); }
  std::vector<ParamView> views();
  GradBundle zero_grad() const;
};

inline constexpr double kLstmForgetBias = 1.0;

struct LstmCache {
  Sequence inputs;
  Matrix h0, c0;
  std::vector<Matrix> gates;  // activated gates, 4 d_h x batch
  std::vector<Matrix> c;
  std::vector<Matrix> h;

  std::size_t steps() const noexcept { return h.size(); }
  const Matrix& hidden(std::size_t t) const { return t == 0 ? h0 : h[t - 1]; }
  const Matrix& cell(std::size_t t) const { return t == 0 ? c0 : c[t - 1]; }
};

struct LstmForward {
  LstmCache cache;
  std::vector<Matrix> logits;
};

LstmForward lstm_forward(const LstmParams& params, std::span<const Matrix> inputs, const Matrix& h0,
                         const Matrix& c0);
GradBundle lstm_backward(const LstmParams& params, const LstmCache& cache, std::span<const Matrix> grad_logits,
                         const HiddenGradHook& hook = {});

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// targets[p][b] is the class id for logits[p] column b; mask[p][b] selects
/// the contributing positions.
using TargetGrid = std::vector<std::vector<int>>;
using MaskGrid = std::vector<std::vector<std::uint8_t>>;

struct LossResult {
  double loss = 0.0;                // mean masked softmax cross-entropy, nats
  std::vector<Matrix> grad_logits;  // d loss / d logits
  std::size_t positions = 0;        // number of contributing positions
  std::size_t correct = 0;          // argmax hits among them
};

/// Throws ContractViolation on shape mismatch or an empty mask.
LossResult loss_and_grad(std::span<const Matrix> logits, const TargetGrid& targets, const MaskGrid& mask);

}  // namespace asrnn
