#pragma once

// Random instances and hand-built constructions shared by the unit and
// acceptance suites.

#include <cstddef>
#include <cstdint>

#include "asrnn/cells.hpp"
#include "asrnn/diagnostics.hpp"

namespace fixture {

using namespace asrnn;

/// Gaussian weights with W_hh orthogonal, U_f orthogonal and D_f in [0.5, 1.5].
AsRnnWeights random_asrnn_weights(std::size_t hidden, std::size_t input, std::size_t output, HeadMode mode,
                                  std::uint64_t seed);

/// The same weights with U_f = I and D_f = I.
AsRnnWeights with_identity_saturation(AsRnnWeights w);

/// Vanilla RNN sharing W_xh, W_hh, b and the head.
RnnParams shared_rnn_params(const AsRnnWeights& w);

Sequence random_sequence(std::size_t steps, std::size_t input, std::size_t batch, std::uint64_t seed,
                         double scale = 1.0);

/// Random logits-gradients of the right shapes for a forward pass.
std::vector<Matrix> random_grad_logits(const std::vector<Matrix>& logits, std::uint64_t seed);

/// Theorem construction: W_hh = scale * (signed permutation), U_f a signed
/// permutation, inputs with ||x||_2 <= 1. With scale > 1 D_f is drawn inside
/// the certified bound so the preconditions hold; with scale == 1 the bound
/// is degenerate and D_f is set to `tiny_df`.
struct TheoremInstance {
  AsRnnWeights weights;
  Sequence inputs;
  Matrix h0;
  double c_x = 1.0;
  std::size_t horizon = 0;
};

TheoremInstance theorem_instance(std::size_t hidden, std::size_t input, std::size_t horizon, double whh_scale,
                                 std::uint64_t seed, double tiny_df = 1e-12);

}  // namespace fixture
