#include "fixtures.hpp"

#include "asrnn/linalg.hpp"
#include "asrnn/rng.hpp"
#include "oracles.hpp"

namespace fixture {

AsRnnWeights random_asrnn_weights(std::size_t hidden, std::size_t input, std::size_t output, HeadMode mode,
                                  std::uint64_t seed) {
  AsRnnWeights w;
  w.w_xh = oracle::random_matrix(hidden, input, seed + 1, 0.5);
  w.w_hh = expm(oracle::random_skew(hidden, seed + 2, 0.7));
  w.u_f = expm(oracle::random_skew(hidden, seed + 3, 0.7));
  Rng rng(seed + 4);
  w.d_f.resize(hidden);
  for (double& d : w.d_f) d = rng.uniform(0.5, 1.5);
  w.bias.resize(hidden);
  for (double& b : w.bias) b = rng.uniform(-0.3, 0.3);
  w.head.weight = oracle::random_matrix(output, hidden, seed + 5, 0.5);
  w.head.bias.resize(output);
  for (double& b : w.head.bias) b = rng.uniform(-0.3, 0.3);
  w.mode = mode;
  return w;
}

AsRnnWeights with_identity_saturation(AsRnnWeights w) {
  w.u_f = Matrix::identity(w.hidden_dim());
  w.d_f.assign(w.hidden_dim(), 1.0);
  return w;
}

RnnParams shared_rnn_params(const AsRnnWeights& w) { return RnnParams{w.w_xh, w.w_hh, w.bias, w.head, w.mode}; }

Sequence random_sequence(std::size_t steps, std::size_t input, std::size_t batch, std::uint64_t seed, double scale) {
  Sequence s;
  for (std::size_t t = 0; t < steps; ++t) s.push_back(oracle::random_matrix(input, batch, seed * 131 + t, scale));
  return s;
}

std::vector<Matrix> random_grad_logits(const std::vector<Matrix>& logits, std::uint64_t seed) {
  std::vector<Matrix> g;
  for (std::size_t i = 0; i < logits.size(); ++i)
    g.push_back(oracle::random_matrix(logits[i].rows(), logits[i].cols(), seed * 977 + i));
  return g;
}

TheoremInstance theorem_instance(std::size_t hidden, std::size_t input, std::size_t horizon, double whh_scale,
                                 std::uint64_t seed, double tiny_df) {
  TheoremInstance inst;
  inst.horizon = horizon;
  AsRnnWeights& w = inst.weights;
  w.w_xh = oracle::random_matrix(hidden, input, seed + 11, 0.5);
  w.w_hh = oracle::random_signed_permutation(hidden, seed + 12);
  w.w_hh *= whh_scale;
  w.u_f = oracle::random_signed_permutation(hidden, seed + 13);
  Rng rng(seed + 14);
  w.bias.resize(hidden);
  for (double& b : w.bias) b = rng.uniform(-0.2, 0.2);
  w.head.weight = Matrix(2, hidden);
  w.head.bias.assign(2, 0.0);
  w.mode = HeadMode::kPerStep;

  // Columns with ||x||_2 uniform in [0, 1] keep C_x = 1 valid.
  for (std::size_t t = 0; t < horizon; ++t) {
    Matrix x = oracle::random_matrix(input, 3, seed * 1000 + t);
    for (std::size_t c = 0; c < x.cols(); ++c) {
      double norm = 0.0;
      for (std::size_t r = 0; r < input; ++r) norm += x(r, c) * x(r, c);
      const double target = rng.uniform(0.0, 1.0) / std::sqrt(norm);
      for (std::size_t r = 0; r < input; ++r) x(r, c) *= target;
    }
    inst.inputs.push_back(std::move(x));
  }
  inst.h0 = Matrix(hidden, 3);

  w.d_f.assign(hidden, 1.0);
  const TheoremReport probe = theorem_precondition_check(w, inst.c_x, horizon);
  if (probe.df_bound_degenerate) {
    w.d_f.assign(hidden, tiny_df);
  } else {
    for (double& d : w.d_f) d = probe.df_bound * rng.uniform(0.5, 1.0);
  }
  return inst;
}

}  // namespace fixture
