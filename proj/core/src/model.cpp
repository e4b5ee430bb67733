#include "asrnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "asrnn/error.hpp"
#include "asrnn/rng.hpp"

namespace asrnn {
namespace {

Head init_head(const ModelDims& dims, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
  Head h{Matrix(dims.output, dims.hidden), Vector(dims.output, 0.0)};
  for (double& v : h.weight.data()) v = rng.uniform(-bound, bound);
  return h;
}

void require_dims(const ModelDims& d) {
  if (d.input == 0 || d.hidden == 0 || d.output == 0) throw ContractViolation("model dims must be positive");
}

void require_state(const RecurrentState& s, std::size_t n) {
  if (s.size() != n) throw ContractViolation("recurrent state has the wrong number of components");
}

}  // namespace

std::string_view to_string(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::kAsRnn: return "asrnn";
    case ModelKind::kRnn: return "rnn";
    case ModelKind::kLstm: return "lstm";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "asrnn") return ModelKind::kAsRnn;
  if (s == "rnn") return ModelKind::kRnn;
  if (s == "lstm") return ModelKind::kLstm;
  throw ContractViolation("unknown model '" + std::string(s) + "'");
}

AsRnnParams init_asrnn_params(const ModelDims& dims, const ModelInit& init) {
  require_dims(dims);
  InitSpec hh = init.recurrent;
  hh.rng_seed = split_seed(init.seed, 101);
  InitSpec f = init.recurrent;
  f.scheme = init.uf_scheme;
  f.rng_seed = split_seed(init.seed, 102);
  InitSpec s = init.recurrent;
  s.rng_seed = split_seed(init.seed, 103);
  Rng rng(split_seed(init.seed, 104));

  AsRnnParams p;
  p.w_xh = init_semi_orthogonal(dims.hidden, dims.input, split_seed(init.seed, 105));
  p.skew_hh = init_skew(hh, dims.hidden);
  p.skew_f = init_skew(f, dims.hidden);
  p.diag_f = init_seed_vector(s, dims.hidden);
  p.bias = Vector(dims.hidden, 0.0);
  p.head = init_head(dims, rng);
  p.mode = dims.mode;
  return p;
}

RnnParams init_rnn_params(const ModelDims& dims, const ModelInit& init) {
  require_dims(dims);
  Rng rng(split_seed(init.seed, 201));
  // Glorot-uniform recurrent and input maps.
  auto glorot = [&rng](std::size_t rows, std::size_t cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-bound, bound);
    return m;
  };
  RnnParams p;
  p.w_xh = glorot(dims.hidden, dims.input);
  p.w_hh = glorot(dims.hidden, dims.hidden);
  p.bias = Vector(dims.hidden, 0.0);
  p.head = init_head(dims, rng);
  p.mode = dims.mode;
  return p;
}

LstmParams init_lstm_params(const ModelDims& dims, const ModelInit& init) {
  require_dims(dims);
  Rng rng(split_seed(init.seed, 301));
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
  LstmParams p;
  p.w_x = Matrix(4 * dims.hidden, dims.input);
  p.w_h = Matrix(4 * dims.hidden, dims.hidden);
  for (double& v : p.w_x.data()) v = rng.uniform(-bound, bound);
  for (double& v : p.w_h.data()) v = rng.uniform(-bound, bound);
  p.bias = Vector(4 * dims.hidden, 0.0);
  std::fill(p.bias.begin() + static_cast<long>(dims.hidden), p.bias.begin() + static_cast<long>(2 * dims.hidden),
            kLstmForgetBias);
  p.head = init_head(dims, rng);
  p.mode = dims.mode;
  return p;
}

std::unique_ptr<Model> make_model(ModelKind kind, const ModelDims& dims, const ModelInit& init) {
  switch (kind) {
    case ModelKind::kAsRnn: return std::make_unique<AsRnnModel>(dims, init_asrnn_params(dims, init));
    case ModelKind::kRnn: return std::make_unique<RnnModel>(dims, init_rnn_params(dims, init));
    case ModelKind::kLstm: return std::make_unique<LstmModel>(dims, init_lstm_params(dims, init));
  }
  throw ContractViolation("make_model: unknown kind");
}

// --- asRNN -----------------------------------------------------------------

AsRnnModel::AsRnnModel(ModelDims dims, AsRnnParams params) : Model(dims), params_(std::move(params)) {}

RecurrentState AsRnnModel::zero_state(std::size_t batch) const { return {Matrix(dims_.hidden, batch)}; }

std::vector<Matrix> AsRnnModel::forward(std::span<const Matrix> inputs, const RecurrentState& initial) {
  require_state(initial, 1);
  AsRnnForward out = asrnn_forward(params_.materialize(), inputs, initial[0]);
  cache_ = std::move(out.cache);
  return std::move(out.logits);
}

RecurrentState AsRnnModel::final_state() const { return {cache_.hidden(cache_.steps())}; }

GradBundle AsRnnModel::backward(std::span<const Matrix> grad_logits, const HiddenGradHook& hook) {
  return asrnn_backward(params_, cache_, grad_logits, hook);
}

// --- vanilla RNN -------------------------------------------------------------

RnnModel::RnnModel(ModelDims dims, RnnParams params) : Model(dims), params_(std::move(params)) {}

RecurrentState RnnModel::zero_state(std::size_t batch) const { return {Matrix(dims_.hidden, batch)}; }

std::vector<Matrix> RnnModel::forward(std::span<const Matrix> inputs, const RecurrentState& initial) {
  require_state(initial, 1);
  RnnForward out = vanilla_rnn_forward(params_, inputs, initial[0]);
  cache_ = std::move(out.cache);
  return std::move(out.logits);
}

RecurrentState RnnModel::final_state() const { return {cache_.hidden(cache_.steps())}; }

GradBundle RnnModel::backward(std::span<const Matrix> grad_logits, const HiddenGradHook& hook) {
  return vanilla_rnn_backward(params_, cache_, grad_logits, hook);
}

// --- LSTM --------------------------------------------------------------------

LstmModel::LstmModel(ModelDims dims, LstmParams params) : Model(dims), params_(std::move(params)) {}

RecurrentState LstmModel::zero_state(std::size_t batch) const {
  return {Matrix(dims_.hidden, batch), Matrix(dims_.hidden, batch)};
}

std::vector<Matrix> LstmModel::forward(std::span<const Matrix> inputs, const RecurrentState& initial) {
  require_state(initial, 2);
  LstmForward out = lstm_forward(params_, inputs, initial[0], initial[1]);
  cache_ = std::move(out.cache);
  return std::move(out.logits);
}

RecurrentState LstmModel::final_state() const {
  return {cache_.hidden(cache_.steps()), cache_.cell(cache_.steps())};
}

GradBundle LstmModel::backward(std::span<const Matrix> grad_logits, const HiddenGradHook& hook) {
  return lstm_backward(params_, cache_, grad_logits, hook);
}

// --- parameter transfer ------------------------------------------------------

void load_parameters(Model& model, const TensorBundle& values) {
  auto views = model.parameters();
  for (auto& v : views) {
    const Tensor& t = values.at(v.name);
    if (t.values.size() != v.values.size())
      throw ContractViolation("load_parameters: size mismatch for '" + std::string(v.name) + "'");
    std::copy(t.values.begin(), t.values.end(), v.values.begin());
  }
}

TensorBundle export_parameters(Model& model) {
  TensorBundle out;
  for (const auto& v : model.parameters()) {
    Tensor& t = out.add(std::string(v.name), v.shape, v.group);
    std::copy(v.values.begin(), v.values.end(), t.values.begin());
  }
  return out;
}

}  // namespace asrnn
