#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "asrnn/cells.hpp"
#include "asrnn/parameterization.hpp"
#include "asrnn/tensor_bundle.hpp"

namespace asrnn {

enum class ModelKind { kAsRnn, kRnn, kLstm };

std::string_view to_string(ModelKind k) noexcept;
ModelKind parse_model_kind(std::string_view s);

struct ModelDims {
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::size_t output = 0;
  HeadMode mode = HeadMode::kPerStep;
};

struct ModelInit {
  InitSpec recurrent;                           // W_hh generator, seed vector s, epsilon
  InitScheme uf_scheme = InitScheme::kIdentity;  // U_f generator
  std::uint64_t seed = 0;                       // all other tensors
};

/// Recurrent state carried between calls: {h} or {h, c} for the LSTM.
using RecurrentState = std::vector<Matrix>;

/// Common training surface over the three cells. forward() retains the cache
/// that the next backward() consumes.
class Model {
 public:
  virtual ~Model() = default;

  virtual ModelKind kind() const noexcept = 0;
  const ModelDims& dims() const noexcept { return dims_; }

  virtual RecurrentState zero_state(std::size_t batch) const = 0;
  virtual std::vector<Matrix> forward(std::span<const Matrix> inputs, const RecurrentState& initial) = 0;
  /// State after the last forward() call.
  virtual RecurrentState final_state() const = 0;
  virtual GradBundle backward(std::span<const Matrix> grad_logits, const HiddenGradHook& hook = {}) = 0;

  /// Mutable views in gradient order. Taking the views marks derived caches stale.
  virtual std::vector<ParamView> parameters() = 0;
  virtual GradBundle zero_grad() const = 0;

 protected:
  explicit Model(ModelDims dims) : dims_(dims) {}
  ModelDims dims_;
};

class AsRnnModel final : public Model {
 public:
  AsRnnModel(ModelDims dims, AsRnnParams params);
  ModelKind kind() const noexcept override { return ModelKind::kAsRnn; }
  RecurrentState zero_state(std::size_t batch) const override;
  std::vector<Matrix> forward(std::span<const Matrix> inputs, const RecurrentState& initial) override;
  RecurrentState final_state() const override;
  GradBundle backward(std::span<const Matrix> grad_logits, const HiddenGradHook& hook = {}) override;
  std::vector<ParamView> parameters() override { return params_.views(); }
  GradBundle zero_grad() const override { return params_.zero_grad(); }

  AsRnnParams& params() noexcept { return params_; }
  const BpttCache& cache() const noexcept { return cache_; }

 private:
  AsRnnParams params_;
  BpttCache cache_;
};

class RnnModel final : public Model {
 public:
  RnnModel(ModelDims dims, RnnParams params);
  ModelKind kind() const noexcept override { return ModelKind::kRnn; }
  RecurrentState zero_state(std::size_t batch) const override;
  std::vector<Matrix> forward(std::span<const Matrix> inputs, const RecurrentState& initial) override;
  RecurrentState final_state() const override;
  GradBundle backward(std::span<const Matrix> grad_logits, const HiddenGradHook& hook = {}) override;
  std::vector<ParamView> parameters() override { return params_.views(); }
  GradBundle zero_grad() const override { return params_.zero_grad(); }

  RnnParams& params() noexcept { return params_; }

 private:
  RnnParams params_;
  RnnCache cache_;
};

class LstmModel final : public Model {
 public:
  LstmModel(ModelDims dims, LstmParams params);
  ModelKind kind() const noexcept override { return ModelKind::kLstm; }
  RecurrentState zero_state(std::size_t batch) const override;
  std::vector<Matrix> forward(std::span<const Matrix> inputs, const RecurrentState& initial) override;
  RecurrentState final_state() const override;
  GradBundle backward(std::span<const Matrix> grad_logits, const HiddenGradHook& hook = {}) override;
  std::vector<ParamView> parameters() override { return params_.views(); }
  GradBundle zero_grad() const override { return params_.zero_grad(); }

  LstmParams& params() noexcept { return params_; }

 private:
  LstmParams params_;
  LstmCache cache_;
};

AsRnnParams init_asrnn_params(const ModelDims& dims, const ModelInit& init);
RnnParams init_rnn_params(const ModelDims& dims, const ModelInit& init);
LstmParams init_lstm_params(const ModelDims& dims, const ModelInit& init);

std::unique_ptr<Model> make_model(ModelKind kind, const ModelDims& dims, const ModelInit& init);

/// Copies flat values into the model's parameters (matching order and sizes).
void load_parameters(Model& model, const TensorBundle& values);
/// Snapshot of the model's parameters as a TensorBundle.
TensorBundle export_parameters(Model& model);

}  // namespace asrnn
