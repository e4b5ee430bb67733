#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "asrnn/tensor_bundle.hpp"

namespace asrnn {

struct OptimConfig {
  double lr_main = 1e-3;
  double lr_recurrent = 1e-4;        // skew generators ("lr W_hh")
  double alpha = 0.9;                // RMSProp accumulator decay
  std::optional<double> clip_norm;   // global-norm clipping; nullopt disables
  double epsilon_denominator = 1e-8;

  friend bool operator==(const OptimConfig&, const OptimConfig&) = default;

  /// Throws ContractViolation when a field is out of range.
  void validate() const;
};

struct OptimState {
  TensorBundle mean_square;  // v, same layout as the gradients
  std::uint64_t step = 0;
};

/// Rescales every tensor by max_norm / total when the global L2 norm exceeds
/// max_norm. Returns the norm before clipping.
double clip_global_norm(GradBundle& grads, double max_norm);

/// v <- alpha v + (1 - alpha) g^2;  theta <- theta - lr_group g / (sqrt(v) + eps).
void rmsprop_step(OptimState& state, std::span<const ParamView> params, const GradBundle& grads,
                  const OptimConfig& cfg);

}  // namespace asrnn
