#include "asrnn/optim.hpp"

#include <cmath>
#include <string>

#include "asrnn/error.hpp"

namespace asrnn {

void OptimConfig::validate() const {
  if (!(lr_main > 0.0)) throw ContractViolation("optim: lr must be > 0");
  if (!(lr_recurrent > 0.0)) throw ContractViolation("optim: lr_whh must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ContractViolation("optim: alpha must lie in (0, 1)");
  if (clip_norm && !(*clip_norm > 0.0)) throw ContractViolation("optim: clip_norm must be > 0");
  if (!(epsilon_denominator > 0.0)) throw ContractViolation("optim: eps must be > 0");
}

double clip_global_norm(GradBundle& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ContractViolation("clip_global_norm: max_norm must be > 0");
  const double total = grads.global_norm();
  if (total > max_norm) grads.scale(max_norm / total);
  return total;
}

void rmsprop_step(OptimState& state, std::span<const ParamView> params, const GradBundle& grads,
                  const OptimConfig& cfg) {
  if (params.size() != grads.size()) throw ContractViolation("rmsprop_step: parameter/gradient count mismatch");
  if (state.mean_square.size() == 0) state.mean_square = grads.zeros_like();
  if (!state.mean_square.same_layout(grads)) throw ContractViolation("rmsprop_step: optimizer state layout mismatch");

  for (std::size_t k = 0; k < params.size(); ++k) {
    const ParamView& p = params[k];
    const Tensor& g = grads[k];
    Tensor& v = state.mean_square[k];
    if (p.name != g.name || p.values.size() != g.values.size())
      throw ContractViolation("rmsprop_step: shape mismatch for '" + g.name + "'");
    const double lr = p.group == LrGroup::kRecurrent ? cfg.lr_recurrent : cfg.lr_main;
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      const double gi = g.values[i];
      v.values[i] = cfg.alpha * v.values[i] + (1.0 - cfg.alpha) * gi * gi;
      p.values[i] -= lr * gi / (std::sqrt(v.values[i]) + cfg.epsilon_denominator);
    }
  }
  ++state.step;
}

}  // namespace asrnn
