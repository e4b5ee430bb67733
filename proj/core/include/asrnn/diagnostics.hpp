#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "asrnn/cells.hpp"
#include "asrnn/linalg.hpp"

namespace asrnn {

/// Backpropagation Jacobian dh_t/dh_{t-1} = D_f^{-1} U_f^T D_t U_f D_f W_hh,
/// with D_t = diag(1 - a_t^2) read from the cache for one batch column.
Matrix step_jacobian(const BpttCache& cache, std::size_t t, std::size_t sample = 0);

struct JacobianWindow {
  std::size_t t1 = 0, t2 = 0;
  std::vector<Matrix> steps;  // J(t1+1) .. J(t2)
  Matrix product;             // J(t2) ... J(t1+1); identity when t1 == t2
  SpectralReport spectrum;
};

JacobianWindow window_jacobian(const BpttCache& cache, std::size_t t1, std::size_t t2, std::size_t sample = 0);

/// Numerical instantiation of the hypotheses that guarantee sigma_min(J(t)) >= 1.
///
/// df_bound = arctanh(sqrt(1 - ||W_hh^{-1}||_2))
///            / ((||W_xh||_2 C_x + ||b||_inf) * sum_{i<t} (||W_hh||_max + 1)^i)
///
/// When ||W_hh^{-1}||_2 >= 1 the numerator is taken as 0 and
/// `df_bound_degenerate` is set; a zero denominator gives +inf. Group distances
/// are certified upper bounds (spectral residual of the Frobenius-nearest member).
struct TheoremReport {
  std::size_t horizon = 0;
  double c_x = 1.0;

  double df_norm = 0.0;        // ||D_f||_2 = max_i d_f,i
  double df_sigma_min = 0.0;   // min_i d_f,i
  double df_bound = 0.0;
  bool df_bound_degenerate = false;

  double whh_sigma_min = 0.0;
  double whh_inverse_norm = 0.0;  // ||W_hh^{-1}||_2 = 1 / sigma_min(W_hh)
  double whh_max_norm = 0.0;      // ||W_hh||_max
  double wxh_norm = 0.0;          // ||W_xh||_2
  double bias_inf_norm = 0.0;
  double bound_numerator = 0.0;
  double bound_denominator = 0.0;
  double geometric_sum = 0.0;

  double whh_group_dist_upper = 0.0;  // distance to generalized permutations
  double whh_dist_bound = 0.0;        // sigma_min(D_f) / ||D_f||_2
  double uf_group_dist_upper = 0.0;   // distance to signed permutations

  double saturation_bound = 0.0;  // 1 - 1 / sigma_min(W_hh)
  std::optional<double> sigma_min_window;

  bool preconditions_hold = false;
};

inline constexpr double kDefaultInputBound = 1.0;

TheoremReport theorem_precondition_check(const AsRnnWeights& weights, double c_x, std::size_t horizon);

struct SaturationStats {
  std::vector<double> max_abs_per_step;  // max_i |a_t,i| over the whole batch, t = 1..T
  double max_overall = 0.0;
  double bound = 0.0;        // 1 - 1 / sigma_min(W_hh)
  bool bound_applies = false;  // preconditions held for the supplied report
  bool within_bound = false;   // max_overall <= bound
};

SaturationStats saturation_stats(const BpttCache& cache, const TheoremReport* report = nullptr);

/// Observer recording ||dL/dh_t||_F (over the batch) at selected timesteps,
/// one record per backward pass.
class GradientNormTrace {
 public:
  explicit GradientNormTrace(std::vector<std::size_t> steps);

  /// Starts a new record and returns the hook for the next backward call.
  HiddenGradHook begin_record();
  const std::vector<std::size_t>& steps() const noexcept { return steps_; }
  const std::vector<std::vector<double>>& records() const noexcept { return records_; }

 private:
  std::vector<std::size_t> steps_;
  std::vector<std::vector<double>> records_;
};

std::string to_json(const TheoremReport& report);
std::string to_json(const JacobianWindow& window);
std::string to_json(const SaturationStats& stats);

}  // namespace asrnn
