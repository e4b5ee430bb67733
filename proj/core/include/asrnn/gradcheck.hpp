#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "asrnn/model.hpp"

namespace asrnn {

/// Central-difference step.
inline constexpr double kGradcheckStep = 1e-5;
/// Denominator floor of the relative error: |g - fd| / max(|g|, |fd|, floor).
/// Coordinates whose true gradient is below the floor are held to an
/// absolute error of floor * tolerance instead.
inline constexpr double kGradcheckFloor = 1e-4;
/// Exit threshold used by the command-line gradcheck.
inline constexpr double kGradcheckCliTolerance = 1e-5;

struct GradcheckOptions {
  ModelKind model = ModelKind::kAsRnn;
  std::size_t hidden = 8;
  std::size_t input = 3;
  std::size_t output = 4;
  std::size_t steps = 5;
  std::size_t batch = 2;
  HeadMode mode = HeadMode::kPerStep;
  std::uint64_t seed = 0;
  double step = kGradcheckStep;
  /// Negative control: perturbs one analytic coordinate before comparison.
  bool corrupt = false;
};

struct TensorCheck {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
};

struct GradcheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;

  bool passes(double tolerance) const noexcept { return max_rel_error <= tolerance; }
};

/// Random instance (parameters, inputs, initial state, targets) drawn from
/// the seed; every analytic gradient coordinate is compared with a central
/// difference of the mean cross-entropy.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

std::string to_json(const GradcheckReport& report);

}  // namespace asrnn
