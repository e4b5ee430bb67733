#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "asrnn/matrix.hpp"

namespace asrnn {

/// Orthogonal matrix parameterized as exp(A) of a skew-symmetric generator A.
///
/// Only the strict upper triangle of A is stored (row-major, i < j), so any
/// update to the free parameters keeps A exactly skew-symmetric and exp(A)
/// orthogonal up to the accuracy of expm. The materialized matrix is cached
/// and recomputed after the free parameters have been handed out mutably.
class SkewParam {
 public:
  explicit SkewParam(std::size_t dim = 0);

  /// Takes the strict upper triangle of `generator`; throws unless it is exactly skew-symmetric.
  static SkewParam from_generator(const Matrix& generator);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t free_count() const noexcept { return upper_.size(); }
  std::span<const double> free_params() const noexcept { return upper_; }
  /// Marks the cached orthogonal matrix stale.
  std::span<double> mutable_free_params() noexcept;
  bool dirty() const noexcept { return dirty_; }

  Matrix generator() const;
  /// exp(generator), recomputed only when stale.
  const Matrix& materialize();

 private:
  std::size_t dim_;
  Vector upper_;
  Matrix cached_;
  bool dirty_ = true;
};

/// Returns exp(generator) and refreshes the cache.
const Matrix& materialize_orthogonal(SkewParam& p);

/// Gradient with respect to the free (upper-triangle) coordinates given the
/// gradient with respect to the materialized orthogonal matrix.
Vector backprop_orthogonal(const SkewParam& p, const Matrix& grad_q);

/// Positive diagonal d_i = |s_i| + epsilon.
struct DiagonalParam {
  Vector seed;
  double epsilon = 0.0;
};

Vector materialize_diagonal(const DiagonalParam& p);
/// grad_s_i = sign(s_i) * grad_d_i, with sign(0) = 0.
Vector backprop_diagonal(const DiagonalParam& p, std::span<const double> grad_d);

enum class InitScheme { kHenaff, kCayley, kIdentity };

std::string_view to_string(InitScheme s) noexcept;
InitScheme parse_init_scheme(std::string_view s);

struct InitSpec {
  InitScheme scheme = InitScheme::kHenaff;
  double uniform_lo = 0.0;  // a
  double uniform_hi = 0.0;  // b
  double epsilon = 0.0;
  std::uint64_t rng_seed = 0;
};

/// Block-diagonal generator with 2x2 blocks [[0, theta_j], [-theta_j, 0]];
/// the trailing row/column stays zero when `dim` is odd.
SkewParam skew_from_block_angles(std::span<const double> angles, std::size_t dim);

/// henaff: theta ~ U[-pi, pi]; cayley: theta = -sqrt((1 - cos u) / (1 + cos u)),
/// u ~ U[0, pi/2]; identity: zero generator.
SkewParam init_skew(const InitSpec& spec, std::size_t dim);

/// Gaussian matrix orthonormalized (twice-iterated modified Gram-Schmidt)
/// along its shorter dimension.
Matrix init_semi_orthogonal(std::size_t rows, std::size_t cols, std::uint64_t rng_seed);

/// s_i ~ U[a, b] i.i.d.; epsilon copied from the spec.
DiagonalParam init_seed_vector(const InitSpec& spec, std::size_t dim);

}  // namespace asrnn
