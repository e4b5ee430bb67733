#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "asrnn/matrix.hpp"

namespace asrnn {

// ---------------------------------------------------------------------------
// Products. Every entry of the result is accumulated over the inner index in
// ascending order starting from 0.0, so results are bitwise identical to the
// textbook triple loop (the build disables FMA contraction).
// ---------------------------------------------------------------------------

Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b without materializing a^T.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * b^T.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// c += a * b.
void matmul_add(Matrix& c, const Matrix& a, const Matrix& b);
/// c += a * b^T.
void matmul_nt_add(Matrix& c, const Matrix& a, const Matrix& b);

Vector matvec(const Matrix& a, std::span<const double> x);

/// diag(d) * a, in place.
void scale_rows(Matrix& a, std::span<const double> d);

double frobenius_norm(const Matrix& a);
/// Largest absolute entry, ||a||_max.
double max_abs_entry(const Matrix& a);
/// Induced 1-norm (max absolute column sum).
double one_norm(const Matrix& a);
double inf_norm(std::span<const double> v);
double l2_norm(std::span<const double> v);

/// Solves a * x = b with partial-pivot LU. Throws ContractViolation on exact singularity.
Matrix solve(const Matrix& a, const Matrix& b);

// ---------------------------------------------------------------------------
// Matrix exponential
// ---------------------------------------------------------------------------

/// exp(a) by scaling and squaring with the [m/m] Pade approximants,
/// m in {3, 5, 7, 9, 13}, selected by Higham's 1-norm thresholds.
Matrix expm(const Matrix& a);

/// Adjoint of the Frechet derivative of expm at `a`, applied to `g`:
/// given dL/d exp(a) = g, returns dL/da. Evaluated as the upper-right block of
/// expm([[a^T, g], [0, a^T]]).
Matrix expm_frechet_adjoint(const Matrix& a, const Matrix& g);

// ---------------------------------------------------------------------------
// Singular values
// ---------------------------------------------------------------------------

struct SpectralReport {
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  int iterations = 0;  // Jacobi sweeps performed
};

inline constexpr double kJacobiTolerance = 1e-12;
inline constexpr int kJacobiMaxSweeps = 64;
inline constexpr std::size_t kJacobiMaxDim = 2048;

/// One-sided Jacobi failed to reach the off-diagonal tolerance within the sweep cap.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, SpectralReport best)
      : std::runtime_error(what), best_(best) {}
  const SpectralReport& best_estimate() const noexcept { return best_; }

 private:
  SpectralReport best_;
};

/// All singular values of `a` (any shape), descending, via cyclic one-sided Jacobi.
Vector singular_values(const Matrix& a, int* sweeps = nullptr);

/// Extreme singular values of a square matrix.
SpectralReport sigma_extremes(const Matrix& a);

/// ||a||_2. Non-square input is handled by running Jacobi on the taller orientation.
double spectral_norm(const Matrix& a);

// ---------------------------------------------------------------------------
// Assignment and distance to permutation groups
// ---------------------------------------------------------------------------

/// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Returns the assigned column for every row.
std::vector<std::size_t> solve_assignment(const Matrix& cost);

enum class PermutationGroup {
  kSigned,       // entries +-1
  kGeneralized,  // arbitrary nonzero entries on a permutation pattern
};

struct GroupProjection {
  Matrix nearest;                        // E*
  std::vector<std::size_t> permutation;  // column of the nonzero in each row
  double frobenius_residual = 0.0;       // ||a - E*||_F, exact minimum over the group
  double spectral_residual = 0.0;        // ||a - E*||_2, upper bound on min_E ||a - E||_2
};

/// Frobenius-nearest member of the chosen permutation group. For kSigned the
/// assignment maximizes sum |a_ij| and signs follow a_ij (sign(0) = +1); for
/// kGeneralized it maximizes sum a_ij^2 and copies the selected entries (a
/// selected zero entry is replaced by +1 so the result stays in the group).
GroupProjection nearest_generalized_permutation(const Matrix& a,
                                                PermutationGroup group = PermutationGroup::kSigned);

}  // namespace asrnn
