#include "asrnn/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

#include "asrnn/error.hpp"

namespace asrnn {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ContractViolation(what);
}

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

using Lane4 = double __attribute__((vector_size(32)));

inline Lane4 load4(const double* p) {
  Lane4 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store4(double* p, Lane4 v) { std::memcpy(p, &v, sizeof v); }

// c(i, j) += a(i, k) * b(k, j) with k ascending for every (i, j), so the
// result is bitwise identical to the textbook triple loop. A 4 x 8 tile of c
// stays in registers across the whole k loop; lanes never mix.
void gemm_rowmajor(Matrix& c, const Matrix& a, const Matrix& b) {
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  const double* ap = a.data().data();
  const double* bp = b.data().data();
  double* cp = c.data().data();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const double* a0 = ap + i * inner;
    const double* a1 = a0 + inner;
    const double* a2 = a1 + inner;
    const double* a3 = a2 + inner;
    double* c0 = cp + i * m;
    double* c1 = c0 + m;
    double* c2 = c1 + m;
    double* c3 = c2 + m;
    std::size_t j = 0;
    for (; j + 8 <= m; j += 8) {
      Lane4 x00 = load4(c0 + j), x01 = load4(c0 + j + 4);
      Lane4 x10 = load4(c1 + j), x11 = load4(c1 + j + 4);
      Lane4 x20 = load4(c2 + j), x21 = load4(c2 + j + 4);
      Lane4 x30 = load4(c3 + j), x31 = load4(c3 + j + 4);
      for (std::size_t k = 0; k < inner; ++k) {
        const double* brow = bp + k * m + j;
        const Lane4 b0 = load4(brow), b1 = load4(brow + 4);
        const Lane4 s0 = {a0[k], a0[k], a0[k], a0[k]};
        x00 = x00 + s0 * b0;
        x01 = x01 + s0 * b1;
        const Lane4 s1 = {a1[k], a1[k], a1[k], a1[k]};
        x10 = x10 + s1 * b0;
        x11 = x11 + s1 * b1;
        const Lane4 s2 = {a2[k], a2[k], a2[k], a2[k]};
        x20 = x20 + s2 * b0;
        x21 = x21 + s2 * b1;
        const Lane4 s3 = {a3[k], a3[k], a3[k], a3[k]};
        x30 = x30 + s3 * b0;
        x31 = x31 + s3 * b1;
      }
      store4(c0 + j, x00), store4(c0 + j + 4, x01);
      store4(c1 + j, x10), store4(c1 + j + 4, x11);
      store4(c2 + j, x20), store4(c2 + j + 4, x21);
      store4(c3 + j, x30), store4(c3 + j + 4, x31);
    }
    for (; j < m; ++j) {
      double y0 = c0[j], y1 = c1[j], y2 = c2[j], y3 = c3[j];
      for (std::size_t k = 0; k < inner; ++k) {
        const double bk = bp[k * m + j];
        y0 += a0[k] * bk;
        y1 += a1[k] * bk;
        y2 += a2[k] * bk;
        y3 += a3[k] * bk;
      }
      c0[j] = y0, c1[j] = y1, c2[j] = y2, c3[j] = y3;
    }
  }
  for (; i < n; ++i) {
    double* crow = cp + i * m;
    const double* arow = ap + i * inner;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = arow[k];
      const double* brow = bp + k * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
    }
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ContractViolation("matmul: " + shape(a) + " * " + shape(b));
  Matrix c(a.rows(), b.cols());
  gemm_rowmajor(c, a, b);
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ContractViolation("matmul_tn: " + shape(a) + "^T * " + shape(b));
  Matrix c(a.cols(), b.cols());
  gemm_rowmajor(c, a.transposed(), b);
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ContractViolation("matmul_nt: " + shape(a) + " * " + shape(b) + "^T");
  Matrix c(a.rows(), b.rows());
  gemm_rowmajor(c, a, b.transposed());
  return c;
}

void matmul_add(Matrix& c, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols())
    throw ContractViolation("matmul_add: " + shape(c) + " += " + shape(a) + " * " + shape(b));
  gemm_rowmajor(c, a, b);
}

void matmul_nt_add(Matrix& c, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols() || c.rows() != a.rows() || c.cols() != b.rows())
    throw ContractViolation("matmul_nt_add: " + shape(c) + " += " + shape(a) + " * " + shape(b) + "^T");
  gemm_rowmajor(c, a, b.transposed());
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ContractViolation("matvec: dimension mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += r[k] * x[k];
    y[i] = s;
  }
  return y;
}

void scale_rows(Matrix& a, std::span<const double> d) {
  require(d.size() == a.rows(), "scale_rows: dimension mismatch");
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (double& v : a.row(i)) v *= d[i];
}

double frobenius_norm(const Matrix& a) { return l2_norm(a.data()); }

double max_abs_entry(const Matrix& a) { return inf_norm(a.data()); }

double one_norm(const Matrix& a) {
  Vector sums(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) sums[j] += std::abs(a(i, j));
  return sums.empty() ? 0.0 : *std::max_element(sums.begin(), sums.end());
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Matrix solve(const Matrix& a, const Matrix& b) {
  require(a.is_square() && a.rows() == b.rows(), "solve: dimension mismatch");
  const std::size_t n = a.rows(), m = b.cols();
  Matrix lu = a;
  Matrix x = b;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
    if (lu(piv, k) == 0.0) throw ContractViolation("solve: matrix is singular");
    if (piv != k) {
      std::swap_ranges(lu.row(k).begin(), lu.row(k).end(), lu.row(piv).begin());
      std::swap_ranges(x.row(k).begin(), x.row(k).end(), x.row(piv).begin());
    }
    const double inv = 1.0 / lu(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu(i, k) * inv;
      if (f == 0.0) continue;
      lu(i, k) = f;
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
      for (std::size_t j = 0; j < m; ++j) x(i, j) -= f * x(k, j);
    }
  }
  for (std::size_t kk = n; kk-- > 0;) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = x(kk, j);
      for (std::size_t c = kk + 1; c < n; ++c) s -= lu(kk, c) * x(c, j);
      x(kk, j) = s / lu(kk, kk);
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// expm
// ---------------------------------------------------------------------------

namespace {

// Higham (2005), Table 2.3: largest 1-norm for which the [m/m] Pade
// approximant reaches double precision without scaling.
constexpr double kTheta3 = 1.495585217958292e-2;
constexpr double kTheta5 = 2.539398330063230e-1;
constexpr double kTheta7 = 9.504178996162932e-1;
constexpr double kTheta9 = 2.097847961257068e0;
constexpr double kTheta13 = 5.371920351148152e0;

constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                          25200.0,    1512.0,    56.0,      1.0};
constexpr std::array<double, 10> kPade9 = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                                           30270240.0,    2162160.0,    110880.0,     3960.0,
                                           90.0,          1.0};
constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};

// out += c * m
void axpy(Matrix& out, double c, const Matrix& m) {
  auto o = out.data();
  auto s = m.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += c * s[i];
}

void add_identity(Matrix& m, double c) {
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += c;
}

// r = (V - U)^{-1} (V + U)
Matrix pade_quotient(const Matrix& u, const Matrix& v) {
  return solve(v - u, v + u);
}

// Low-order approximants share one shape: U = A * sum_odd b_k A^{k-1}, V = sum_even b_k A^k.
template <std::size_t N>
Matrix pade_low(const Matrix& a, const std::array<double, N>& b) {
  const std::size_t n = a.rows();
  const Matrix a2 = matmul(a, a);
  std::vector<Matrix> powers{Matrix::identity(n), a2};  // A^0, A^2, A^4, ...
  for (std::size_t k = 4; k < N; k += 2) powers.push_back(matmul(powers.back(), a2));
  Matrix odd(n, n), even(n, n);
  for (std::size_t k = 0; k < N; ++k) {
    if (k % 2 == 0)
      axpy(even, b[k], powers[k / 2]);
    else
      axpy(odd, b[k], powers[k / 2]);
  }
  return pade_quotient(matmul(a, odd), even);
}

Matrix pade13_scaled(const Matrix& a) {
  const auto& b = kPade13;
  const std::size_t n = a.rows();
  const Matrix a2 = matmul(a, a);
  const Matrix a4 = matmul(a2, a2);
  const Matrix a6 = matmul(a4, a2);

  Matrix inner_u(n, n);
  axpy(inner_u, b[13], a6);
  axpy(inner_u, b[11], a4);
  axpy(inner_u, b[9], a2);
  Matrix tail_u = matmul(a6, inner_u);
  axpy(tail_u, b[7], a6);
  axpy(tail_u, b[5], a4);
  axpy(tail_u, b[3], a2);
  add_identity(tail_u, b[1]);
  const Matrix u = matmul(a, tail_u);

  Matrix inner_v(n, n);
  axpy(inner_v, b[12], a6);
  axpy(inner_v, b[10], a4);
  axpy(inner_v, b[8], a2);
  Matrix v = matmul(a6, inner_v);
  axpy(v, b[6], a6);
  axpy(v, b[4], a4);
  axpy(v, b[2], a2);
  add_identity(v, b[0]);
  return pade_quotient(u, v);
}

}  // namespace

Matrix expm(const Matrix& a) {
  if (!a.is_square()) throw ContractViolation("expm: non-square input " + shape(a));
  if (a.empty()) return a;
  const double norm = one_norm(a);
  if (norm <= kTheta3) return pade_low(a, kPade3);
  if (norm <= kTheta5) return pade_low(a, kPade5);
  if (norm <= kTheta7) return pade_low(a, kPade7);
  if (norm <= kTheta9) return pade_low(a, kPade9);

  const int s = std::max(0, static_cast<int>(std::ceil(std::log2(norm / kTheta13))));
  Matrix scaled = a;
  scaled *= std::ldexp(1.0, -s);
  Matrix r = pade13_scaled(scaled);
  for (int i = 0; i < s; ++i) r = matmul(r, r);
  return r;
}

Matrix expm_frechet_adjoint(const Matrix& a, const Matrix& g) {
  if (!a.is_square() || g.rows() != a.rows() || g.cols() != a.cols())
    throw ContractViolation("expm_frechet_adjoint: " + shape(a) + " vs " + shape(g));
  const std::size_t n = a.rows();
  Matrix block(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      block(i, j) = a(j, i);
      block(n + i, n + j) = a(j, i);
      block(i, n + j) = g(i, j);
    }
  }
  const Matrix e = expm(block);
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = e(i, n + j);
  return out;
}

// ---------------------------------------------------------------------------
// One-sided Jacobi
// ---------------------------------------------------------------------------

Vector singular_values(const Matrix& a, int* sweeps) {
  if (a.empty()) return {};
  // Rows of `v` are the vectors being orthogonalized: the columns of the
  // taller orientation of `a`.
  Matrix v = a.rows() >= a.cols() ? a.transposed() : a;
  const std::size_t count = v.rows(), len = v.cols();
  if (count > kJacobiMaxDim) throw ContractViolation("singular_values: dimension exceeds 2048");

  auto dot = [len](const double* x, const double* y) {
    double s = 0.0;
    for (std::size_t k = 0; k < len; ++k) s += x[k] * y[k];
    return s;
  };

  auto norms = [&] {
    Vector out(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double* r = v.row(i).data();
      out[i] = std::sqrt(dot(r, r));
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
  };

  int sweep = 0;
  bool converged = false;
  while (sweep < kJacobiMaxSweeps) {
    ++sweep;
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < count; ++p) {
      double* vp = v.row(p).data();
      for (std::size_t q = p + 1; q < count; ++q) {
        double* vq = v.row(q).data();
        const double alpha = dot(vp, vp);
        const double beta = dot(vq, vq);
        const double gamma = dot(vp, vq);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= kJacobiTolerance * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t k = 0; k < len; ++k) {
          const double x = vp[k], y = vq[k];
          vp[k] = c * x - s * y;
          vq[k] = s * x + c * y;
        }
      }
    }
    if (!rotated) {
      converged = true;
      break;
    }
  }
  if (sweeps) *sweeps = sweep;
  Vector sv = norms();
  if (!converged) {
    SpectralReport best{sv.back(), sv.front(), sweep};
    throw NonConvergence("one-sided Jacobi did not converge in " + std::to_string(kJacobiMaxSweeps) + " sweeps",
                         best);
  }
  // Wide input has rows() < cols() singular values; zero-padding is not wanted.
  return sv;
}

SpectralReport sigma_extremes(const Matrix& a) {
  if (!a.is_square() || a.empty()) throw ContractViolation("sigma_extremes: expects a non-empty square matrix");
  int sweeps = 0;
  const Vector sv = singular_values(a, &sweeps);
  return {sv.back(), sv.front(), sweeps};
}

double spectral_norm(const Matrix& a) {
  if (a.empty()) return 0.0;
  return singular_values(a).front();
}

// ---------------------------------------------------------------------------
// Assignment
// ---------------------------------------------------------------------------

std::vector<std::size_t> solve_assignment(const Matrix& cost) {
  require(cost.is_square(), "solve_assignment: cost matrix must be square");
  const std::size_t n = cost.rows();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials formulation; row 0 / column 0 are sentinels.
  Vector u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    Vector minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    if (match[j] != 0) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

GroupProjection nearest_generalized_permutation(const Matrix& a, PermutationGroup group) {
  if (!a.is_square()) throw ContractViolation("nearest_generalized_permutation: non-square input " + shape(a));
  const std::size_t n = a.rows();
  Matrix cost(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost(i, j) = group == PermutationGroup::kSigned ? -std::abs(a(i, j)) : -(a(i, j) * a(i, j));

  GroupProjection out;
  out.permutation = solve_assignment(cost);
  out.nearest = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = out.permutation[i];
    const double x = a(i, j);
    if (group == PermutationGroup::kSigned || x == 0.0)
      out.nearest(i, j) = x < 0.0 ? -1.0 : 1.0;
    else
      out.nearest(i, j) = x;
  }
  const Matrix residual = a - out.nearest;
  out.frobenius_residual = frobenius_norm(residual);
  out.spectral_residual = spectral_norm(residual);
  return out;
}

}  // namespace asrnn
