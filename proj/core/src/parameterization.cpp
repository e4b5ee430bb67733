#include "asrnn/parameterization.hpp"

#include <cmath>
#include <numbers>

#include "asrnn/error.hpp"
#include "asrnn/linalg.hpp"
#include "asrnn/rng.hpp"

namespace asrnn {

SkewParam::SkewParam(std::size_t dim) : dim_(dim), upper_(dim * (dim ? dim - 1 : 0) / 2, 0.0) {}

SkewParam SkewParam::from_generator(const Matrix& generator) {
  if (!generator.is_square()) throw ContractViolation("SkewParam: generator must be square");
  SkewParam p(generator.rows());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.dim_; ++i) {
    if (generator(i, i) != 0.0) throw ContractViolation("SkewParam: generator diagonal must be zero");
    for (std::size_t j = i + 1; j < p.dim_; ++j) {
      if (generator(i, j) != -generator(j, i)) throw ContractViolation("SkewParam: generator is not skew-symmetric");
      p.upper_[k++] = generator(i, j);
    }
  }
  return p;
}

std::span<double> SkewParam::mutable_free_params() noexcept {
  dirty_ = true;
  return upper_;
}

Matrix SkewParam::generator() const {
  Matrix g(dim_, dim_);
  std::size_t k = 0;
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = i + 1; j < dim_; ++j) {
      g(i, j) = upper_[k];
      g(j, i) = -upper_[k];
      ++k;
    }
  }
  return g;
}

const Matrix& SkewParam::materialize() {
  if (dirty_) {
    cached_ = expm(generator());
    dirty_ = false;
  }
  return cached_;
}

const Matrix& materialize_orthogonal(SkewParam& p) { return p.materialize(); }

Vector backprop_orthogonal(const SkewParam& p, const Matrix& grad_q) {
  if (grad_q.rows() != p.dim() || grad_q.cols() != p.dim())
    throw ContractViolation("backprop_orthogonal: gradient shape does not match generator");
  const Matrix full = expm_frechet_adjoint(p.generator(), grad_q);
  Vector out(p.free_count());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.dim(); ++i)
    for (std::size_t j = i + 1; j < p.dim(); ++j) out[k++] = full(i, j) - full(j, i);
  return out;
}

Vector materialize_diagonal(const DiagonalParam& p) {
  Vector d(p.seed.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(p.seed[i]) + p.epsilon;
  return d;
}

Vector backprop_diagonal(const DiagonalParam& p, std::span<const double> grad_d) {
  if (grad_d.size() != p.seed.size()) throw ContractViolation("backprop_diagonal: length mismatch");
  Vector g(grad_d.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double s = p.seed[i];
    const double sign = s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
    g[i] = sign * grad_d[i];
  }
  return g;
}

std::string_view to_string(InitScheme s) noexcept {
  switch (s) {
    case InitScheme::kHenaff: return "henaff";
    case InitScheme::kCayley: return "cayley";
    case InitScheme::kIdentity: return "identity";
  }
  return "?";
}

InitScheme parse_init_scheme(std::string_view s) {
  if (s == "henaff") return InitScheme::kHenaff;
  if (s == "cayley") return InitScheme::kCayley;
  if (s == "identity") return InitScheme::kIdentity;
  throw ContractViolation("unknown init scheme '" + std::string(s) + "'");
}

SkewParam skew_from_block_angles(std::span<const double> angles, std::size_t dim) {
  if (angles.size() != dim / 2) throw ContractViolation("skew_from_block_angles: need dim/2 angles");
  Matrix g(dim, dim);
  for (std::size_t j = 0; j < angles.size(); ++j) {
    g(2 * j, 2 * j + 1) = angles[j];
    g(2 * j + 1, 2 * j) = -angles[j];
  }
  return SkewParam::from_generator(g);
}

SkewParam init_skew(const InitSpec& spec, std::size_t dim) {
  if (dim == 0) throw ContractViolation("init_skew: dim must be >= 1");
  Rng rng(spec.rng_seed);
  Vector angles(dim / 2, 0.0);
  for (double& theta : angles) {
    switch (spec.scheme) {
      case InitScheme::kHenaff:
        theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
        break;
      case InitScheme::kCayley: {
        const double u = rng.uniform(0.0, std::numbers::pi / 2.0);
        theta = -std::sqrt((1.0 - std::cos(u)) / (1.0 + std::cos(u)));
        break;
      }
      case InitScheme::kIdentity:
        break;
    }
  }
  return skew_from_block_angles(angles, dim);
}

Matrix init_semi_orthogonal(std::size_t rows, std::size_t cols, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  // Orthonormalize the rows of `w`, which is laid out with the shorter side first.
  const bool tall = rows >= cols;
  const std::size_t count = tall ? cols : rows, len = tall ? rows : cols;
  Matrix w(count, len);
  for (double& v : w.data()) v = rng.normal();
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < count; ++i) {
      auto vi = w.row(i);
      for (std::size_t k = 0; k < i; ++k) {
        const auto vk = w.row(k);
        double dot = 0.0;
        for (std::size_t c = 0; c < len; ++c) dot += vi[c] * vk[c];
        for (std::size_t c = 0; c < len; ++c) vi[c] -= dot * vk[c];
      }
      const double norm = l2_norm(vi);
      for (double& v : vi) v /= norm;
    }
  }
  return tall ? w.transposed() : w;
}

DiagonalParam init_seed_vector(const InitSpec& spec, std::size_t dim) {
  if (spec.uniform_lo > spec.uniform_hi) throw ContractViolation("init_seed_vector: requires a <= b");
  DiagonalParam p{Vector(dim, spec.uniform_lo), spec.epsilon};
  if (spec.uniform_lo < spec.uniform_hi) {
    Rng rng(split_seed(spec.rng_seed, 0x5eedULL));
    for (double& s : p.seed) s = rng.uniform(spec.uniform_lo, spec.uniform_hi);
  }
  return p;
}

}  // namespace asrnn
