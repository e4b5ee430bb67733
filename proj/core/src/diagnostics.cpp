#include "asrnn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "asrnn/error.hpp"

namespace asrnn {
namespace {

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

Matrix step_jacobian(const BpttCache& cache, std::size_t t, std::size_t sample) {
  if (t < 1 || t > cache.steps()) throw ContractViolation("step_jacobian: t out of range");
  if (sample >= cache.h0.cols()) throw ContractViolation("step_jacobian: sample out of range");
  const AsRnnWeights& w = cache.weights;
  const std::size_t n = w.hidden_dim();

  Matrix m = w.w_hh;
  scale_rows(m, w.d_f);
  m = matmul(w.u_f, m);
  Vector sat(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = cache.a[t - 1](i, sample);
    sat[i] = 1.0 - a * a;
  }
  scale_rows(m, sat);
  m = matmul_tn(w.u_f, m);
  Vector inv_d(n);
  for (std::size_t i = 0; i < n; ++i) inv_d[i] = 1.0 / w.d_f[i];
  scale_rows(m, inv_d);
  return m;
}

JacobianWindow window_jacobian(const BpttCache& cache, std::size_t t1, std::size_t t2, std::size_t sample) {
  if (t1 > t2 || t2 > cache.steps()) throw ContractViolation("window_jacobian: requires 0 <= t1 <= t2 <= T");
  JacobianWindow out;
  out.t1 = t1;
  out.t2 = t2;
  out.product = Matrix::identity(cache.weights.hidden_dim());
  for (std::size_t t = t1 + 1; t <= t2; ++t) {
    out.steps.push_back(step_jacobian(cache, t, sample));
    out.product = matmul(out.steps.back(), out.product);
  }
  out.spectrum = sigma_extremes(out.product);
  return out;
}

TheoremReport theorem_precondition_check(const AsRnnWeights& w, double c_x, std::size_t horizon) {
  if (!(c_x > 0.0)) throw ContractViolation("theorem_precondition_check: C_x must be > 0");
  if (horizon < 1) throw ContractViolation("theorem_precondition_check: horizon must be >= 1");
  TheoremReport r;
  r.horizon = horizon;
  r.c_x = c_x;

  r.df_norm = inf_norm(w.d_f);
  r.df_sigma_min = std::numeric_limits<double>::infinity();
  for (double d : w.d_f) r.df_sigma_min = std::min(r.df_sigma_min, std::abs(d));

  const SpectralReport whh = sigma_extremes(w.w_hh);
  r.whh_sigma_min = whh.sigma_min;
  r.whh_inverse_norm = whh.sigma_min > 0.0 ? 1.0 / whh.sigma_min : std::numeric_limits<double>::infinity();
  r.whh_max_norm = max_abs_entry(w.w_hh);
  r.wxh_norm = spectral_norm(w.w_xh);
  r.bias_inf_norm = inf_norm(w.bias);

  if (r.whh_inverse_norm < 1.0) {
    r.bound_numerator = std::atanh(std::sqrt(1.0 - r.whh_inverse_norm));
  } else {
    r.bound_numerator = 0.0;
    r.df_bound_degenerate = true;
  }
  const double ratio = r.whh_max_norm + 1.0;
  double power = 1.0;
  for (std::size_t i = 0; i < horizon; ++i) {
    r.geometric_sum += power;
    power *= ratio;
  }
  r.bound_denominator = (r.wxh_norm * c_x + r.bias_inf_norm) * r.geometric_sum;
  r.df_bound = r.bound_denominator == 0.0 ? std::numeric_limits<double>::infinity()
                                          : r.bound_numerator / r.bound_denominator;

  r.whh_group_dist_upper = nearest_generalized_permutation(w.w_hh, PermutationGroup::kGeneralized).spectral_residual;
  r.whh_dist_bound = r.df_norm > 0.0 ? r.df_sigma_min / r.df_norm : 0.0;
  r.uf_group_dist_upper = nearest_generalized_permutation(w.u_f, PermutationGroup::kSigned).spectral_residual;
  r.saturation_bound = whh.sigma_min > 0.0 ? 1.0 - 1.0 / whh.sigma_min : -std::numeric_limits<double>::infinity();

  r.preconditions_hold = r.df_norm <= r.df_bound && r.whh_group_dist_upper <= r.whh_dist_bound;
  return r;
}

SaturationStats saturation_stats(const BpttCache& cache, const TheoremReport* report) {
  SaturationStats s;
  s.max_abs_per_step.reserve(cache.steps());
  for (const Matrix& a : cache.a) {
    const double m = max_abs_entry(a);
    s.max_abs_per_step.push_back(m);
    s.max_overall = std::max(s.max_overall, m);
  }
  const double sigma_min = report ? report->whh_sigma_min : sigma_extremes(cache.weights.w_hh).sigma_min;
  s.bound = sigma_min > 0.0 ? 1.0 - 1.0 / sigma_min : -std::numeric_limits<double>::infinity();
  s.bound_applies = report != nullptr && report->preconditions_hold;
  s.within_bound = s.max_overall <= s.bound;
  return s;
}

GradientNormTrace::GradientNormTrace(std::vector<std::size_t> steps) : steps_(std::move(steps)) {}

HiddenGradHook GradientNormTrace::begin_record() {
  records_.emplace_back(steps_.size(), 0.0);
  const std::size_t slot = records_.size() - 1;
  return [this, slot](std::size_t t, const Matrix& grad_h) {
    for (std::size_t k = 0; k < steps_.size(); ++k)
      if (steps_[k] == t) records_[slot][k] = frobenius_norm(grad_h);
  };
}

std::string to_json(const TheoremReport& r) {
  nlohmann::json j;
  j["horizon"] = r.horizon;
  j["c_x"] = number(r.c_x);
  j["df_norm"] = number(r.df_norm);
  j["df_sigma_min"] = number(r.df_sigma_min);
  j["df_bound"] = number(r.df_bound);
  j["df_bound_degenerate"] = r.df_bound_degenerate;
  j["whh_sigma_min"] = number(r.whh_sigma_min);
  j["whh_inverse_norm"] = number(r.whh_inverse_norm);
  j["whh_max_norm"] = number(r.whh_max_norm);
  j["wxh_norm"] = number(r.wxh_norm);
  j["bias_inf_norm"] = number(r.bias_inf_norm);
  j["bound_numerator"] = number(r.bound_numerator);
  j["bound_denominator"] = number(r.bound_denominator);
  j["geometric_sum"] = number(r.geometric_sum);
  j["whh_group_dist_upper"] = number(r.whh_group_dist_upper);
  j["whh_dist_bound"] = number(r.whh_dist_bound);
  j["uf_group_dist_upper"] = number(r.uf_group_dist_upper);
  j["saturation_bound"] = number(r.saturation_bound);
  j["sigma_min_window"] = r.sigma_min_window ? number(*r.sigma_min_window) : nlohmann::json(nullptr);
  j["preconditions_hold"] = r.preconditions_hold;
  return j.dump();
}

std::string to_json(const JacobianWindow& w) {
  nlohmann::json j;
  j["t1"] = w.t1;
  j["t2"] = w.t2;
  j["sigma_min"] = number(w.spectrum.sigma_min);
  j["sigma_max"] = number(w.spectrum.sigma_max);
  j["jacobi_sweeps"] = w.spectrum.iterations;
  auto& steps = j["step_sigma_min"] = nlohmann::json::array();
  for (const Matrix& s : w.steps) steps.push_back(number(sigma_extremes(s).sigma_min));
  return j.dump();
}

std::string to_json(const SaturationStats& s) {
  nlohmann::json j;
  auto& per = j["max_abs_per_step"] = nlohmann::json::array();
  for (double v : s.max_abs_per_step) per.push_back(number(v));
  j["max_overall"] = number(s.max_overall);
  j["bound"] = number(s.bound);
  j["bound_applies"] = s.bound_applies;
  j["within_bound"] = s.within_bound;
  return j.dump();
}

}  // namespace asrnn
