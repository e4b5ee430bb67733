#include "asrnn/tensor_bundle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "asrnn/error.hpp"

namespace asrnn {

std::size_t shape_elements(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Matrix Tensor::as_matrix() const {
  if (shape.size() == 2) return Matrix(shape[0], shape[1], values);
  if (shape.size() == 1) return Matrix(shape[0], 1, values);
  throw ContractViolation("tensor '" + name + "' is not a matrix or vector");
}

Tensor& TensorBundle::add(std::string name, std::vector<std::size_t> shape, LrGroup group) {
  if (contains(name)) throw ContractViolation("duplicate tensor name '" + name + "'");
  const std::size_t n = shape_elements(shape);
  tensors_.push_back(Tensor{std::move(name), std::move(shape), Vector(n, 0.0), group});
  return tensors_.back();
}

Tensor& TensorBundle::add_matrix(std::string name, const Matrix& m, LrGroup group) {
  Tensor& t = add(std::move(name), {m.rows(), m.cols()}, group);
  std::copy(m.data().begin(), m.data().end(), t.values.begin());
  return t;
}

Tensor& TensorBundle::at(std::string_view name) {
  for (auto& t : tensors_)
    if (t.name == name) return t;
  throw ContractViolation("no tensor named '" + std::string(name) + "'");
}

const Tensor& TensorBundle::at(std::string_view name) const {
  return const_cast<TensorBundle*>(this)->at(name);
}

bool TensorBundle::contains(std::string_view name) const {
  return std::any_of(tensors_.begin(), tensors_.end(), [&](const Tensor& t) { return t.name == name; });
}

std::size_t TensorBundle::element_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.values.size();
  return n;
}

double TensorBundle::global_norm() const {
  double s = 0.0;
  for (const auto& t : tensors_)
    for (double v : t.values) s += v * v;
  return std::sqrt(s);
}

void TensorBundle::scale(double s) {
  for (auto& t : tensors_)
    for (double& v : t.values) v *= s;
}

void TensorBundle::set_zero() {
  for (auto& t : tensors_) std::fill(t.values.begin(), t.values.end(), 0.0);
}

bool TensorBundle::same_layout(const TensorBundle& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name != other.tensors_[i].name || tensors_[i].shape != other.tensors_[i].shape) return false;
  }
  return true;
}

TensorBundle TensorBundle::zeros_like() const {
  TensorBundle out = *this;
  out.set_zero();
  return out;
}

}  // namespace asrnn
