#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asrnn/matrix.hpp"

namespace asrnn {

/// Learning-rate group a tensor belongs to.
enum class LrGroup {
  kMain,
  kRecurrent,  // orthogonal-manifold generators ("lr W_hh")
};

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  Vector values;
  LrGroup group = LrGroup::kMain;

  Matrix as_matrix() const;
};

/// Ordered collection of named flat tensors. Used for gradients, optimizer
/// accumulators and checkpoint payloads.
class TensorBundle {
 public:
  Tensor& add(std::string name, std::vector<std::size_t> shape, LrGroup group = LrGroup::kMain);
  Tensor& add_matrix(std::string name, const Matrix& m, LrGroup group = LrGroup::kMain);

  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const noexcept { return tensors_.size(); }
  auto begin() noexcept { return tensors_.begin(); }
  auto end() noexcept { return tensors_.end(); }
  auto begin() const noexcept { return tensors_.begin(); }
  auto end() const noexcept { return tensors_.end(); }
  Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }

  std::size_t element_count() const;
  /// L2 norm over every coordinate of every tensor.
  double global_norm() const;
  void scale(double s);
  void set_zero();
  bool same_layout(const TensorBundle& other) const;
  /// Copy with identical layout and all values zero.
  TensorBundle zeros_like() const;

 private:
  std::vector<Tensor> tensors_;
};

using GradBundle = TensorBundle;

/// Mutable view of one learnable tensor inside a model.
struct ParamView {
  std::string_view name;
  std::span<double> values;
  std::vector<std::size_t> shape;
  LrGroup group = LrGroup::kMain;
};

std::size_t shape_elements(std::span<const std::size_t> shape);

}  // namespace asrnn
