#include "spmat/tensor.hpp"

#include "spmat/error.hpp"

#include <cmath>
#include <fmt/format.h>

namespace spmat {

std::size_t shape_numel(const Shape &shape) {
  std::size_t n = 1;
  for (auto e : shape)
    n *= e;
  return n;
}

std::string shape_string(const Shape &shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
    s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_numel(shape_))
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("tensor of shape {} given {} values", shape_string(shape_), data_.size()));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto &row : rows) {
    if (row.size() != c)
      throw Error(ErrorCode::ShapeMismatch, "ragged matrix literal");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(v));
}

std::size_t Tensor::rows() const noexcept {
  return shape_.empty() ? 1 : shape_[0];
}

std::size_t Tensor::cols() const noexcept {
  return shape_.size() >= 2 ? shape_[1] : 1;
}

double Tensor::item() const {
  if (data_.size() != 1)
    throw Error(ErrorCode::NotScalar,
                fmt::format("item() on tensor of shape {}", shape_string(shape_)));
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_)
    if (!std::isfinite(v))
      return false;
  return true;
}

} // namespace spmat
