#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace spmat {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape &shape);
std::string shape_string(const Shape &shape);

/// Dense row-major array of doubles. Rank 0 is a scalar; most operators work
/// on rank-2 matrices and treat rank-1 tensors as a single column.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor(Shape{rows, cols}, std::move(values));
  }
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape &shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty() && !shape_.empty(); }

  /// Matrix view of the shape: rank 2 -> (r, c); rank 1 -> (n, 1); rank 0 -> (1, 1).
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  double &operator[](std::size_t i) noexcept { return data_[i]; }
  const double &operator[](std::size_t i) const noexcept { return data_[i]; }
  double &at(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }
  double item() const;

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double> &data() const noexcept { return data_; }

  bool all_finite() const noexcept;

  bool operator==(const Tensor &) const = default;

private:
  Shape shape_;
  std::vector<double> data_;
};

} // namespace spmat
