#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace freqattack {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);

// Dense row-major tensor of doubles. Every element is finite and the data
// length always equals the product of the shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  // Element of a rank-3 tensor (H x W x C).
  double at(std::size_t row, std::size_t col, std::size_t ch) const {
    return data_[(row * shape_[1] + col) * shape_[2] + ch];
  }
  double& at(std::size_t row, std::size_t col, std::size_t ch) {
    return data_[(row * shape_[1] + col) * shape_[2] + ch];
  }

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double scale);

  friend Tensor operator+(Tensor lhs, const Tensor& rhs) { return lhs += rhs; }
  friend Tensor operator-(Tensor lhs, const Tensor& rhs) { return lhs -= rhs; }
  friend Tensor operator*(Tensor lhs, double scale) { return lhs *= scale; }

  bool operator==(const Tensor& other) const = default;

  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

double dot(const Tensor& a, const Tensor& b);
double squared_norm(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);

// Elementwise min(max(v, 0), 1).
Tensor clip01(Tensor t);

// H x W x C tensor with every value in [0, 1] and C in {1, 3}.
class Image {
 public:
  Image() = default;
  // Throws ConfigError if the tensor violates the image invariants.
  explicit Image(Tensor pixels);

  // Clips to [0, 1] first; the shape must still be a valid image shape.
  static Image from_clipped(Tensor pixels);

  const Tensor& tensor() const { return pixels_; }
  std::size_t height() const { return pixels_.shape()[0]; }
  std::size_t width() const { return pixels_.shape()[1]; }
  std::size_t channels() const { return pixels_.shape()[2]; }
  std::size_t size() const { return pixels_.size(); }

  bool operator==(const Image& other) const = default;

 private:
  Tensor pixels_;
};

}  // namespace freqattack
