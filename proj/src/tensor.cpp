#include "freqattack/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "freqattack/errors.hpp"

namespace freqattack {

const char* to_string(OracleError::Kind kind) {
  switch (kind) {
    case OracleError::Kind::kTransport: return "transport";
    case OracleError::Kind::kTimeout: return "timeout";
    case OracleError::Kind::kMalformedResponse: return "malformed-response";
    case OracleError::Kind::kWrongClassCount: return "wrong-class-count";
    case OracleError::Kind::kRemote: return "remote-error";
  }
  return "unknown";
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ConfigError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                      shape_string(b.shape()));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
  if (std::any_of(shape_.begin(), shape_.end(), [](std::size_t d) { return d == 0; })) {
    throw ConfigError("tensor dimensions must be positive");
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (std::any_of(shape_.begin(), shape_.end(), [](std::size_t d) { return d == 0; })) {
    throw ConfigError("tensor dimensions must be positive");
  }
  if (data_.size() != shape_size(shape_)) {
    throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                      " does not match shape " + shape_string(shape_));
  }
  if (!all_finite()) throw ConfigError("tensor contains non-finite values");
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  require_same_shape(*this, other, "subtract");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double scale) {
  for (double& v : data_) v *= scale;
  return *this;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double squared_norm(const Tensor& t) {
  double sum = 0.0;
  for (double v : t.values()) sum += v * v;
  return sum;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

Tensor clip01(Tensor t) {
  for (double& v : t.values()) v = std::clamp(v, 0.0, 1.0);
  return t;
}

namespace {

void check_image_shape(const Shape& shape) {
  if (shape.size() != 3) throw ConfigError("image tensor must have shape H x W x C");
  if (shape[2] != 1 && shape[2] != 3) throw ConfigError("image must have 1 or 3 channels");
}

}  // namespace

Image::Image(Tensor pixels) : pixels_(std::move(pixels)) {
  check_image_shape(pixels_.shape());
  for (double v : pixels_.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("image values must lie in [0, 1]");
  }
}

Image Image::from_clipped(Tensor pixels) { return Image(clip01(std::move(pixels))); }

}  // namespace freqattack
