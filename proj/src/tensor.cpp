#include "hdrv/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "hdrv/errors.hpp"

namespace hdrv {

Tensor::Tensor(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 0 || height < 0 || width < 0) {
    throw InvalidArgument("tensor dimensions must be non-negative");
  }
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

std::string Tensor::shape_string() const {
  return std::to_string(channels_) + "x" + std::to_string(height_) + "x" +
         std::to_string(width_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Tensor& Tensor::operator+=(const Tensor& o) {
  require_same_shape(*this, o, "tensor +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InvalidArgument(std::string(what) + ": shape mismatch " + a.shape_string() +
                          " vs " + b.shape_string());
  }
}

void require_same_spatial(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_spatial(b)) {
    throw InvalidArgument(std::string(what) + ": spatial size mismatch " +
                          a.shape_string() + " vs " + b.shape_string());
  }
}

}  // namespace hdrv
