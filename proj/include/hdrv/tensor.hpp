#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hdrv {

// Dense channel-major (C x H x W) array of doubles. Images, feature maps,
// flow fields, masks and convolution weights all use this one layout;
// weights are stored as (out, in * k * k, 1).
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, int height, int width, double fill = 0.0);

  static Tensor like(const Tensor& other, double fill = 0.0) {
    return Tensor(other.channels(), other.height(), other.width(), fill);
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int plane() const { return height_ * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[index(c, y, x)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* channel(int c) { return data_.data() + static_cast<std::size_t>(c) * plane(); }
  const double* channel(int c) const {
    return data_.data() + static_cast<std::size_t>(c) * plane();
  }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const Tensor& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }
  bool same_spatial(const Tensor& o) const {
    return height_ == o.height_ && width_ == o.width_;
  }
  std::string shape_string() const;

  void fill(double v);
  bool all_finite() const;
  double sum() const;
  double max_abs() const;

  Tensor& operator+=(const Tensor& o);

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// Throws InvalidArgument with `what` unless shapes agree.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
void require_same_spatial(const Tensor& a, const Tensor& b, const char* what);

}  // namespace hdrv
