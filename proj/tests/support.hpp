#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hdrv/autograd.hpp"
#include "hdrv/tensor.hpp"

namespace hdrv::testing {

inline Tensor random_tensor(int c, int h, int w, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(c, h, w);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

inline double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

// Central differences against the reverse sweep. `samples_per_leaf` > 0
// checks that many random entries per leaf instead of all of them.
inline GradCheckResult gradcheck(const std::vector<ag::Var>& leaves, const std::function<ag::Var()>& f,
                                 int samples_per_leaf = 0, double eps = 1e-6, std::uint64_t seed = 7) {
  for (auto leaf : leaves) leaf.zero_grad();
  const ag::Var y = f();
  ag::backward(y);
  std::vector<Tensor> analytic;
  for (const auto& leaf : leaves) analytic.push_back(leaf.grad());

  GradCheckResult result;
  std::mt19937_64 rng(seed);
  const ag::NoGradGuard no_grad;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    ag::Var leaf = leaves[k];
    Tensor& value = leaf.mutable_value();
    std::vector<std::size_t> idx(value.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (samples_per_leaf > 0 && idx.size() > static_cast<std::size_t>(samples_per_leaf)) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(samples_per_leaf);
    }
    for (std::size_t i : idx) {
      const double saved = value[i];
      value[i] = saved + eps;
      const double plus = f().value()[0];
      value[i] = saved - eps;
      const double minus = f().value()[0];
      value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double err = relative_error(analytic[k][i], numeric);
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = "leaf " + std::to_string(k) + " index " + std::to_string(i) + ": analytic " +
                       std::to_string(analytic[k][i]) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return result;
}

}  // namespace hdrv::testing
