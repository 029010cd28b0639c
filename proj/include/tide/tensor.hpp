#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tide/common.hpp"

namespace tide {

// Dense row-major tensor of rank <= 2, 64-bit throughout.
// Scalars are 1x1, vectors are n x 1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }

  static Tensor column(std::vector<double> v) {
    Tensor t;
    t.rows = static_cast<int>(v.size());
    t.cols = 1;
    t.data = std::move(v);
    return t;
  }

  int size() const { return rows * cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  bool is_vector() const { return cols == 1; }

  double& operator()(int r, int c) {
    return data[static_cast<size_t>(r) * cols + c];
  }
  double operator()(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }
  double& operator[](int i) { return data[static_cast<size_t>(i)]; }
  double operator[](int i) const { return data[static_cast<size_t>(i)]; }

  bool same_shape(const Tensor& o) const {
    return rows == o.rows && cols == o.cols;
  }

  std::string shape() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

inline void check_same_shape(const Tensor& a, const Tensor& b,
                             const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.shape() + " vs " + b.shape());
  }
}

}  // namespace tide
