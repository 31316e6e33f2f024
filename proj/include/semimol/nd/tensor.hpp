#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "semimol/errors.hpp"

namespace semimol::nd {

// Dense row-major tensor of 64-bit floats. Rank is 1 (vector) or 2 (matrix)
// throughout this codebase; scalars are 1x1.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::initializer_list<int64_t> dims, double fill = 0.0)
      : shape(dims), data(count(shape), fill) {}

  static Tensor zeros(int64_t r, int64_t c) { return Tensor({r, c}); }
  static Tensor scalar(double v) {
    Tensor t({1, 1});
    t.data[0] = v;
    return t;
  }
  static Tensor from_rows(int64_t r, int64_t c, std::vector<double> values) {
    Tensor t;
    t.shape = {r, c};
    t.data = std::move(values);
    if (static_cast<int64_t>(t.data.size()) != r * c) {
      throw ShapeMismatch("from_rows: data size does not match " +
                          std::to_string(r) + "x" + std::to_string(c));
    }
    return t;
  }

  static int64_t count(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t rows() const { return shape.empty() ? 1 : shape[0]; }
  int64_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(int64_t r, int64_t c) { return data[r * cols() + c]; }
  double at(int64_t r, int64_t c) const { return data[r * cols() + c]; }
  double item() const {
    if (numel() != 1) throw NotScalar("item() on tensor with numel != 1");
    return data[0];
  }

  bool same_shape(const Tensor& o) const {
    return rows() == o.rows() && cols() == o.cols();
  }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeMismatch(std::string(op) + ": " + a.shape_str() + " vs " +
                        b.shape_str());
  }
}

}  // namespace semimol::nd
