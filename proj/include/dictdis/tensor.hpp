#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace dictdis {

// Dense row-major tensor of doubles. Rank 1 and 2 are what the model uses.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Tensor() = default;
  Tensor(std::initializer_list<std::size_t> s) : shape(s) { v.assign(numel(), 0.0); }
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) { v.assign(numel(), 0.0); }

  static Tensor scalar(double x) {
    Tensor t{std::size_t{1}};
    t.v[0] = x;
    return t;
  }
  static Tensor vec(std::size_t n) { return Tensor{n}; }
  static Tensor mat(std::size_t r, std::size_t c) { return Tensor{r, c}; }

  std::size_t numel() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  double& at(std::size_t i) { return v[i]; }
  double at(std::size_t i) const { return v[i]; }
  double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  void fill(double x) { std::fill(v.begin(), v.end(), x); }
  bool all_finite() const;
  double sum() const;

  std::string shape_str() const;
};

}  // namespace dictdis
