#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace veil {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

// Dense row-major array of 64-bit floats. The shape/data coupling is an
// invariant: data.size() always equals the product of the dimensions.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> d);

  static Tensor zeros(Shape s);
  static Tensor full(Shape s, double v);
  static Tensor scalar(double v);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  // Rank-3 [C,H,W] accessor.
  double& at(int64_t c, int64_t y, int64_t x) {
    return data[static_cast<size_t>((c * shape[1] + y) * shape[2] + x)];
  }
  double at(int64_t c, int64_t y, int64_t x) const {
    return data[static_cast<size_t>((c * shape[1] + y) * shape[2] + x)];
  }
  // Rank-4 [N,C,H,W] accessor.
  double& at(int64_t n, int64_t c, int64_t y, int64_t x) {
    return data[static_cast<size_t>(((n * shape[1] + c) * shape[2] + y) * shape[3] + x)];
  }
  double at(int64_t n, int64_t c, int64_t y, int64_t x) const {
    return data[static_cast<size_t>(((n * shape[1] + c) * shape[2] + y) * shape[3] + x)];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
};

// Throws std::runtime_error naming `what` if any element is NaN/Inf.
void ensure_finite(const Tensor& t, const char* what);

double max_abs(const Tensor& t);
double min_value(const Tensor& t);
double max_value(const Tensor& t);

}  // namespace veil
