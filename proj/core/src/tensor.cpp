#include "veil/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace veil {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  for (int64_t dim : shape) {
    if (dim <= 0) throw std::invalid_argument("tensor: non-positive dimension in " + shape_str(shape));
  }
  if (static_cast<int64_t>(data.size()) != shape_numel(shape)) {
    throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
}

Tensor Tensor::zeros(Shape s) { return full(std::move(s), 0.0); }

Tensor Tensor::full(Shape s, double v) {
  Tensor t;
  for (int64_t dim : s) {
    if (dim <= 0) throw std::invalid_argument("tensor: non-positive dimension in " + shape_str(s));
  }
  t.data.assign(static_cast<size_t>(shape_numel(s)), v);
  t.shape = std::move(s);
  return t;
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void ensure_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) {
    throw std::runtime_error(std::string(what) + ": non-finite value in tensor of shape " +
                             shape_str(t.shape));
  }
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data) m = std::max(m, std::fabs(v));
  return m;
}

double min_value(const Tensor& t) {
  double m = t.data.empty() ? 0.0 : t.data[0];
  for (double v : t.data) m = std::min(m, v);
  return m;
}

double max_value(const Tensor& t) {
  double m = t.data.empty() ? 0.0 : t.data[0];
  for (double v : t.data) m = std::max(m, v);
  return m;
}

}  // namespace veil
