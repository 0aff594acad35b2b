#include "veil/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace veil {

double finite_diff_check(const LossBuilder& f, const Tensor& x, double h, int64_t n_coords,
                         Rng& rng) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_check: h must be positive");
  if (n_coords < 1 || n_coords > x.numel()) {
    throw std::invalid_argument("finite_diff_check: n_coords must be in [1, numel]");
  }

  Graph g;
  Var xv = g.input(x);
  Var loss = f(g, xv);
  if (g.value(loss).numel() != 1) {
    throw std::invalid_argument("finite_diff_check: loss builder must return a scalar");
  }
  Tensor analytic = g.backward(loss, {xv})[0];

  // Partial Fisher-Yates draw of n_coords distinct coordinates.
  std::vector<int64_t> idx(static_cast<size_t>(x.numel()));
  std::iota(idx.begin(), idx.end(), 0);
  for (int64_t i = 0; i < n_coords; ++i) {
    int64_t j = rng.uniform_int(i, x.numel() - 1);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }

  auto eval = [&](const Tensor& point) {
    Graph fg;
    Var pv = fg.input(point);
    Var l = f(fg, pv);
    double v = fg.scalar_value(l);
    if (!std::isfinite(v)) throw std::runtime_error("finite_diff_check: non-finite loss value");
    return v;
  };

  double worst = 0.0;
  Tensor probe = x;
  for (int64_t i = 0; i < n_coords; ++i) {
    int64_t c = idx[static_cast<size_t>(i)];
    double orig = probe[c];
    probe[c] = orig + h;
    double fp = eval(probe);
    probe[c] = orig - h;
    double fm = eval(probe);
    probe[c] = orig;
    double central = (fp - fm) / (2.0 * h);
    double a = analytic[c];
    double denom = std::max({std::fabs(a), std::fabs(central), 1e-8});
    worst = std::max(worst, std::fabs(a - central) / denom);
  }
  return worst;
}

}  // namespace veil
