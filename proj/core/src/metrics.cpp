#include "veil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace veil {

namespace {

// Mean vector and unbiased covariance of the rows of feats [n, d].
void gaussian_fit(const Tensor& feats, std::vector<double>& mu, std::vector<double>& cov) {
  const int64_t n = feats.dim(0), d = feats.dim(1);
  mu.assign(static_cast<size_t>(d), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < d; ++j) mu[static_cast<size_t>(j)] += feats[i * d + j];
  }
  for (double& m : mu) m /= static_cast<double>(n);
  cov.assign(static_cast<size_t>(d * d), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t a = 0; a < d; ++a) {
      double da = feats[i * d + a] - mu[static_cast<size_t>(a)];
      for (int64_t b = a; b < d; ++b) {
        double db = feats[i * d + b] - mu[static_cast<size_t>(b)];
        cov[static_cast<size_t>(a * d + b)] += da * db;
      }
    }
  }
  const double denom = static_cast<double>(n - 1);
  for (int64_t a = 0; a < d; ++a) {
    for (int64_t b = a; b < d; ++b) {
      double v = cov[static_cast<size_t>(a * d + b)] / denom;
      cov[static_cast<size_t>(a * d + b)] = v;
      cov[static_cast<size_t>(b * d + a)] = v;
    }
  }
}

// C = A * B for n x n row-major matrices.
std::vector<double> matmul_sq(const std::vector<double>& a, const std::vector<double>& b,
                              int64_t n) {
  std::vector<double> c(static_cast<size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t k = 0; k < n; ++k) {
      double aik = a[static_cast<size_t>(i * n + k)];
      if (aik == 0.0) continue;
      for (int64_t j = 0; j < n; ++j) {
        c[static_cast<size_t>(i * n + j)] += aik * b[static_cast<size_t>(k * n + j)];
      }
    }
  }
  return c;
}

// S^{1/2} for symmetric PSD S via eigendecomposition; negatives clamped.
std::vector<double> sym_sqrt(const std::vector<double>& s, int64_t n) {
  std::vector<double> w, v;
  symmetric_eig(s, n, w, v);
  std::vector<double> out(static_cast<size_t>(n * n), 0.0);
  for (int64_t k = 0; k < n; ++k) {
    double lam = w[static_cast<size_t>(k)];
    double root = lam > 0.0 ? std::sqrt(lam) : 0.0;
    if (root == 0.0) continue;
    for (int64_t i = 0; i < n; ++i) {
      double vik = v[static_cast<size_t>(i * n + k)] * root;
      if (vik == 0.0) continue;
      for (int64_t j = 0; j < n; ++j) {
        out[static_cast<size_t>(i * n + j)] += vik * v[static_cast<size_t>(j * n + k)];
      }
    }
  }
  return out;
}

void check_feats(const Tensor& feats, const char* what) {
  if (feats.rank() != 2) {
    throw std::invalid_argument(std::string(what) + ": expected [n, d] features, got " +
                                shape_str(feats.shape));
  }
}

double sq_dist(const Tensor& a, int64_t i, const Tensor& b, int64_t j, int64_t d) {
  double s = 0.0;
  for (int64_t c = 0; c < d; ++c) {
    double diff = a[i * d + c] - b[j * d + c];
    s += diff * diff;
  }
  return s;
}

}  // namespace

Tensor feature_extract(const ModelParams& params, const std::vector<Tensor>& images) {
  if (images.empty()) throw std::invalid_argument("feature_extract: empty image set");
  const int64_t pooled = kLatentSide / 2;
  const int64_t d = kLatentChannels * pooled * pooled;
  Tensor feats = Tensor::zeros({static_cast<int64_t>(images.size()), d});
  for (size_t i = 0; i < images.size(); ++i) {
    check_image_shape(images[i], "feature_extract");
    Tensor z = encode(params, images[i]);
    int64_t col = 0;
    for (int64_t c = 0; c < kLatentChannels; ++c) {
      for (int64_t py = 0; py < pooled; ++py) {
        for (int64_t px = 0; px < pooled; ++px) {
          double s = z.at(c, 2 * py, 2 * px) + z.at(c, 2 * py, 2 * px + 1) +
                     z.at(c, 2 * py + 1, 2 * px) + z.at(c, 2 * py + 1, 2 * px + 1);
          feats[static_cast<int64_t>(i) * d + col] = s / 4.0;
          ++col;
        }
      }
    }
  }
  return feats;
}

void symmetric_eig(std::vector<double> a, int64_t n, std::vector<double>& eigenvalues,
                   std::vector<double>& v) {
  if (n < 1 || static_cast<int64_t>(a.size()) != n * n) {
    throw std::invalid_argument("symmetric_eig: bad matrix size");
  }
  v.assign(static_cast<size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) v[static_cast<size_t>(i * n + i)] = 1.0;

  auto at = [&](std::vector<double>& m, int64_t r, int64_t c) -> double& {
    return m[static_cast<size_t>(r * n + c)];
  };

  // Cyclic sweeps of 2x2 rotations until off-diagonal mass is negligible.
  const int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (int64_t p = 0; p < n; ++p) {
      for (int64_t q = p + 1; q < n; ++q) off += at(a, p, q) * at(a, p, q);
    }
    double diag = 0.0;
    for (int64_t p = 0; p < n; ++p) diag += at(a, p, p) * at(a, p, p);
    if (off <= 1e-24 * (diag + 1e-300) || off == 0.0) break;

    for (int64_t p = 0; p < n; ++p) {
      for (int64_t q = p + 1; q < n; ++q) {
        double apq = at(a, p, q);
        if (apq == 0.0) continue;
        double app = at(a, p, p), aqq = at(a, q, q);
        double tau = (aqq - app) / (2.0 * apq);
        double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;

        for (int64_t k = 0; k < n; ++k) {
          double akp = at(a, k, p), akq = at(a, k, q);
          at(a, k, p) = c * akp - s * akq;
          at(a, k, q) = s * akp + c * akq;
        }
        for (int64_t k = 0; k < n; ++k) {
          double apk = at(a, p, k), aqk = at(a, q, k);
          at(a, p, k) = c * apk - s * aqk;
          at(a, q, k) = s * apk + c * aqk;
        }
        for (int64_t k = 0; k < n; ++k) {
          double vkp = at(v, k, p), vkq = at(v, k, q);
          at(v, k, p) = c * vkp - s * vkq;
          at(v, k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  eigenvalues.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) eigenvalues[static_cast<size_t>(i)] = at(a, i, i);
}

double frechet_proxy(const Tensor& feats_a, const Tensor& feats_b) {
  check_feats(feats_a, "frechet_proxy A");
  check_feats(feats_b, "frechet_proxy B");
  if (feats_a.dim(1) != feats_b.dim(1)) {
    throw std::invalid_argument("frechet_proxy: feature dims differ: " +
                                shape_str(feats_a.shape) + " vs " + shape_str(feats_b.shape));
  }
  if (feats_a.dim(0) < 2 || feats_b.dim(0) < 2) {
    throw std::invalid_argument("frechet_proxy: need at least 2 rows per set");
  }
  const int64_t d = feats_a.dim(1);

  std::vector<double> mu_a, mu_b, cov_a, cov_b;
  gaussian_fit(feats_a, mu_a, cov_a);
  gaussian_fit(feats_b, mu_b, cov_b);
  for (int64_t i = 0; i < d; ++i) {
    cov_a[static_cast<size_t>(i * d + i)] += 1e-6;
    cov_b[static_cast<size_t>(i * d + i)] += 1e-6;
  }

  double mean_term = 0.0;
  for (int64_t i = 0; i < d; ++i) {
    double diff = mu_a[static_cast<size_t>(i)] - mu_b[static_cast<size_t>(i)];
    mean_term += diff * diff;
  }

  double trace_a = 0.0, trace_b = 0.0;
  for (int64_t i = 0; i < d; ++i) {
    trace_a += cov_a[static_cast<size_t>(i * d + i)];
    trace_b += cov_b[static_cast<size_t>(i * d + i)];
  }

  // Tr((SA SB)^{1/2}) via the symmetric product sqrt(SB) SA sqrt(SB), which
  // shares its spectrum with SA SB.
  std::vector<double> rb = sym_sqrt(cov_b, d);
  std::vector<double> m = matmul_sq(matmul_sq(rb, cov_a, d), rb, d);
  // Symmetrize away accumulation asymmetry before the eigensolve.
  for (int64_t i = 0; i < d; ++i) {
    for (int64_t j = i + 1; j < d; ++j) {
      double avg = 0.5 * (m[static_cast<size_t>(i * d + j)] + m[static_cast<size_t>(j * d + i)]);
      m[static_cast<size_t>(i * d + j)] = avg;
      m[static_cast<size_t>(j * d + i)] = avg;
    }
  }
  std::vector<double> w, v;
  symmetric_eig(std::move(m), d, w, v);
  double trace_sqrt = 0.0;
  for (double lam : w) trace_sqrt += lam > 0.0 ? std::sqrt(lam) : 0.0;

  double result = mean_term + trace_a + trace_b - 2.0 * trace_sqrt;
  return result > 0.0 ? result : 0.0;
}

double precision_knn(const Tensor& real_feats, const Tensor& gen_feats, int64_t k) {
  check_feats(real_feats, "precision_knn real");
  check_feats(gen_feats, "precision_knn gen");
  if (real_feats.dim(1) != gen_feats.dim(1)) {
    throw std::invalid_argument("precision_knn: feature dims differ");
  }
  const int64_t nr = real_feats.dim(0), ng = gen_feats.dim(0), d = real_feats.dim(1);
  if (k < 1) throw std::invalid_argument("precision_knn: k must be >= 1");
  if (nr <= k) {
    throw std::invalid_argument("precision_knn: need more than k=" + std::to_string(k) +
                                " real rows, got " + std::to_string(nr));
  }
  if (ng < 1) throw std::invalid_argument("precision_knn: empty generated set");

  // Squared k-th-NN radius of each real point among the other real points.
  std::vector<double> radius_sq(static_cast<size_t>(nr));
  std::vector<double> dists;
  for (int64_t i = 0; i < nr; ++i) {
    dists.clear();
    for (int64_t j = 0; j < nr; ++j) {
      if (j == i) continue;
      dists.push_back(sq_dist(real_feats, i, real_feats, j, d));
    }
    std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
    radius_sq[static_cast<size_t>(i)] = dists[static_cast<size_t>(k - 1)];
  }

  int64_t inside = 0;
  for (int64_t g = 0; g < ng; ++g) {
    for (int64_t i = 0; i < nr; ++i) {
      if (sq_dist(gen_feats, g, real_feats, i, d) <= radius_sq[static_cast<size_t>(i)]) {
        ++inside;
        break;
      }
    }
  }
  return static_cast<double>(inside) / static_cast<double>(ng);
}

double psnr(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("psnr: shapes differ: " + shape_str(a.shape) + " vs " +
                                shape_str(b.shape));
  }
  double mse = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    double diff = a[i] - b[i];
    mse += diff * diff;
  }
  mse /= static_cast<double>(a.numel());
  if (mse < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace veil
