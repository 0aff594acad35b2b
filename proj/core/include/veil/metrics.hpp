#pragma once

#include <cstdint>
#include <vector>

#include "veil/model.hpp"
#include "veil/tensor.hpp"

namespace veil {

// Encoder latents average-pooled over 2x2 blocks and flattened: one 64-d row
// per image (4 channels x 4x4 grid).
Tensor feature_extract(const ModelParams& params, const std::vector<Tensor>& images);

// Cyclic Jacobi eigendecomposition of a symmetric n x n matrix (row-major).
// Fills eigenvalues (unsorted) and eigenvectors as columns of v.
void symmetric_eig(std::vector<double> a, int64_t n, std::vector<double>& eigenvalues,
                   std::vector<double>& v);

// ||muA - muB||^2 + Tr(SA + SB - 2 (SA SB)^{1/2}) over Gaussian fits of the
// two feature sets (rank-2 [n, d] tensors). Covariances get +1e-6 I before
// the square root; tiny negative eigenvalues are clamped to zero and the
// result is floored at 0.
double frechet_proxy(const Tensor& feats_a, const Tensor& feats_b);

// Fraction of generated rows lying within some real row's k-th-nearest-
// neighbor radius (neighbors among the real set, self excluded).
double precision_knn(const Tensor& real_feats, const Tensor& gen_feats, int64_t k);

// 10 log10(1 / mse) with peak 1.0; capped at 100 dB when mse < 1e-10.
double psnr(const Tensor& a, const Tensor& b);

}  // namespace veil
