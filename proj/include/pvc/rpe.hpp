#pragma once

// Refined patch embedding: re-express a patch-embedding kernel trained at
// patch size P at a smaller patch size P_hat, so that fine patches embed the
// same way their coarse originals did.
//
// Patch vector layout (used everywhere, including weight files): channel-major,
// then row-major pixels, i.e. index = c * P * P + y * P + x.

#include <cstddef>
#include <vector>

#include "pvc/image.hpp"
#include "pvc/numerics.hpp"
#include "pvc/token_grid.hpp"

namespace pvc {

/// Linear map B with fine = coarse * B, shape (C*P*P) x (C*Ph*Ph).
struct ResizeMap {
  std::size_t coarse_patch = 0;
  std::size_t fine_patch = 0;
  std::size_t channels = 0;
  Matrix matrix;
};

/// Kernel W (D x C*P*P) and bias (D). Tokens are t * W^T + bias.
struct PatchEmbedWeights {
  Matrix weight;
  std::vector<double> bias;
  std::size_t patch = 0;
  std::size_t channels = 0;

  std::size_t dim() const { return weight.rows(); }
  std::size_t patch_len() const { return channels * patch * patch; }
  void validate() const;
};

/// Uncentered second moment E[x x^T] of coarse patches, ridge already added.
struct CovarianceEstimate {
  Matrix sigma;
  std::size_t sample_count = 0;
  double ridge = 0.0;
};

/// Patches of an image in raster order, one row per patch.
struct PatchGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t patch = 0;
  std::size_t channels = 0;
  Matrix patches;
};

/// Per-channel bilinear resampling from P x P to Ph x Ph (half-pixel centers).
/// Throws ValidationError if fine > coarse or either is zero.
ResizeMap build_resize_map(std::size_t channels, std::size_t coarse, std::size_t fine);

/// Least-squares weight transform: W_hat^T = B^+ W^T, bias copied.
PatchEmbedWeights pi_resize_weights(const PatchEmbedWeights& w, const ResizeMap& b);

CovarianceEstimate estimate_patch_covariance(const Matrix& samples, double ridge = 1e-6);

/// Sigma-weighted variant: W_hat^T = (sqrt(S) B)^+ sqrt(S) W^T, minimizing
/// (w - B w_hat)^T S (w - B w_hat) per filter.
PatchEmbedWeights pi_resize_weights_sigma(const PatchEmbedWeights& w, const ResizeMap& b,
                                          const CovarianceEstimate& cov);

PatchGrid patchify(const Image& image, std::size_t patch);

TokenGrid embed(const PatchGrid& grid, const PatchEmbedWeights& w);

/// Diagnostics for a completed transform.
struct ResizeReport {
  double residual_fro = 0.0;        // ||W^T - B W_hat^T||_F
  double normal_eq_max_abs = 0.0;   // max |B^T (W^T - B W_hat^T)|
  double sigma_max = 0.0;           // of B
  double sigma_min = 0.0;
  double condition = 0.0;
};

ResizeReport resize_report(const PatchEmbedWeights& original, const PatchEmbedWeights& resized,
                           const ResizeMap& b);

}  // namespace pvc
