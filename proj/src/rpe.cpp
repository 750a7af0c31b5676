#include "pvc/rpe.hpp"

#include <limits>
#include <string>

#include "pvc/error.hpp"

namespace pvc {

void PatchEmbedWeights::validate() const {
  if (patch == 0 || channels == 0) throw ValidationError("patch embedding: zero patch or channels");
  if (weight.cols() != patch_len()) {
    throw ValidationError("patch embedding: weight has " + std::to_string(weight.cols()) +
                          " columns, expected C*P*P = " + std::to_string(patch_len()));
  }
  if (bias.size() != weight.rows()) {
    throw ValidationError("patch embedding: bias length " + std::to_string(bias.size()) +
                          " != dim " + std::to_string(weight.rows()));
  }
  if (!all_finite(weight.values()) || !all_finite(bias)) {
    throw ValidationError("patch embedding: non-finite values");
  }
}

ResizeMap build_resize_map(std::size_t channels, std::size_t coarse, std::size_t fine) {
  if (channels == 0 || coarse == 0 || fine == 0) {
    throw ValidationError("build_resize_map: channels and patch sizes must be >= 1");
  }
  if (fine > coarse) {
    throw ValidationError("build_resize_map: fine patch " + std::to_string(fine) +
                          " exceeds coarse patch " + std::to_string(coarse) +
                          "; only downsizing is supported");
  }
  const auto r = bilinear_weights(coarse, fine);
  const std::size_t cp = coarse * coarse;
  const std::size_t fp = fine * fine;
  Matrix b(channels * cp, channels * fp);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t oy = 0; oy < fine; ++oy) {
      for (std::size_t ox = 0; ox < fine; ++ox) {
        const std::size_t col = c * fp + oy * fine + ox;
        for (std::size_t iy = 0; iy < coarse; ++iy) {
          if (r[oy][iy] == 0.0) continue;
          for (std::size_t ix = 0; ix < coarse; ++ix) {
            b(c * cp + iy * coarse + ix, col) = r[oy][iy] * r[ox][ix];
          }
        }
      }
    }
  }
  return ResizeMap{coarse, fine, channels, std::move(b)};
}

namespace {

void check_compatible(const PatchEmbedWeights& w, const ResizeMap& b) {
  w.validate();
  if (b.coarse_patch != w.patch || b.channels != w.channels) {
    throw ValidationError("pi_resize: resize map is for C=" + std::to_string(b.channels) +
                          " P=" + std::to_string(b.coarse_patch) + " but weights have C=" +
                          std::to_string(w.channels) + " P=" + std::to_string(w.patch));
  }
  if (b.matrix.rows() != w.patch_len()) throw ValidationError("pi_resize: resize matrix shape");
}

}  // namespace

PatchEmbedWeights pi_resize_weights(const PatchEmbedWeights& w, const ResizeMap& b) {
  check_compatible(w, b);
  if (b.fine_patch == b.coarse_patch) return w;
  // W_hat = W (B^+)^T
  const Matrix b_pinv = pseudo_inverse(b.matrix);
  return PatchEmbedWeights{matmul(w.weight, b_pinv.transposed()), w.bias, b.fine_patch, w.channels};
}

CovarianceEstimate estimate_patch_covariance(const Matrix& samples, double ridge) {
  if (samples.rows() == 0) throw ValidationError("estimate_patch_covariance: empty sample");
  if (ridge < 0.0) throw ValidationError("estimate_patch_covariance: ridge must be >= 0");
  const std::size_t d = samples.cols();
  Matrix sigma(d, d);
  for (std::size_t s = 0; s < samples.rows(); ++s) {
    auto x = samples.row(s);
    for (std::size_t i = 0; i < d; ++i) {
      if (x[i] == 0.0) continue;
      double* row = sigma.row(i).data();
      for (std::size_t j = 0; j < d; ++j) row[j] += x[i] * x[j];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(samples.rows());
  for (double& v : sigma.values()) v *= inv_n;
  for (std::size_t i = 0; i < d; ++i) sigma(i, i) += ridge;
  return CovarianceEstimate{std::move(sigma), samples.rows(), ridge};
}

PatchEmbedWeights pi_resize_weights_sigma(const PatchEmbedWeights& w, const ResizeMap& b,
                                          const CovarianceEstimate& cov) {
  check_compatible(w, b);
  if (cov.sigma.rows() != w.patch_len() || cov.sigma.cols() != w.patch_len()) {
    throw ValidationError("pi_resize_sigma: covariance is " + std::to_string(cov.sigma.rows()) +
                          "x" + std::to_string(cov.sigma.cols()) + ", expected " +
                          std::to_string(w.patch_len()) + " square");
  }
  const Matrix root = psd_sqrt(cov.sigma);
  const Matrix lhs = matmul(root, b.matrix);
  const Matrix rhs = matmul(root, w.weight.transposed());
  const Matrix w_hat_t = matmul(pseudo_inverse(lhs), rhs);
  return PatchEmbedWeights{w_hat_t.transposed(), w.bias, b.fine_patch, w.channels};
}

PatchGrid patchify(const Image& image, std::size_t patch) {
  if (patch == 0) throw ValidationError("patchify: patch size must be >= 1");
  if (image.height == 0 || image.width == 0 || image.channels == 0) {
    throw ValidationError("patchify: empty image");
  }
  if (image.height % patch != 0 || image.width % patch != 0) {
    throw ValidationError("patchify: image " + std::to_string(image.height) + "x" +
                          std::to_string(image.width) + " must be a multiple of " +
                          std::to_string(patch) + " in both dimensions");
  }
  const std::size_t rows = image.height / patch;
  const std::size_t cols = image.width / patch;
  const std::size_t c_count = image.channels;
  PatchGrid g{rows, cols, patch, c_count, Matrix(rows * cols, c_count * patch * patch)};
  for (std::size_t pr = 0; pr < rows; ++pr) {
    for (std::size_t pc = 0; pc < cols; ++pc) {
      auto out = g.patches.row(pr * cols + pc);
      for (std::size_t c = 0; c < c_count; ++c)
        for (std::size_t y = 0; y < patch; ++y)
          for (std::size_t x = 0; x < patch; ++x)
            out[c * patch * patch + y * patch + x] = image.at(pr * patch + y, pc * patch + x, c);
    }
  }
  return g;
}

TokenGrid embed(const PatchGrid& grid, const PatchEmbedWeights& w) {
  w.validate();
  if (grid.patches.cols() != w.patch_len()) {
    throw ValidationError("embed: patch length " + std::to_string(grid.patches.cols()) +
                          " does not match weights (C*P*P = " + std::to_string(w.patch_len()) + ")");
  }
  Matrix tokens = matmul(grid.patches, w.weight.transposed());
  for (std::size_t i = 0; i < tokens.rows(); ++i) {
    auto row = tokens.row(i);
    for (std::size_t d = 0; d < row.size(); ++d) row[d] += w.bias[d];
  }
  return TokenGrid(grid.rows, grid.cols, std::move(tokens));
}

ResizeReport resize_report(const PatchEmbedWeights& original, const PatchEmbedWeights& resized,
                           const ResizeMap& b) {
  const Matrix residual = original.weight.transposed() - matmul(b.matrix, resized.weight.transposed());
  const SvdFactors f = svd(b.matrix);
  ResizeReport r;
  r.residual_fro = frobenius_norm(residual);
  r.normal_eq_max_abs = max_abs(matmul(b.matrix.transposed(), residual));
  r.sigma_max = f.singular_values.front();
  r.sigma_min = f.singular_values.back();
  r.condition = r.sigma_min > 0.0 ? r.sigma_max / r.sigma_min : std::numeric_limits<double>::infinity();
  return r;
}

}  // namespace pvc
