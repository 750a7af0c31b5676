#pragma once

// Windowed token compression. Every compressor merges each non-overlapping
// 2x2 window of a token grid into one token, halving both grid dimensions.
// Window order: top-left, top-right, bottom-left, bottom-right.

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "pvc/numerics.hpp"
#include "pvc/token_grid.hpp"

namespace pvc {

/// Raster indices of the four tokens of one window.
using Window = std::array<std::size_t, 4>;

std::vector<Window> window_partition(const TokenGrid& grid);

TokenGrid avg_pool_compress(const TokenGrid& grid);

/// Gating MLP f: R^{2D} -> R^D with one GELU hidden layer.
struct CAPoolParams {
  Matrix mlp_w1;                // 2D x H
  std::vector<double> mlp_b1;   // H
  Matrix mlp_w2;                // H x D
  std::vector<double> mlp_b2;   // D

  std::size_t dim() const { return mlp_w2.cols(); }
  std::size_t hidden() const { return mlp_w1.cols(); }
  void validate(std::size_t dim) const;
};

/// w1/b1 ~ N(0, 0.02^2) from `seed`; w2 and b2 exactly zero, so every logit
/// starts at zero and the pooling starts out as a plain average.
CAPoolParams zero_init_ca_params(std::size_t dim, std::size_t hidden, std::uint64_t seed);

/// Channel-wise logits a_i = f([x_i; x_avg]) for the four tokens of a window (4 x D).
Matrix ca_window_logits(const Matrix& window_tokens, const CAPoolParams& params);

TokenGrid ca_pool_compress(const TokenGrid& grid, const CAPoolParams& params);

struct CAPoolGradients {
  Matrix input;                 // same shape as grid.tokens
  Matrix mlp_w1;
  std::vector<double> mlp_b1;
  Matrix mlp_w2;
  std::vector<double> mlp_b2;
};

/// Gradients of L = sum(upstream .* ca_pool_compress(grid, params)).
CAPoolGradients ca_pool_gradients(const TokenGrid& grid, const CAPoolParams& params,
                                  const TokenGrid& upstream);

struct PixelUnshuffleParams {
  Matrix proj;                  // 4D x D
  std::vector<double> bias;     // D

  void validate(std::size_t dim) const;
};

/// Stacked (1/4) I blocks, zero bias: reproduces average pooling exactly.
PixelUnshuffleParams averaging_unshuffle_params(std::size_t dim);

TokenGrid pixel_unshuffle_compress(const TokenGrid& grid, const PixelUnshuffleParams& params);

}  // namespace pvc
