#pragma once

#include <cstddef>
#include <span>

#include "pvc/numerics.hpp"

namespace pvc {

/// h x w grid of D-dimensional tokens, stored raster order as an (h*w) x D matrix.
struct TokenGrid {
  std::size_t h = 0;
  std::size_t w = 0;
  Matrix tokens;

  TokenGrid() = default;
  TokenGrid(std::size_t rows, std::size_t cols, std::size_t dim)
      : h(rows), w(cols), tokens(rows * cols, dim) {}
  TokenGrid(std::size_t rows, std::size_t cols, Matrix values);

  std::size_t dim() const { return tokens.cols(); }
  std::size_t count() const { return h * w; }

  std::span<double> at(std::size_t r, std::size_t c) { return tokens.row(r * w + c); }
  std::span<const double> at(std::size_t r, std::size_t c) const { return tokens.row(r * w + c); }

  friend bool operator==(const TokenGrid&, const TokenGrid&) = default;
};

}  // namespace pvc
