#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>

#include "pvc/numerics.hpp"
#include "pvc/random.hpp"
#include "pvc/token_grid.hpp"

namespace pvc::test {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal(0.0, scale);
  return m;
}

inline TokenGrid random_grid(Rng& rng, std::size_t h, std::size_t w, std::size_t dim) {
  return TokenGrid(h, w, random_matrix(rng, h * w, dim));
}

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  return e;
}

inline Matrix from_eigen(const Eigen::MatrixXd& e) {
  Matrix m(e.rows(), e.cols());
  for (Eigen::Index r = 0; r < e.rows(); ++r)
    for (Eigen::Index c = 0; c < e.cols(); ++c) m(r, c) = e(r, c);
  return m;
}

inline double max_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline double max_diff(const Matrix& a, const Matrix& b) { return max_diff(a.values(), b.values()); }

}  // namespace pvc::test
