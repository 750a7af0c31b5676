#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pvc {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  Matrix transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

double max_abs(const Matrix& m);
double frobenius_norm(const Matrix& m);
bool all_finite(std::span<const double> values);

/// Thin SVD: m (r x c) == u * diag(singular_values) * vt with k = min(r, c).
struct SvdFactors {
  Matrix u;                              // r x k, orthonormal columns
  std::vector<double> singular_values;   // k, descending, non-negative
  Matrix vt;                             // k x c, orthonormal rows
};

/// One-sided Jacobi SVD. Deterministic for a fixed input.
/// Throws NumericalError if the sweep cap is hit.
SvdFactors svd(const Matrix& m);

/// Moore-Penrose pseudo-inverse. Singular values below rcond * s_max are
/// treated as zero.
Matrix pseudo_inverse(const Matrix& m, double rcond = 1e-12);

/// Symmetric PSD square root of m + ridge * I.
Matrix psd_sqrt(const Matrix& m, double ridge = 0.0);

/// Softmax over the rows of `logits` (k x D), independently for every column.
Matrix channelwise_softmax(const Matrix& logits);

/// Per-head attention probabilities, one n x n matrix per head.
std::vector<Matrix> attention_probabilities(const Matrix& q, const Matrix& k,
                                            std::size_t heads);

/// Global multi-head attention without projections; q, k, v are n x D.
Matrix scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                            std::size_t heads);

Matrix layer_norm(const Matrix& x, std::span<const double> gamma,
                  std::span<const double> beta, double eps = 1e-6);

double gelu(double x);
double gelu_derivative(double x);

}  // namespace pvc
