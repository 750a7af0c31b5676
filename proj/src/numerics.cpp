#include "pvc/numerics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "pvc/error.hpp"

namespace pvc {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " +
                          shape_str(b));
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Columns of `basis` (stored as rows of a column-major work array) that are
// exactly zero get replaced with unit vectors orthogonal to the others.
void complete_orthonormal(std::vector<std::vector<double>>& cols, std::vector<bool>& valid) {
  const std::size_t m = cols.empty() ? 0 : cols[0].size();
  std::size_t candidate = 0;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (valid[j]) continue;
    while (candidate < m) {
      std::vector<double> e(m, 0.0);
      e[candidate++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < cols.size(); ++i) {
          if (!valid[i]) continue;
          const double proj = dot(e, cols[i]);
          for (std::size_t r = 0; r < m; ++r) e[r] -= proj * cols[i][r];
        }
      }
      const double norm = std::sqrt(dot(e, e));
      if (norm > 1e-6) {
        for (double& x : e) x /= norm;
        cols[j] = std::move(e);
        valid[j] = true;
        break;
      }
    }
  }
}

// Requires rows >= cols.
SvdFactors svd_tall(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  std::vector<std::vector<double>> work(n, std::vector<double>(m));
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) work[j][i] = a(i, j);
    v[j][j] = 1.0;
  }

  constexpr int kMaxSweeps = 100;
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto& ap = work[p];
        auto& aq = work[q];
        const double alpha = dot(ap, ap);
        const double beta = dot(aq, aq);
        const double gamma = dot(ap, aq);
        if (gamma == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = ap[i];
          const double y = aq[i];
          ap[i] = c * x - s * y;
          aq[i] = s * x + c * y;
        }
        auto& vp = v[p];
        auto& vq = v[q];
        for (std::size_t i = 0; i < n; ++i) {
          const double x = vp[i];
          const double y = vq[i];
          vp[i] = c * x - s * y;
          vq[i] = s * x + c * y;
        }
      }
    }
  }
  if (!converged) {
    throw NumericalError("svd: no convergence after " + std::to_string(kMaxSweeps) +
                         " sweeps for " + shape_str(a) + " matrix");
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(dot(work[j], work[j]));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  std::vector<std::vector<double>> ucols(n);
  std::vector<bool> valid(n, false);
  std::vector<double> s_sorted(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    s_sorted[k] = sigma[j];
    ucols[k] = work[j];
    if (sigma[j] > std::numeric_limits<double>::min()) {
      for (double& x : ucols[k]) x /= sigma[j];
      valid[k] = true;
    }
  }
  complete_orthonormal(ucols, valid);

  SvdFactors out{Matrix(m, n), std::move(s_sorted), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < m; ++i) out.u(i, k) = ucols[k][i];
    for (std::size_t i = 0; i < n; ++i) out.vt(k, i) = v[order[k]][i];
  }
  return out;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ValidationError("Matrix: " + std::to_string(data_.size()) +
                          " values do not fill " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ValidationError("matmul: inner dimension mismatch " + shape_str(a) + " * " +
                          shape_str(b));
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* orow = out.row(i).data();
    const double* arow = a.row(i).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = arow[k];
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return out;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix out = a;
  for (double& x : out.values()) x *= s;
  return out;
}

double max_abs(const Matrix& m) {
  double best = 0.0;
  for (double x : m.values()) best = std::max(best, std::abs(x));
  return best;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double x : m.values()) s += x * x;
  return std::sqrt(s);
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

SvdFactors svd(const Matrix& m) {
  if (m.empty()) throw ValidationError("svd: empty matrix");
  if (!all_finite(m.values())) throw ValidationError("svd: non-finite entries in " + shape_str(m));
  if (m.rows() >= m.cols()) return svd_tall(m);
  SvdFactors t = svd_tall(m.transposed());
  return SvdFactors{t.vt.transposed(), std::move(t.singular_values), t.u.transposed()};
}

Matrix pseudo_inverse(const Matrix& m, double rcond) {
  if (m.empty()) throw ValidationError("pseudo_inverse: empty matrix");
  if (!(rcond > 0.0 && rcond < 1.0)) {
    throw ValidationError("pseudo_inverse: rcond must lie in (0, 1)");
  }
  const SvdFactors f = svd(m);
  const double cutoff = rcond * f.singular_values.front();
  const std::size_t k = f.singular_values.size();
  // m+ = V * diag(1/s) * U^T
  Matrix out(m.cols(), m.rows());
  for (std::size_t p = 0; p < k; ++p) {
    const double s = f.singular_values[p];
    if (s <= cutoff || s == 0.0) continue;
    const double inv = 1.0 / s;
    for (std::size_t i = 0; i < m.cols(); ++i) {
      const double vi = f.vt(p, i) * inv;
      if (vi == 0.0) continue;
      double* orow = out.row(i).data();
      for (std::size_t j = 0; j < m.rows(); ++j) orow[j] += vi * f.u(j, p);
    }
  }
  return out;
}

Matrix psd_sqrt(const Matrix& m, double ridge) {
  if (m.empty() || m.rows() != m.cols()) {
    throw ValidationError("psd_sqrt: expected a non-empty square matrix, got " + shape_str(m));
  }
  if (ridge < 0.0) throw ValidationError("psd_sqrt: ridge must be >= 0");
  const std::size_t n = m.rows();
  const double scale = std::max(1.0, max_abs(m));
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-9 * scale) {
        throw ValidationError("psd_sqrt: matrix is not symmetric");
      }
      a(i, j) = 0.5 * (m(i, j) + m(j, i));
    }
    a(i, i) += ridge;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("psd_sqrt: eigendecomposition failed for " + shape_str(m));
  }
  Eigen::VectorXd lambda = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -1e-9 * scale) {
      std::ostringstream msg;
      msg << "psd_sqrt: input is not PSD (eigenvalue " << lambda(i) << ")";
      throw NumericalError(msg.str());
    }
    lambda(i) = std::sqrt(std::max(0.0, lambda(i)));
  }
  const Eigen::MatrixXd& vecs = eig.eigenvectors();
  const Eigen::MatrixXd s = vecs * lambda.asDiagonal() * vecs.transpose();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = 0.5 * (s(i, j) + s(j, i));
  return out;
}

Matrix channelwise_softmax(const Matrix& logits) {
  if (logits.rows() == 0) throw ValidationError("channelwise_softmax: need at least one vector");
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t c = 0; c < logits.cols(); ++c) {
    double mx = logits(0, c);
    for (std::size_t i = 1; i < logits.rows(); ++i) mx = std::max(mx, logits(i, c));
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
      const double e = std::exp(logits(i, c) - mx);
      out(i, c) = e;
      sum += e;
    }
    for (std::size_t i = 0; i < logits.rows(); ++i) out(i, c) /= sum;
  }
  return out;
}

namespace {

void check_attention_shapes(const Matrix& q, const Matrix& k, const Matrix* v, std::size_t heads) {
  if (heads == 0 || q.cols() % heads != 0) {
    throw ValidationError("attention: dim " + std::to_string(q.cols()) +
                          " is not divisible by heads " + std::to_string(heads));
  }
  const bool ok = q.cols() == k.cols() && q.rows() == k.rows() &&
                  (v == nullptr || (v->rows() == q.rows() && v->cols() == q.cols()));
  if (!ok) throw ValidationError("attention: q, k, v shapes differ");
}

}  // namespace

std::vector<Matrix> attention_probabilities(const Matrix& q, const Matrix& k, std::size_t heads) {
  check_attention_shapes(q, k, nullptr, heads);
  const std::size_t n = q.rows();
  const std::size_t dh = q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Matrix> out;
  out.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Matrix p(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t d = 0; d < dh; ++d) s += q(i, h * dh + d) * k(j, h * dh + d);
        p(i, j) = s * scale;
        mx = std::max(mx, p(i, j));
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        p(i, j) = std::exp(p(i, j) - mx);
        sum += p(i, j);
      }
      for (std::size_t j = 0; j < n; ++j) p(i, j) /= sum;
    }
    out.push_back(std::move(p));
  }
  return out;
}

Matrix scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t heads) {
  check_attention_shapes(q, k, &v, heads);
  const std::size_t n = q.rows();
  const std::size_t dim = q.cols();
  const std::size_t dh = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out(n, dim);
  // Per-head contiguous copies keep the inner loops unit-stride.
  std::vector<double> kh(n * dh), vh(n * dh), scores(n);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t d = 0; d < dh; ++d) {
        kh[j * dh + d] = k(j, h * dh + d);
        vh[j * dh + d] = v(j, h * dh + d);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double* qi = q.row(i).data() + h * dh;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        const double* kj = kh.data() + j * dh;
        double s = 0.0;
        for (std::size_t d = 0; d < dh; ++d) s += qi[d] * kj[d];
        scores[j] = s * scale;
        mx = std::max(mx, scores[j]);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        scores[j] = std::exp(scores[j] - mx);
        sum += scores[j];
      }
      double* oi = out.row(i).data() + h * dh;
      for (std::size_t j = 0; j < n; ++j) {
        const double w = scores[j];
        const double* vj = vh.data() + j * dh;
        for (std::size_t d = 0; d < dh; ++d) oi[d] += w * vj[d];
      }
      const double inv = 1.0 / sum;
      for (std::size_t d = 0; d < dh; ++d) oi[d] *= inv;
    }
  }
  return out;
}

Matrix layer_norm(const Matrix& x, std::span<const double> gamma, std::span<const double> beta,
                  double eps) {
  if (gamma.size() != x.cols() || beta.size() != x.cols()) {
    throw ValidationError("layer_norm: gamma/beta length does not match dim " +
                          std::to_string(x.cols()));
  }
  if (!(eps > 0.0)) throw ValidationError("layer_norm: eps must be > 0");
  Matrix out(x.rows(), x.cols());
  const double inv_d = 1.0 / static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean *= inv_d;
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var *= inv_d;
    const double rstd = 1.0 / std::sqrt(var + eps);
    auto o = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) o[c] = (in[c] - mean) * rstd * gamma[c] + beta[c];
  }
  return out;
}

// Exact (erf) GELU.
double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_derivative(double x) {
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  return cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

}  // namespace pvc
