#include "pvc/wtc.hpp"

#include <string>

#include "pvc/error.hpp"
#include "pvc/random.hpp"

namespace pvc {

namespace {

void require_even(const TokenGrid& grid, const char* op) {
  if (grid.h == 0 || grid.w == 0) throw ValidationError(std::string(op) + ": empty token grid");
  if (grid.h % 2 != 0) {
    throw ValidationError(std::string(op) + ": grid height " + std::to_string(grid.h) +
                          " is odd; 2x2 windows need even dimensions");
  }
  if (grid.w % 2 != 0) {
    throw ValidationError(std::string(op) + ": grid width " + std::to_string(grid.w) +
                          " is odd; 2x2 windows need even dimensions");
  }
}

void require_len(const std::vector<double>& v, std::size_t n, const char* what) {
  if (v.size() != n) {
    throw ValidationError(std::string(what) + ": length " + std::to_string(v.size()) +
                          ", expected " + std::to_string(n));
  }
}

Matrix gather(const TokenGrid& grid, const Window& win) {
  Matrix m(4, grid.dim());
  for (std::size_t i = 0; i < 4; ++i) {
    auto src = grid.tokens.row(win[i]);
    std::copy(src.begin(), src.end(), m.row(i).begin());
  }
  return m;
}

// Forward intermediates of the gating MLP for one window.
struct CaWindow {
  Matrix x;        // 4 x D
  Matrix xhat;     // 4 x 2D
  Matrix z;        // 4 x H (pre-activation)
  Matrix h;        // 4 x H
  Matrix weights;  // 4 x D softmax over positions
  std::vector<double> out;
};

CaWindow ca_forward(Matrix x, const CAPoolParams& p) {
  const std::size_t d = x.cols();
  const std::size_t hid = p.hidden();
  CaWindow win{std::move(x), Matrix(4, 2 * d), Matrix(4, hid), Matrix(4, hid), {}, std::vector<double>(d, 0.0)};
  std::vector<double> avg(d, 0.0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < d; ++c) avg[c] += win.x(i, c);
  for (double& v : avg) v *= 0.25;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      win.xhat(i, c) = win.x(i, c);
      win.xhat(i, d + c) = avg[c];
    }
  }
  win.z = matmul(win.xhat, p.mlp_w1);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t k = 0; k < hid; ++k) {
      win.z(i, k) += p.mlp_b1[k];
      win.h(i, k) = gelu(win.z(i, k));
    }
  }
  Matrix logits = matmul(win.h, p.mlp_w2);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < d; ++c) logits(i, c) += p.mlp_b2[c];
  win.weights = channelwise_softmax(logits);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < d; ++c) win.out[c] += win.weights(i, c) * win.x(i, c);
  return win;
}

}  // namespace

std::vector<Window> window_partition(const TokenGrid& grid) {
  require_even(grid, "window_partition");
  std::vector<Window> out;
  out.reserve(grid.count() / 4);
  for (std::size_t r = 0; r < grid.h; r += 2) {
    for (std::size_t c = 0; c < grid.w; c += 2) {
      const std::size_t top = r * grid.w + c;
      const std::size_t bottom = top + grid.w;
      out.push_back({top, top + 1, bottom, bottom + 1});
    }
  }
  return out;
}

TokenGrid avg_pool_compress(const TokenGrid& grid) {
  const auto windows = window_partition(grid);
  TokenGrid out(grid.h / 2, grid.w / 2, grid.dim());
  for (std::size_t k = 0; k < windows.size(); ++k) {
    auto dst = out.tokens.row(k);
    for (std::size_t c = 0; c < dst.size(); ++c) {
      double s = 0.0;
      for (std::size_t idx : windows[k]) s += grid.tokens(idx, c);
      dst[c] = 0.25 * s;
    }
  }
  return out;
}

void CAPoolParams::validate(std::size_t d) const {
  const std::size_t hid = mlp_w1.cols();
  if (hid == 0) throw ValidationError("ca params: hidden width must be >= 1");
  if (mlp_w1.rows() != 2 * d) {
    throw ValidationError("ca params: mlp_w1 has " + std::to_string(mlp_w1.rows()) +
                          " rows, expected 2D = " + std::to_string(2 * d));
  }
  if (mlp_w2.rows() != hid || mlp_w2.cols() != d) {
    throw ValidationError("ca params: mlp_w2 must be " + std::to_string(hid) + "x" + std::to_string(d));
  }
  require_len(mlp_b1, hid, "ca params mlp_b1");
  require_len(mlp_b2, d, "ca params mlp_b2");
}

CAPoolParams zero_init_ca_params(std::size_t dim, std::size_t hidden, std::uint64_t seed) {
  if (dim == 0 || hidden == 0) throw ValidationError("zero_init_ca_params: dim and hidden must be >= 1");
  Rng rng(seed);
  CAPoolParams p{Matrix(2 * dim, hidden), std::vector<double>(hidden), Matrix(hidden, dim),
                 std::vector<double>(dim, 0.0)};
  for (double& v : p.mlp_w1.values()) v = rng.normal(0.0, 0.02);
  for (double& v : p.mlp_b1) v = rng.normal(0.0, 0.02);
  return p;
}

Matrix ca_window_logits(const Matrix& window_tokens, const CAPoolParams& params) {
  if (window_tokens.rows() != 4) throw ValidationError("ca_window_logits: expected 4 tokens");
  params.validate(window_tokens.cols());
  const CaWindow w = ca_forward(window_tokens, params);
  Matrix logits = matmul(w.h, params.mlp_w2);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < logits.cols(); ++c) logits(i, c) += params.mlp_b2[c];
  return logits;
}

TokenGrid ca_pool_compress(const TokenGrid& grid, const CAPoolParams& params) {
  params.validate(grid.dim());
  const auto windows = window_partition(grid);
  TokenGrid out(grid.h / 2, grid.w / 2, grid.dim());
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const CaWindow w = ca_forward(gather(grid, windows[k]), params);
    std::copy(w.out.begin(), w.out.end(), out.tokens.row(k).begin());
  }
  return out;
}

CAPoolGradients ca_pool_gradients(const TokenGrid& grid, const CAPoolParams& params,
                                  const TokenGrid& upstream) {
  params.validate(grid.dim());
  const auto windows = window_partition(grid);
  if (upstream.h != grid.h / 2 || upstream.w != grid.w / 2 || upstream.dim() != grid.dim()) {
    throw ValidationError("ca_pool_gradients: upstream grid must be " + std::to_string(grid.h / 2) +
                          "x" + std::to_string(grid.w / 2) + "x" + std::to_string(grid.dim()));
  }
  const std::size_t d = grid.dim();
  const std::size_t hid = params.hidden();
  CAPoolGradients g{Matrix(grid.tokens.rows(), d), Matrix(2 * d, hid), std::vector<double>(hid, 0.0),
                    Matrix(hid, d), std::vector<double>(d, 0.0)};
  const Matrix w1t = params.mlp_w1.transposed();
  const Matrix w2t = params.mlp_w2.transposed();

  for (std::size_t k = 0; k < windows.size(); ++k) {
    const CaWindow w = ca_forward(gather(grid, windows[k]), params);
    auto up = upstream.tokens.row(k);

    // y[c] = sum_i s_i[c] x_i[c];  dL/da_i[c] = g[c] s_i[c] (x_i[c] - y[c]).
    Matrix da(4, d);
    Matrix dx(4, d);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        dx(i, c) = up[c] * w.weights(i, c);
        da(i, c) = up[c] * w.weights(i, c) * (w.x(i, c) - w.out[c]);
      }
    }
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t c = 0; c < d; ++c) g.mlp_b2[c] += da(i, c);
      for (std::size_t r = 0; r < hid; ++r) {
        const double hr = w.h(i, r);
        for (std::size_t c = 0; c < d; ++c) g.mlp_w2(r, c) += hr * da(i, c);
      }
    }
    Matrix dz = matmul(da, w2t);  // 4 x H
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t r = 0; r < hid; ++r) dz(i, r) *= gelu_derivative(w.z(i, r));
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t r = 0; r < hid; ++r) g.mlp_b1[r] += dz(i, r);
      for (std::size_t q = 0; q < 2 * d; ++q) {
        const double xq = w.xhat(i, q);
        if (xq == 0.0) continue;
        for (std::size_t r = 0; r < hid; ++r) g.mlp_w1(q, r) += xq * dz(i, r);
      }
    }
    const Matrix dxhat = matmul(dz, w1t);  // 4 x 2D
    std::vector<double> davg(d, 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        dx(i, c) += dxhat(i, c);
        davg[c] += dxhat(i, d + c);
      }
    }
    for (std::size_t i = 0; i < 4; ++i) {
      auto dst = g.input.row(windows[k][i]);
      for (std::size_t c = 0; c < d; ++c) dst[c] += dx(i, c) + 0.25 * davg[c];
    }
  }
  return g;
}

void PixelUnshuffleParams::validate(std::size_t d) const {
  if (proj.rows() != 4 * d || proj.cols() != d) {
    throw ValidationError("pixel-unshuffle params: proj is " + std::to_string(proj.rows()) + "x" +
                          std::to_string(proj.cols()) + ", expected " + std::to_string(4 * d) +
                          "x" + std::to_string(d));
  }
  require_len(bias, d, "pixel-unshuffle bias");
}

PixelUnshuffleParams averaging_unshuffle_params(std::size_t dim) {
  PixelUnshuffleParams p{Matrix(4 * dim, dim), std::vector<double>(dim, 0.0)};
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t c = 0; c < dim; ++c) p.proj(b * dim + c, c) = 0.25;
  return p;
}

TokenGrid pixel_unshuffle_compress(const TokenGrid& grid, const PixelUnshuffleParams& params) {
  params.validate(grid.dim());
  const auto windows = window_partition(grid);
  const std::size_t d = grid.dim();
  Matrix stacked(windows.size(), 4 * d);
  for (std::size_t k = 0; k < windows.size(); ++k) {
    auto dst = stacked.row(k);
    for (std::size_t i = 0; i < 4; ++i) {
      auto src = grid.tokens.row(windows[k][i]);
      std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
  }
  Matrix out = matmul(stacked, params.proj);
  for (std::size_t k = 0; k < out.rows(); ++k)
    for (std::size_t c = 0; c < d; ++c) out(k, c) += params.bias[c];
  return TokenGrid(grid.h / 2, grid.w / 2, std::move(out));
}

}  // namespace pvc
