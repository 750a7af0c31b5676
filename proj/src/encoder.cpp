#include "pvc/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pvc/error.hpp"
#include "pvc/random.hpp"

namespace pvc {

std::string_view to_string(WtcKind kind) {
  switch (kind) {
    case WtcKind::kAvg: return "avg";
    case WtcKind::kCa: return "ca";
    case WtcKind::kPixelUnshuffle: return "pixel_unshuffle";
  }
  return "?";
}

WtcKind parse_wtc_kind(std::string_view name) {
  if (name == "avg") return WtcKind::kAvg;
  if (name == "ca") return WtcKind::kCa;
  if (name == "pixel_unshuffle") return WtcKind::kPixelUnshuffle;
  throw ValidationError("unknown compressor kind '" + std::string(name) +
                        "' (expected avg, ca or pixel_unshuffle)");
}

std::vector<std::size_t> WtcPlan::layers() const {
  std::vector<std::size_t> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.layer);
  return out;
}

WtcPlan WtcPlan::uniform(std::vector<std::size_t> layers, WtcKind kind) {
  WtcPlan p;
  for (std::size_t l : layers) p.entries.push_back({l, kind});
  return p;
}

std::size_t EncoderConfig::mlp_hidden() const {
  return static_cast<std::size_t>(std::llround(mlp_ratio * static_cast<double>(dim)));
}

std::size_t EncoderConfig::block_multiple() const {
  return patch << plan.count();
}

void EncoderConfig::validate() const {
  if (depth < 1) throw ValidationError("config: depth must be >= 1");
  if (dim < 1) throw ValidationError("config: dim must be >= 1");
  if (heads < 1 || dim % heads != 0) {
    throw ValidationError("config: dim " + std::to_string(dim) + " is not divisible by heads " +
                          std::to_string(heads));
  }
  if (dim % 4 != 0) {
    throw ValidationError("config: dim " + std::to_string(dim) +
                          " must be divisible by 4 for 2-D sinusoidal position codes");
  }
  if (!(mlp_ratio > 0.0) || mlp_hidden() == 0) throw ValidationError("config: mlp_ratio must be > 0");
  if (patch < 1) throw ValidationError("config: patch must be >= 1");
  if (source_patch && *source_patch < patch) {
    throw ValidationError("config: source_patch " + std::to_string(*source_patch) +
                          " is smaller than patch " + std::to_string(patch));
  }
  if (channels < 1) throw ValidationError("config: channels must be >= 1");
  if (plan.count() > 20) throw ValidationError("config: too many compressors");
  for (std::size_t i = 0; i < plan.entries.size(); ++i) {
    const std::size_t l = plan.entries[i].layer;
    if (l > depth) {
      throw ValidationError("config: compressor index " + std::to_string(l) + " exceeds depth " +
                            std::to_string(depth));
    }
    if (i > 0 && l <= plan.entries[i - 1].layer) {
      throw ValidationError("config: compressor indices must be strictly increasing");
    }
  }
}

namespace {

Linear random_linear(Rng& rng, std::size_t in, std::size_t out) {
  Linear l{Matrix(in, out), std::vector<double>(out, 0.0)};
  for (double& v : l.weight.values()) v = rng.normal(0.0, 0.02);
  return l;
}

void check_linear(const Linear& l, std::size_t in, std::size_t out, const std::string& what) {
  if (l.weight.rows() != in || l.weight.cols() != out || l.bias.size() != out) {
    throw ValidationError("state: " + what + " must be " + std::to_string(in) + "x" +
                          std::to_string(out));
  }
}

void check_vec(const std::vector<double>& v, std::size_t n, const std::string& what) {
  if (v.size() != n) throw ValidationError("state: " + what + " must have length " + std::to_string(n));
}

Matrix linear(const Matrix& x, const Linear& l) {
  Matrix y = matmul(x, l.weight);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += l.bias[c];
  }
  return y;
}

}  // namespace

EncoderState init_state(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, 0));
  EncoderState s;

  const std::size_t src_patch = config.source_patch.value_or(config.patch);
  PatchEmbedWeights pe{Matrix(config.dim, config.channels * src_patch * src_patch),
                       std::vector<double>(config.dim, 0.0), src_patch, config.channels};
  for (double& v : pe.weight.values()) v = rng.normal(0.0, 0.02);
  if (src_patch != config.patch) {
    pe = pi_resize_weights(pe, build_resize_map(config.channels, src_patch, config.patch));
  }
  s.patch_embed = std::move(pe);

  const std::size_t d = config.dim;
  const std::size_t hidden = config.mlp_hidden();
  for (std::size_t b = 0; b < config.depth; ++b) {
    BlockParams p;
    p.norm1_gamma.assign(d, 1.0);
    p.norm1_beta.assign(d, 0.0);
    p.qkv = random_linear(rng, d, 3 * d);
    p.proj = random_linear(rng, d, d);
    p.norm2_gamma.assign(d, 1.0);
    p.norm2_beta.assign(d, 0.0);
    p.fc1 = random_linear(rng, d, hidden);
    p.fc2 = random_linear(rng, hidden, d);
    s.blocks.push_back(std::move(p));
  }
  for (std::size_t i = 0; i < config.plan.entries.size(); ++i) {
    switch (config.plan.entries[i].kind) {
      case WtcKind::kAvg:
        s.compressors.emplace_back(std::monostate{});
        break;
      case WtcKind::kCa:
        s.compressors.emplace_back(zero_init_ca_params(d, config.ca_hidden_width(), derive_seed(seed, 1000 + i)));
        break;
      case WtcKind::kPixelUnshuffle:
        s.compressors.emplace_back(averaging_unshuffle_params(d));
        break;
    }
  }
  return s;
}

void EncoderState::validate(const EncoderConfig& config) const {
  config.validate();
  patch_embed.validate();
  if (patch_embed.patch != config.patch || patch_embed.channels != config.channels ||
      patch_embed.dim() != config.dim) {
    throw ValidationError("state: patch embedding does not match config (patch, channels, dim)");
  }
  if (blocks.size() != config.depth) {
    throw ValidationError("state: " + std::to_string(blocks.size()) + " blocks, config depth " +
                          std::to_string(config.depth));
  }
  const std::size_t d = config.dim;
  const std::size_t hidden = config.mlp_hidden();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& p = blocks[b];
    const std::string tag = "block " + std::to_string(b) + " ";
    check_vec(p.norm1_gamma, d, tag + "norm1_gamma");
    check_vec(p.norm1_beta, d, tag + "norm1_beta");
    check_vec(p.norm2_gamma, d, tag + "norm2_gamma");
    check_vec(p.norm2_beta, d, tag + "norm2_beta");
    check_linear(p.qkv, d, 3 * d, tag + "qkv");
    check_linear(p.proj, d, d, tag + "proj");
    check_linear(p.fc1, d, hidden, tag + "fc1");
    check_linear(p.fc2, hidden, d, tag + "fc2");
  }
  if (compressors.size() != config.plan.count()) {
    throw ValidationError("state: compressor count does not match plan");
  }
  for (std::size_t i = 0; i < compressors.size(); ++i) {
    const auto kind = config.plan.entries[i].kind;
    const auto& c = compressors[i];
    if (kind == WtcKind::kCa) {
      if (!std::holds_alternative<CAPoolParams>(c)) throw ValidationError("state: compressor " + std::to_string(i) + " needs ca params");
      std::get<CAPoolParams>(c).validate(d);
    } else if (kind == WtcKind::kPixelUnshuffle) {
      if (!std::holds_alternative<PixelUnshuffleParams>(c)) {
        throw ValidationError("state: compressor " + std::to_string(i) + " needs pixel-unshuffle params");
      }
      std::get<PixelUnshuffleParams>(c).validate(d);
    }
  }
}

std::size_t round_to_multiple(std::size_t size, std::size_t multiple) {
  if (multiple == 0) throw ValidationError("round_to_multiple: zero multiple");
  const std::size_t k = (size + multiple / 2) / multiple;
  return std::max<std::size_t>(k, 1) * multiple;
}

Preprocessed preprocess(const Image& image, const EncoderConfig& config) {
  if (image.height == 0 || image.width == 0 || image.channels == 0) {
    throw ValidationError("preprocess: degenerate image " + std::to_string(image.height) + "x" +
                          std::to_string(image.width));
  }
  if (image.channels != config.channels) {
    throw ValidationError("preprocess: image has " + std::to_string(image.channels) +
                          " channels, config expects " + std::to_string(config.channels));
  }
  const std::size_t m = config.block_multiple();
  if (image.height < m || image.width < m) {
    throw ValidationError("preprocess: image " + std::to_string(image.height) + "x" +
                          std::to_string(image.width) + " is smaller than patch*2^J = " +
                          std::to_string(m));
  }
  const std::size_t h = round_to_multiple(image.height, m);
  const std::size_t w = round_to_multiple(image.width, m);
  Preprocessed out{h == image.height && w == image.width ? image : resize_bilinear(image, h, w),
                   image.height, image.width, h != image.height || w != image.width};
  return out;
}

std::vector<std::size_t> token_count(const EncoderConfig& config, std::size_t height, std::size_t width) {
  const std::size_t m = config.block_multiple();
  if (height == 0 || width == 0 || height % m != 0 || width % m != 0) {
    throw ValidationError("token_count: " + std::to_string(height) + "x" + std::to_string(width) +
                          " is not divisible by patch*2^J = " + std::to_string(m));
  }
  std::vector<std::size_t> counts{(height / config.patch) * (width / config.patch)};
  for (std::size_t j = 0; j < config.plan.count(); ++j) counts.push_back(counts.back() / 4);
  return counts;
}

TokenGrid sinusoidal_pos_2d(std::size_t h, std::size_t w, std::size_t dim) {
  if (dim == 0 || dim % 4 != 0) {
    throw ValidationError("sinusoidal_pos_2d: dim " + std::to_string(dim) + " must be a positive multiple of 4");
  }
  const std::size_t quarter = dim / 4;
  std::vector<double> omega(quarter);
  for (std::size_t k = 0; k < quarter; ++k) {
    omega[k] = std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(quarter));
  }
  TokenGrid g(h, w, dim);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      auto t = g.at(r, c);
      for (std::size_t k = 0; k < quarter; ++k) {
        const double ay = static_cast<double>(r) * omega[k];
        const double ax = static_cast<double>(c) * omega[k];
        t[k] = std::sin(ay);
        t[quarter + k] = std::cos(ay);
        t[2 * quarter + k] = std::sin(ax);
        t[3 * quarter + k] = std::cos(ax);
      }
    }
  }
  return g;
}

TokenGrid transformer_block(const TokenGrid& x, const BlockParams& p, std::size_t heads) {
  const std::size_t n = x.count();
  const std::size_t d = x.dim();
  const Matrix qkv = linear(layer_norm(x.tokens, p.norm1_gamma, p.norm1_beta), p.qkv);
  Matrix q(n, d), k(n, d), v(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto src = qkv.row(i);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(d), q.row(i).begin());
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(d), src.begin() + static_cast<std::ptrdiff_t>(2 * d),
              k.row(i).begin());
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(2 * d), src.end(), v.row(i).begin());
  }
  Matrix h = x.tokens + linear(scaled_dot_attention(q, k, v, heads), p.proj);
  Matrix mid = linear(layer_norm(h, p.norm2_gamma, p.norm2_beta), p.fc1);
  for (double& val : mid.values()) val = gelu(val);
  h = h + linear(mid, p.fc2);
  return TokenGrid(x.h, x.w, std::move(h));
}

TokenGrid apply_compressor(const TokenGrid& x, WtcKind kind, const CompressorParams& params) {
  switch (kind) {
    case WtcKind::kAvg: return avg_pool_compress(x);
    case WtcKind::kCa: return ca_pool_compress(x, std::get<CAPoolParams>(params));
    case WtcKind::kPixelUnshuffle: return pixel_unshuffle_compress(x, std::get<PixelUnshuffleParams>(params));
  }
  throw ValidationError("apply_compressor: unknown kind");
}

TokenGrid embed_image(const Image& image, const EncoderState& state, const EncoderConfig& config) {
  const PatchGrid patches = patchify(image, config.patch);
  TokenGrid x;
  if (config.normalize) {
    PatchGrid scaled = patches;
    for (double& v : scaled.patches.values()) v = 2.0 * v - 1.0;
    x = embed(scaled, state.patch_embed);
  } else {
    x = embed(patches, state.patch_embed);
  }
  const TokenGrid pos = sinusoidal_pos_2d(x.h, x.w, x.dim());
  x.tokens = x.tokens + pos.tokens;
  return x;
}

TokenGrid forward(const Image& image, const EncoderState& state, const EncoderConfig& config) {
  state.validate(config);
  const Preprocessed pre = preprocess(image, config);
  TokenGrid x = embed_image(pre.image, state, config);
  std::size_t next = 0;
  const auto& entries = config.plan.entries;
  auto compress_at = [&](std::size_t layer) {
    while (next < entries.size() && entries[next].layer == layer) {
      x = apply_compressor(x, entries[next].kind, state.compressors[next]);
      ++next;
    }
  };
  compress_at(0);
  for (std::size_t b = 0; b < config.depth; ++b) {
    x = transformer_block(x, state.blocks[b], config.heads);
    compress_at(b + 1);
  }
  return x;
}

}  // namespace pvc
