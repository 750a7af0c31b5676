#include "pvc/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "pvc/error.hpp"
#include "pvc/random.hpp"
#include "pvc/wtc.hpp"

namespace pvc {

std::uint64_t fnv1a64(const Matrix& m) {
  static_assert(std::endian::native == std::endian::little, "checksum assumes a little-endian host");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : m.values()) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

double gradcheck_rel_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / scale;
}

namespace {

void fill_normal(Rng& rng, std::span<double> v, double stddev) {
  for (double& x : v) x = rng.normal(0.0, stddev);
}

double loss(const TokenGrid& grid, const CAPoolParams& p, const TokenGrid& upstream) {
  const TokenGrid y = ca_pool_compress(grid, p);
  double s = 0.0;
  const auto a = y.tokens.values();
  const auto g = upstream.tokens.values();
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * g[i];
  return s;
}

}  // namespace

GradCheckReport ca_pool_gradcheck(const GradCheckOptions& opts) {
  if (opts.dim == 0 || opts.hidden == 0) throw ValidationError("gradcheck: dim and hidden must be >= 1");
  if (opts.grid == 0 || opts.grid % 2 != 0) throw ValidationError("gradcheck: grid side must be even and >= 2");
  if (!(opts.step > 0.0)) throw ValidationError("gradcheck: step must be > 0");

  Rng rng(derive_seed(opts.seed, 0));
  TokenGrid grid(opts.grid, opts.grid, opts.dim);
  fill_normal(rng, grid.tokens.values(), 1.0);
  CAPoolParams p{Matrix(2 * opts.dim, opts.hidden), std::vector<double>(opts.hidden),
                 Matrix(opts.hidden, opts.dim), std::vector<double>(opts.dim)};
  fill_normal(rng, p.mlp_w1.values(), 0.3);
  fill_normal(rng, p.mlp_b1, 0.3);
  fill_normal(rng, p.mlp_w2.values(), 0.3);
  fill_normal(rng, p.mlp_b2, 0.3);
  TokenGrid upstream(opts.grid / 2, opts.grid / 2, opts.dim);
  if (!opts.zero_upstream) fill_normal(rng, upstream.tokens.values(), 1.0);

  const CAPoolGradients g = ca_pool_gradients(grid, p, upstream);
  GradCheckReport report;
  const double h = opts.step;

  // Perturbs one coordinate in place and restores it exactly.
  auto probe = [&](double& slot, double analytic, const std::string& label) {
    const double saved = slot;
    slot = saved + h;
    const double up = loss(grid, p, upstream);
    slot = saved - h;
    const double down = loss(grid, p, upstream);
    slot = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = gradcheck_rel_error(analytic, numeric);
    report.max_abs_error = std::max(report.max_abs_error, std::abs(analytic - numeric));
    if (rel > report.max_rel_error || report.worst.empty()) {
      report.max_rel_error = rel;
      report.worst = label;
    }
    ++report.checked;
  };
  auto sweep = [&](std::span<double> slots, std::span<const double> analytic, const std::string& name) {
    for (std::size_t i = 0; i < slots.size(); ++i) probe(slots[i], analytic[i], name + "[" + std::to_string(i) + "]");
  };
  sweep(grid.tokens.values(), g.input.values(), "input");
  sweep(p.mlp_w1.values(), g.mlp_w1.values(), "mlp_w1");
  sweep(p.mlp_b1, g.mlp_b1, "mlp_b1");
  sweep(p.mlp_w2.values(), g.mlp_w2.values(), "mlp_w2");
  sweep(p.mlp_b2, g.mlp_b2, "mlp_b2");
  return report;
}

EncodeSummary encode_summary(const Image& image, const EncoderConfig& config, const EncoderState* state,
                             bool run_forward, TokenGrid* tokens_out) {
  config.validate();
  const Preprocessed pre = preprocess(image, config);
  EncodeSummary s;
  s.original_height = pre.original_height;
  s.original_width = pre.original_width;
  s.height = pre.image.height;
  s.width = pre.image.width;
  s.resized = pre.resized;
  s.stage_tokens = token_count(config, s.height, s.width);
  const std::size_t shrink = config.patch << config.plan.count();
  s.grid_h = s.height / shrink;
  s.grid_w = s.width / shrink;
  s.dim = config.dim;
  if (run_forward) {
    if (state == nullptr) throw ValidationError("encode: forward pass requested without encoder state");
    // forward() preprocesses again; on an already-divisible image that is a no-op.
    const TokenGrid out = forward(pre.image, *state, config);
    if (out.h != s.grid_h || out.w != s.grid_w || out.count() != s.stage_tokens.back()) {
      throw NumericalError("encode: forward produced a " + std::to_string(out.h) + "x" + std::to_string(out.w) +
                           " grid, expected " + std::to_string(s.grid_h) + "x" + std::to_string(s.grid_w));
    }
    if (!all_finite(out.tokens.values())) throw NumericalError("encode: non-finite output tokens");
    s.checksum = fnv1a64(out.tokens);
    if (tokens_out != nullptr) *tokens_out = out;
  }
  return s;
}

nlohmann::json to_json(const EncodeSummary& s) {
  nlohmann::json j = {
      {"input", {{"height", s.original_height}, {"width", s.original_width}}},
      {"processed", {{"height", s.height}, {"width", s.width}}},
      {"resized", s.resized},
      {"stage_tokens", s.stage_tokens},
      {"final_grid", {s.grid_h, s.grid_w, s.dim}},
      {"final_tokens", s.stage_tokens.back()},
  };
  if (s.resized) {
    j["note"] = "resized " + std::to_string(s.original_height) + "x" + std::to_string(s.original_width) + " to " +
                std::to_string(s.height) + "x" + std::to_string(s.width) + " (sides must be multiples of patch*2^J)";
  }
  j["checksum"] = s.checksum ? nlohmann::json("fnv1a64:" + hex64(*s.checksum)) : nlohmann::json(nullptr);
  return j;
}

TransformResult transform_weights(const PatchEmbedWeights& w, std::size_t fine_patch,
                                  const CovarianceEstimate* sigma) {
  w.validate();
  const ResizeMap b = build_resize_map(w.channels, w.patch, fine_patch);
  PatchEmbedWeights out = sigma ? pi_resize_weights_sigma(w, b, *sigma) : pi_resize_weights(w, b);
  ResizeReport report = resize_report(w, out, b);
  return {std::move(out), report};
}

nlohmann::json to_json(const ResizeReport& r) {
  return {{"residual_fro", r.residual_fro},
          {"normal_eq_max_abs", r.normal_eq_max_abs},
          {"b_sigma_max", r.sigma_max},
          {"b_sigma_min", r.sigma_min},
          {"b_condition", r.condition}};
}

Matrix synthetic_patch_samples(std::size_t channels, std::size_t patch, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ValidationError("sample count must be >= 1");
  constexpr std::size_t kSide = 8;  // patches per image side
  const std::size_t per_image = kSide * kSide;
  Matrix samples(count, channels * patch * patch);
  std::size_t filled = 0;
  for (std::uint64_t img = 0; filled < count; ++img) {
    const Image im = synthetic_image(kSide * patch, kSide * patch, channels, derive_seed(seed, img));
    const PatchGrid pg = patchify(im, patch);
    for (std::size_t r = 0; r < per_image && filled < count; ++r, ++filled) {
      auto src = pg.patches.row(r);
      std::copy(src.begin(), src.end(), samples.row(filled).begin());
    }
  }
  return samples;
}

}  // namespace pvc
