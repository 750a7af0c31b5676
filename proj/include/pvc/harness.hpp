#pragma once

// Verification drivers shared by the CLI and the Python module.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvc/config.hpp"
#include "pvc/encoder.hpp"
#include "pvc/numerics.hpp"
#include "pvc/rpe.hpp"

namespace pvc {

/// FNV-1a over the little-endian IEEE-754 bytes of every value, row-major.
std::uint64_t fnv1a64(const Matrix& m);
std::string hex64(std::uint64_t v);

struct GradCheckOptions {
  std::uint64_t seed = 0;
  std::size_t dim = 16;
  std::size_t hidden = 16;
  std::size_t grid = 4;      // grid x grid tokens
  double step = 1e-5;
  bool zero_upstream = false;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst;         // "mlp_w1[3]" etc.
  std::size_t checked = 0;   // scalar coordinates compared
};

/// Relative error |a - n| / max(|a|, |n|, 1e-3): relative for gradients of
/// meaningful size, absolute (scaled by 1e3) near zero.
double gradcheck_rel_error(double analytic, double numeric);

/// Compares ca_pool_gradients with central differences on every input and
/// parameter coordinate. Parameters are drawn at a nonzero scale so the
/// gating path is actually exercised.
GradCheckReport ca_pool_gradcheck(const GradCheckOptions& opts);

/// Result of a full encode, in the shape the CLI prints.
struct EncodeSummary {
  std::size_t original_height = 0, original_width = 0;
  std::size_t height = 0, width = 0;
  bool resized = false;
  std::vector<std::size_t> stage_tokens;
  std::size_t grid_h = 0, grid_w = 0, dim = 0;
  std::optional<std::uint64_t> checksum;  // absent for shape-only runs
};

/// With run_forward, `tokens_out` (if given) receives the final token grid.
EncodeSummary encode_summary(const Image& image, const EncoderConfig& config, const EncoderState* state,
                             bool run_forward, TokenGrid* tokens_out = nullptr);
nlohmann::json to_json(const EncodeSummary& s);

/// Transform a bundle's weights to `fine_patch`; `sigma` selects the weighted form.
struct TransformResult {
  PatchEmbedWeights weights;
  ResizeReport report;
};
TransformResult transform_weights(const PatchEmbedWeights& w, std::size_t fine_patch,
                                  const CovarianceEstimate* sigma);
nlohmann::json to_json(const ResizeReport& r);

/// Coarse patches cut from `count` synthetic images, for the empirical Sigma.
Matrix synthetic_patch_samples(std::size_t channels, std::size_t patch, std::size_t count, std::uint64_t seed);

}  // namespace pvc
