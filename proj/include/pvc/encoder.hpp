#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pvc/image.hpp"
#include "pvc/numerics.hpp"
#include "pvc/rpe.hpp"
#include "pvc/token_grid.hpp"
#include "pvc/wtc.hpp"

namespace pvc {

enum class WtcKind { kAvg, kCa, kPixelUnshuffle };

std::string_view to_string(WtcKind kind);
WtcKind parse_wtc_kind(std::string_view name);

struct WtcEntry {
  /// Compress after block `layer` (1-based); 0 compresses the embedded grid
  /// before the first block.
  std::size_t layer = 0;
  WtcKind kind = WtcKind::kAvg;

  friend bool operator==(const WtcEntry&, const WtcEntry&) = default;
};

struct WtcPlan {
  std::vector<WtcEntry> entries;

  std::size_t count() const { return entries.size(); }
  std::vector<std::size_t> layers() const;

  static WtcPlan uniform(std::vector<std::size_t> layers, WtcKind kind);
  friend bool operator==(const WtcPlan&, const WtcPlan&) = default;
};

struct EncoderConfig {
  std::size_t depth = 6;
  std::size_t dim = 64;
  std::size_t heads = 4;
  double mlp_ratio = 4.0;
  std::size_t patch = 16;
  /// If set and larger than `patch`, patch weights are initialized at this
  /// size and converted with pi_resize_weights.
  std::optional<std::size_t> source_patch;
  std::size_t channels = 3;
  std::size_t ca_hidden = 0;  // 0 means "same as dim"
  WtcPlan plan;
  bool normalize = false;     // map [0,1] pixels to [-1,1] before embedding

  std::size_t mlp_hidden() const;
  std::size_t ca_hidden_width() const { return ca_hidden == 0 ? dim : ca_hidden; }
  /// Required divisor of preprocessed image sides: patch * 2^J.
  std::size_t block_multiple() const;
  /// Throws ValidationError naming the first violated precondition.
  void validate() const;
};

struct Linear {
  Matrix weight;             // in x out
  std::vector<double> bias;  // out
};

struct BlockParams {
  std::vector<double> norm1_gamma, norm1_beta;
  Linear qkv;                // D -> 3D
  Linear proj;               // D -> D
  std::vector<double> norm2_gamma, norm2_beta;
  Linear fc1;                // D -> hidden
  Linear fc2;                // hidden -> D
};

using CompressorParams = std::variant<std::monostate, CAPoolParams, PixelUnshuffleParams>;

/// Immutable after construction; safe to share across concurrent forward calls.
struct EncoderState {
  PatchEmbedWeights patch_embed;
  std::vector<BlockParams> blocks;
  std::vector<CompressorParams> compressors;  // parallel to config.plan.entries

  void validate(const EncoderConfig& config) const;
};

EncoderState init_state(const EncoderConfig& config, std::uint64_t seed);

struct Preprocessed {
  Image image;
  std::size_t original_height = 0;
  std::size_t original_width = 0;
  bool resized = false;
};

/// Rounds each side to the nearest multiple of patch * 2^J (at least one
/// multiple) and resamples bilinearly if needed.
Preprocessed preprocess(const Image& image, const EncoderConfig& config);

/// Nearest multiple of `multiple` to `size`, ties rounding up, minimum `multiple`.
std::size_t round_to_multiple(std::size_t size, std::size_t multiple);

/// Token counts [N, N/4, ..., N/4^J] for an already-divisible H x W input.
std::vector<std::size_t> token_count(const EncoderConfig& config, std::size_t height, std::size_t width);

/// 2-D sinusoidal codes: first dim/2 channels encode the row, the rest the
/// column; each half is [sin(p*w_k)..., cos(p*w_k)...] with w_k = 10000^(-k/(dim/4)).
TokenGrid sinusoidal_pos_2d(std::size_t h, std::size_t w, std::size_t dim);

TokenGrid transformer_block(const TokenGrid& x, const BlockParams& p, std::size_t heads);
TokenGrid apply_compressor(const TokenGrid& x, WtcKind kind, const CompressorParams& params);

/// Embedding + position codes for an image whose sides are already divisible.
TokenGrid embed_image(const Image& image, const EncoderState& state, const EncoderConfig& config);

/// Full encoder: preprocess, embed, transformer stack with planned compressors.
TokenGrid forward(const Image& image, const EncoderState& state, const EncoderConfig& config);

}  // namespace pvc
