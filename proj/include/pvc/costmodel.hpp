#pragma once

// Analytic FLOP model of the encoder plus an LLM-prefill proxy.
//
// Conventions: one multiply-accumulate = 2 FLOPs; softmax, norms, GELU and
// residual adds are not counted. Per transformer block at sequence length n,
// width D, MLP hidden width F:
//
//   attention  2 * (4 n D^2 + 2 n^2 D)   (qkv + output projections, QK^T and AV)
//   mlp        2 * (2 n D F)
//
// Patch embedding costs 2 n D (C P^2). Compressors with n input tokens:
//   avg               n D                       (one add per input value)
//   ca                2 n (2D H + H D) + 2 n D  (gating MLP per token + weighting)
//   pixel_unshuffle   2 (n/4) (4D) D
//
// Time-to-first-token is proxied by encoder FLOPs + prefill FLOPs; fixed
// projector and LLM overheads are not modeled.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pvc/encoder.hpp"

namespace pvc {

struct LlmProxy {
  std::size_t dim = 3584;
  std::size_t depth = 28;
  double mlp_ratio = 18944.0 / 3584.0;

  std::size_t mlp_hidden() const;
  void validate() const;
};

struct BlockFlops {
  std::uint64_t linear = 0;     // terms proportional to n
  std::uint64_t quadratic = 0;  // terms proportional to n^2
  std::uint64_t total() const { return linear + quadratic; }
};

BlockFlops block_flops(std::uint64_t n, std::uint64_t dim, std::uint64_t mlp_hidden);

std::uint64_t embedding_flops(const EncoderConfig& config, std::uint64_t n);
std::uint64_t compressor_flops(const EncoderConfig& config, WtcKind kind, std::uint64_t n_in);

std::uint64_t encoder_flops(const EncoderConfig& config, std::size_t height, std::size_t width);
std::uint64_t prefill_proxy(std::uint64_t n_tokens, const LlmProxy& llm);

struct WallClock {
  std::vector<double> samples_ms;
  double median_ms = 0.0;
  double mean_ms = 0.0;
};

struct CostReport {
  std::string plan_id;
  WtcPlan plan;
  std::vector<std::size_t> stage_tokens;
  std::uint64_t encoder_flops = 0;
  std::uint64_t prefill_flops = 0;
  std::uint64_t total_flops = 0;
  std::optional<WallClock> wall_clock;
  /// total_flops of the previous successful report minus this one.
  std::optional<double> marginal_reduction;
  std::string status = "ok";
};

/// stage_tokens.front() / stage_tokens.back(); equals 4^J.
double compression_ratio(const CostReport& report);

CostReport cost_report(const EncoderConfig& config, std::size_t height, std::size_t width,
                       const LlmProxy& llm, std::string plan_id = {});

struct SweepPlan {
  std::string id;
  WtcPlan plan;
};

/// One report per plan, in order. Invalid plans yield a report with an
/// error status and the sweep continues.
std::vector<CostReport> sweep_insertions(const EncoderConfig& base, std::size_t height, std::size_t width,
                                         const LlmProxy& llm, const std::vector<SweepPlan>& plans);

/// Median/mean of `repeats` single-threaded forward passes after one
/// untimed warmup pass.
WallClock micro_bench(const EncoderConfig& config, const EncoderState& state, const Image& image,
                      std::size_t repeats);

std::string csv_header();
std::string to_csv_row(const CostReport& report);

}  // namespace pvc
