#include "pvc/costmodel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pvc/error.hpp"

namespace pvc {

std::size_t LlmProxy::mlp_hidden() const {
  return static_cast<std::size_t>(std::llround(mlp_ratio * static_cast<double>(dim)));
}

void LlmProxy::validate() const {
  if (dim == 0 || depth == 0 || !(mlp_ratio > 0.0)) {
    throw ValidationError("llm proxy: dim, depth and mlp_ratio must be positive");
  }
}

BlockFlops block_flops(std::uint64_t n, std::uint64_t dim, std::uint64_t mlp_hidden) {
  BlockFlops f;
  f.linear = 2 * (4 * n * dim * dim) + 2 * (2 * n * dim * mlp_hidden);
  f.quadratic = 2 * (2 * n * n * dim);
  return f;
}

std::uint64_t embedding_flops(const EncoderConfig& config, std::uint64_t n) {
  return 2 * n * config.dim * (config.channels * config.patch * config.patch);
}

std::uint64_t compressor_flops(const EncoderConfig& config, WtcKind kind, std::uint64_t n_in) {
  const std::uint64_t d = config.dim;
  switch (kind) {
    case WtcKind::kAvg:
      return n_in * d;
    case WtcKind::kCa: {
      const std::uint64_t h = config.ca_hidden_width();
      return 2 * n_in * (2 * d * h + h * d) + 2 * n_in * d;
    }
    case WtcKind::kPixelUnshuffle:
      return 2 * (n_in / 4) * (4 * d) * d;
  }
  return 0;
}

std::uint64_t encoder_flops(const EncoderConfig& config, std::size_t height, std::size_t width) {
  config.validate();
  const auto stages = token_count(config, height, width);
  const auto& entries = config.plan.entries;
  std::uint64_t total = embedding_flops(config, stages.front());
  std::size_t stage = 0;
  auto compress_at = [&](std::size_t layer) {
    while (stage < entries.size() && entries[stage].layer == layer) {
      total += compressor_flops(config, entries[stage].kind, stages[stage]);
      ++stage;
    }
  };
  compress_at(0);
  for (std::size_t b = 1; b <= config.depth; ++b) {
    total += block_flops(stages[stage], config.dim, config.mlp_hidden()).total();
    compress_at(b);
  }
  return total;
}

std::uint64_t prefill_proxy(std::uint64_t n_tokens, const LlmProxy& llm) {
  llm.validate();
  return llm.depth * block_flops(n_tokens, llm.dim, llm.mlp_hidden()).total();
}

double compression_ratio(const CostReport& report) {
  if (report.stage_tokens.empty() || report.stage_tokens.back() == 0) {
    throw ValidationError("compression_ratio: report has no token counts");
  }
  return static_cast<double>(report.stage_tokens.front()) / static_cast<double>(report.stage_tokens.back());
}

CostReport cost_report(const EncoderConfig& config, std::size_t height, std::size_t width,
                       const LlmProxy& llm, std::string plan_id) {
  CostReport r;
  r.plan_id = std::move(plan_id);
  r.plan = config.plan;
  r.stage_tokens = token_count(config, height, width);
  r.encoder_flops = encoder_flops(config, height, width);
  r.prefill_flops = prefill_proxy(r.stage_tokens.back(), llm);
  r.total_flops = r.encoder_flops + r.prefill_flops;
  return r;
}

std::vector<CostReport> sweep_insertions(const EncoderConfig& base, std::size_t height, std::size_t width,
                                         const LlmProxy& llm, const std::vector<SweepPlan>& plans) {
  std::vector<CostReport> out;
  std::optional<std::uint64_t> previous;
  for (const auto& p : plans) {
    EncoderConfig cfg = base;
    cfg.plan = p.plan;
    try {
      CostReport r = cost_report(cfg, height, width, llm, p.id);
      if (previous) {
        r.marginal_reduction = static_cast<double>(*previous) - static_cast<double>(r.total_flops);
      }
      previous = r.total_flops;
      out.push_back(std::move(r));
    } catch (const Error& e) {
      CostReport r;
      r.plan_id = p.id;
      r.plan = p.plan;
      r.status = std::string("error: ") + e.what();
      out.push_back(std::move(r));
    }
  }
  return out;
}

WallClock micro_bench(const EncoderConfig& config, const EncoderState& state, const Image& image,
                      std::size_t repeats) {
  if (repeats == 0) throw ValidationError("micro_bench: repeats must be >= 1");
  using clock = std::chrono::steady_clock;
  volatile double sink = forward(image, state, config).tokens(0, 0);  // warmup
  WallClock wc;
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto t0 = clock::now();
    const TokenGrid out = forward(image, state, config);
    const auto t1 = clock::now();
    sink = out.tokens(0, 0);
    wc.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  (void)sink;
  std::vector<double> sorted = wc.samples_ms;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  wc.median_ms = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  wc.mean_ms = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  return wc;
}

std::string csv_header() {
  return "plan_id,J,indices,stage_tokens,encoder_flops,prefill_flops,total_flops,ratio,wall_clock_ms,"
         "marginal_reduction,status";
}

namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ";" : "") << v[i];
  return s.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string to_csv_row(const CostReport& r) {
  std::ostringstream s;
  s << csv_field(r.plan_id) << ',' << r.plan.count() << ',' << join(r.plan.layers()) << ','
    << join(r.stage_tokens) << ',';
  if (r.status == "ok") {
    s << r.encoder_flops << ',' << r.prefill_flops << ',' << r.total_flops << ',' << compression_ratio(r);
  } else {
    s << ",,,";
  }
  s << ',';
  if (r.wall_clock) s << r.wall_clock->median_ms;
  s << ',';
  if (r.marginal_reduction) s << static_cast<long long>(std::llround(*r.marginal_reduction));
  s << ',' << csv_field(r.status);
  return s.str();
}

}  // namespace pvc
