// pvc: command-line driver for weight transforms, encoding, gradient checks,
// cost sweeps, probe generation and micro-benchmarks.
//
// Exit codes: 0 success, 1 validation / usage / I/O failure, 2 numerical check failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pvc/config.hpp"
#include "pvc/costmodel.hpp"
#include "pvc/error.hpp"
#include "pvc/harness.hpp"
#include "pvc/image.hpp"
#include "pvc/probegen.hpp"
#include "pvc/rpe.hpp"
#include "pvc/tensor_file.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

// "HxW" -> (h, w)
std::pair<std::size_t, std::size_t> parse_size(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw pvc::ValidationError("size '" + s + "' must look like HxW");
  try {
    std::size_t used = 0;
    const auto h = std::stoul(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    const auto w = std::stoul(s.substr(x + 1), &used);
    if (used != s.size() - x - 1 || h == 0 || w == 0) throw std::invalid_argument(s);
    return {h, w};
  } catch (const std::logic_error&) {
    throw pvc::ValidationError("size '" + s + "' must look like HxW with positive integers");
  }
}

pvc::RunConfig load_or_default(const std::string& path) {
  return path.empty() ? pvc::run_config_from_json(json::object()) : pvc::load_run_config(path);
}

pvc::Image load_input(const std::string& image_path, const std::string& synthetic, const pvc::RunConfig& cfg,
                      std::uint64_t seed) {
  if (!image_path.empty() && !synthetic.empty()) throw pvc::ValidationError("use either --image or --synthetic");
  if (!image_path.empty()) {
    pvc::Image img = pvc::to_real(pvc::read_image(image_path));
    if (cfg.encoder.channels == 1 && img.channels == 3) {
      throw pvc::ValidationError("config expects 1 channel but " + image_path + " is RGB");
    }
    return img;
  }
  std::size_t h = cfg.height, w = cfg.width;
  if (!synthetic.empty()) std::tie(h, w) = parse_size(synthetic);
  return pvc::synthetic_image(h, w, cfg.encoder.channels, seed);
}

void emit(const json& j, const std::string& path) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    pvc::write_file_atomic(path, text);
  }
}

// ---------------------------------------------------------------------------

struct TransformArgs {
  std::string in, out, report, sigma = "identity", sample_image;
  std::size_t patch = 0;
  std::size_t samples = 4096;
  std::uint64_t sample_seed = 0;
  double ridge = 1e-6;
};

int run_transform(const TransformArgs& a) {
  const auto bundle = pvc::read_tensor_file(a.in);
  const auto w = pvc::patch_weights_from_bundle(bundle);

  std::optional<pvc::CovarianceEstimate> cov;
  if (a.sigma == "empirical") {
    pvc::Matrix samples;
    if (!a.sample_image.empty()) {
      const auto img = pvc::to_real(pvc::read_image(a.sample_image));
      if (img.channels != w.channels) {
        throw pvc::ValidationError("--sample-image has " + std::to_string(img.channels) + " channels, weights expect " +
                                   std::to_string(w.channels));
      }
      const std::size_t h = img.height / w.patch * w.patch, wd = img.width / w.patch * w.patch;
      if (h == 0 || wd == 0) throw pvc::ValidationError("--sample-image is smaller than one patch");
      samples = pvc::patchify(pvc::resize_bilinear(img, h, wd), w.patch).patches;
    } else {
      samples = pvc::synthetic_patch_samples(w.channels, w.patch, a.samples, a.sample_seed);
    }
    cov = pvc::estimate_patch_covariance(samples, a.ridge);
  }

  const auto result = pvc::transform_weights(w, a.patch, cov ? &*cov : nullptr);
  pvc::write_tensor_file(a.out, pvc::to_bundle(result.weights));

  json report = {{"in", a.in},
                 {"out", a.out},
                 {"dim", w.dim()},
                 {"channels", w.channels},
                 {"patch", w.patch},
                 {"fine_patch", a.patch},
                 {"sigma", a.sigma},
                 {"diagnostics", pvc::to_json(result.report)}};
  if (cov) report["sigma_samples"] = cov->sample_count;
  emit(report, a.report);
  return kExitOk;
}

struct EncodeArgs {
  std::string image, synthetic, config, state, out_tokens;
  std::optional<std::uint64_t> seed;
  bool shapes_only = false;
};

int run_encode(const EncodeArgs& a) {
  const auto cfg = load_or_default(a.config);
  const std::uint64_t seed = a.seed.value_or(cfg.seed);
  const auto img = load_input(a.image, a.synthetic, cfg, seed);

  std::optional<pvc::EncoderState> state;
  if (!a.shapes_only) {
    state = a.state.empty() ? pvc::init_state(cfg.encoder, seed)
                            : pvc::state_from_bundle(pvc::read_tensor_file(a.state), cfg.encoder);
  }
  if (a.shapes_only && !a.out_tokens.empty()) {
    throw pvc::ValidationError("--out-tokens needs a forward pass; drop --shapes-only");
  }
  pvc::TokenGrid tokens;
  const auto summary = pvc::encode_summary(img, cfg.encoder, state ? &*state : nullptr, !a.shapes_only, &tokens);
  json j = pvc::to_json(summary);
  j["seed"] = seed;
  j["plan"] = pvc::to_json(cfg.encoder.plan);
  j["patch"] = cfg.encoder.patch;
  if (!a.out_tokens.empty()) {
    pvc::TensorBundle b;
    b.attrs = {{"kind", "tokens"}, {"grid", {tokens.h, tokens.w, tokens.dim()}}};
    b.add("tokens", tokens.tokens);
    pvc::write_tensor_file(a.out_tokens, b);
  }
  emit(j, "");
  return kExitOk;
}

struct GradArgs {
  pvc::GradCheckOptions opts;
  double tol = 1e-4;
};

int run_gradcheck(const GradArgs& a) {
  const auto r = pvc::ca_pool_gradcheck(a.opts);
  const bool pass = r.max_rel_error <= a.tol;
  emit({{"seed", a.opts.seed},
        {"dim", a.opts.dim},
        {"hidden", a.opts.hidden},
        {"step", a.opts.step},
        {"zero_upstream", a.opts.zero_upstream},
        {"checked", r.checked},
        {"max_rel_error", r.max_rel_error},
        {"max_abs_error", r.max_abs_error},
        {"worst", r.worst},
        {"tolerance", a.tol},
        {"pass", pass}},
       "");
  return pass ? kExitOk : kExitNumerical;
}

struct SweepArgs {
  std::string config, out, json_out;
  std::size_t bench_repeats = 0;
};

int run_sweep(const SweepArgs& a) {
  const auto cfg = pvc::load_run_config(a.config);
  auto reports = pvc::sweep_insertions(cfg.encoder, cfg.height, cfg.width, cfg.llm, cfg.sweep);
  if (a.bench_repeats > 0) {
    const auto img = pvc::synthetic_image(cfg.height, cfg.width, cfg.encoder.channels, cfg.seed);
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (reports[i].status != "ok") continue;
      pvc::EncoderConfig ec = cfg.encoder;
      ec.plan = cfg.sweep[i].plan;
      reports[i].wall_clock = pvc::micro_bench(ec, pvc::init_state(ec, cfg.seed), img, a.bench_repeats);
    }
  }
  std::string csv = pvc::csv_header() + "\n";
  json rows = json::array();
  for (const auto& r : reports) {
    csv += pvc::to_csv_row(r) + "\n";
    json row = {{"plan_id", r.plan_id},
                {"J", r.plan.count()},
                {"indices", r.plan.layers()},
                {"stage_tokens", r.stage_tokens},
                {"encoder_flops", r.encoder_flops},
                {"prefill_flops", r.prefill_flops},
                {"total_flops", r.total_flops},
                {"status", r.status}};
    if (r.status == "ok") row["ratio"] = pvc::compression_ratio(r);
    if (r.wall_clock) row["wall_clock_ms"] = r.wall_clock->median_ms;
    row["marginal_reduction"] = r.marginal_reduction ? json(*r.marginal_reduction) : json(nullptr);
    rows.push_back(row);
  }
  pvc::write_file_atomic(a.out, csv);
  if (!a.json_out.empty()) pvc::write_file_atomic(a.json_out, rows.dump(2) + "\n");
  std::size_t failed = 0;
  for (const auto& r : reports) failed += r.status != "ok";
  std::cerr << "sweep: " << reports.size() << " plans, " << failed << " with errors -> " << a.out << "\n";
  return kExitOk;
}

struct ProbeArgs {
  std::string kind, out_dir;
  std::optional<std::size_t> count;
  std::uint64_t seed = 0;
};

int run_probegen(const ProbeArgs& a) {
  pvc::ProbeDataset ds;
  if (a.kind == "shapegrid") {
    ds = pvc::gen_shapegrid(a.count.value_or(4000), a.seed);
  } else if (a.kind == "sudoku") {
    ds = pvc::gen_sudoku(a.count.value_or(8000), a.seed);
  } else {
    throw pvc::ValidationError("--kind must be shapegrid or sudoku");
  }
  pvc::write_dataset(ds, a.out_dir);
  std::cerr << "probegen: " << ds.samples.size() << " " << ds.kind << " items -> " << a.out_dir << "\n";
  return kExitOk;
}

struct BenchArgs {
  std::string config, image, synthetic, out;
  std::size_t repeats = 3;
  std::optional<std::uint64_t> seed;
};

int run_bench(const BenchArgs& a) {
  const auto cfg = load_or_default(a.config);
  const std::uint64_t seed = a.seed.value_or(cfg.seed);
  const auto img = load_input(a.image, a.synthetic, cfg, seed);
  const auto state = pvc::init_state(cfg.encoder, seed);
  const auto wc = pvc::micro_bench(cfg.encoder, state, img, a.repeats);
  const auto pre = pvc::preprocess(img, cfg.encoder);
  emit({{"plan", pvc::to_json(cfg.encoder.plan)},
        {"input", {pre.image.height, pre.image.width}},
        {"stage_tokens", pvc::token_count(cfg.encoder, pre.image.height, pre.image.width)},
        {"repeats", a.repeats},
        {"samples_ms", wc.samples_ms},
        {"median_ms", wc.median_ms},
        {"mean_ms", wc.mean_ms}},
       a.out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pvc: progressive visual compression toolkit"};
  app.require_subcommand(1);
  int rc = kExitOk;

  TransformArgs ta;
  auto* tw = app.add_subcommand("transform-weights", "Re-express a patch-embedding kernel at a smaller patch size");
  tw->add_option("--in", ta.in, "Input PatchEmbedWeights tensor file")->required()->check(CLI::ExistingFile);
  tw->add_option("--patch", ta.patch, "Target patch size (<= source patch)")->required()->check(CLI::PositiveNumber);
  tw->add_option("--out", ta.out, "Output tensor file")->required();
  tw->add_option("--sigma", ta.sigma, "Weighting: identity or empirical")
      ->check(CLI::IsMember({"identity", "empirical"}))
      ->capture_default_str();
  tw->add_option("--sample-image", ta.sample_image, "Image providing patches for the empirical Sigma");
  tw->add_option("--samples", ta.samples, "Synthetic patch count for the empirical Sigma")->capture_default_str();
  tw->add_option("--sample-seed", ta.sample_seed, "Seed for synthetic Sigma samples")->capture_default_str();
  tw->add_option("--ridge", ta.ridge, "Ridge added to the Sigma estimate")->capture_default_str();
  tw->add_option("--report", ta.report, "Write the JSON report here instead of stdout");
  tw->callback([&] { rc = run_transform(ta); });

  EncodeArgs ea;
  auto* en = app.add_subcommand("encode", "Run the encoder and print token statistics as JSON");
  en->add_option("--image", ea.image, "PNG or PPM input")->check(CLI::ExistingFile);
  en->add_option("--synthetic", ea.synthetic, "Use a synthetic HxW test image instead of --image");
  en->add_option("--config", ea.config, "Run config JSON (defaults if omitted)")->check(CLI::ExistingFile);
  en->add_option("--seed", ea.seed, "Overrides the config seed");
  en->add_option("--state", ea.state, "Encoder weights tensor file (random init if omitted)")
      ->check(CLI::ExistingFile);
  en->add_option("--out-tokens", ea.out_tokens, "Also write the final tokens as a tensor file");
  en->add_flag("--shapes-only", ea.shapes_only, "Report preprocessing and token counts without a forward pass");
  en->callback([&] { rc = run_encode(ea); });

  GradArgs ga;
  auto* gc = app.add_subcommand("gradcheck", "Check CA-pool gradients against central differences");
  gc->add_option("--seed", ga.opts.seed)->capture_default_str();
  gc->add_option("--dim", ga.opts.dim, "Token width D")->capture_default_str()->check(CLI::PositiveNumber);
  gc->add_option("--hidden", ga.opts.hidden, "Gating MLP width")->capture_default_str()->check(CLI::PositiveNumber);
  gc->add_option("--grid", ga.opts.grid, "Grid side (even)")->capture_default_str();
  gc->add_option("--step", ga.opts.step, "Finite-difference step")->capture_default_str();
  gc->add_option("--tol", ga.tol, "Maximum relative error")->capture_default_str();
  gc->add_flag("--zero-upstream", ga.opts.zero_upstream, "Use a zero upstream gradient");
  gc->callback([&] { rc = run_gradcheck(ga); });

  SweepArgs sa;
  auto* sw = app.add_subcommand("sweep", "Cost-model sweep over the config's plans, written as CSV");
  sw->add_option("--config", sa.config, "Run config JSON with a sweep list")->required()->check(CLI::ExistingFile);
  sw->add_option("--out", sa.out, "CSV output path")->required();
  sw->add_option("--json", sa.json_out, "Optional JSON output path");
  sw->add_option("--bench-repeats", sa.bench_repeats, "Also time each plan (0 = analytic only)")
      ->capture_default_str();
  sw->callback([&] { rc = run_sweep(sa); });

  ProbeArgs pa;
  auto* pg = app.add_subcommand("probegen", "Generate a ShapeGrid or Sudoku probe dataset");
  pg->add_option("--kind", pa.kind)->required()->check(CLI::IsMember({"shapegrid", "sudoku"}));
  pg->add_option("--count", pa.count, "Item count (default: shapegrid 4000, sudoku 8000)");
  pg->add_option("--seed", pa.seed)->capture_default_str();
  pg->add_option("--out-dir", pa.out_dir)->required();
  pg->callback([&] { rc = run_probegen(pa); });

  BenchArgs ba;
  auto* bn = app.add_subcommand("bench", "Single-threaded wall-clock of the encoder forward pass");
  bn->add_option("--config", ba.config, "Run config JSON")->check(CLI::ExistingFile);
  bn->add_option("--image", ba.image)->check(CLI::ExistingFile);
  bn->add_option("--synthetic", ba.synthetic, "Synthetic HxW input (default: config input size)");
  bn->add_option("--repeats", ba.repeats)->capture_default_str()->check(CLI::PositiveNumber);
  bn->add_option("--seed", ba.seed);
  bn->add_option("--out", ba.out, "Write JSON here instead of stdout");
  bn->callback([&] { rc = run_bench(ba); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  } catch (const pvc::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pvc::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return rc;
}
