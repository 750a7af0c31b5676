// Acceptance gate: one PASS/FAIL line per criterion.
//
//   pvc_acceptance            run everything
//   pvc_acceptance 9b         run one criterion
//
// Exit status is 0 only if every selected criterion passes.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pvc/config.hpp"
#include "pvc/costmodel.hpp"
#include "pvc/encoder.hpp"
#include "pvc/harness.hpp"
#include "pvc/probegen.hpp"
#include "pvc/random.hpp"
#include "pvc/rpe.hpp"
#include "pvc/tensor_file.hpp"
#include "pvc/wtc.hpp"

using namespace pvc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal(0.0, scale);
  return m;
}

double max_diff(const Matrix& a, const Matrix& b) { return max_abs(a - b); }

std::string run_cli(const std::string& args, int* code) {
  const std::string cmd = std::string("'") + PVC_CLI_PATH + "' " + args + " 2>/dev/null";
  std::string out;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) {
    *code = -1;
    return out;
  }
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  const int status = pclose(p);
  *code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pvc_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

EncoderConfig so400m(std::size_t patch) {
  EncoderConfig c;
  c.depth = 27;
  c.dim = 1152;
  c.heads = 16;
  c.mlp_ratio = 4304.0 / 1152.0;
  c.patch = patch;
  return c;
}

// ---------------------------------------------------------------------------

Outcome token_arithmetic() {
  const auto t0 = clock_type::now();
  struct Row {
    std::size_t patch;
    std::vector<std::size_t> layers;
    std::size_t expected;
  };
  const std::vector<Row> rows{{16, {27}, 1024}, {16, {4, 18}, 256}, {8, {4, 18, 27}, 256}};
  bool ok = true;
  std::string detail;
  for (const auto& r : rows) {
    EncoderConfig c = so400m(r.patch);
    c.plan = WtcPlan::uniform(r.layers, WtcKind::kCa);
    c.validate();
    const std::size_t got = token_count(c, 1024, 1024).back();
    ok = ok && got == r.expected;
    detail += (detail.empty() ? "" : ", ") + std::to_string(got);
  }
  const double t = seconds_since(t0);
  return {ok && t < 1.0, "final tokens " + detail + " (expect 1024, 256, 256) in " + fmt(t) + " s"};
}

Outcome compression_ratio_law() {
  EncoderConfig c = so400m(8);
  bool ok = true;
  std::string detail;
  std::vector<std::size_t> layers;
  for (std::size_t j = 1; j <= 3; ++j) {
    layers.push_back(j == 1 ? 4 : j == 2 ? 18 : 27);
    c.plan = WtcPlan::uniform(layers, WtcKind::kCa);
    const double ratio = compression_ratio(cost_report(c, 1024, 1024, LlmProxy{}));
    ok = ok && ratio == std::pow(4.0, static_cast<double>(j));
    detail += "J=" + std::to_string(j) + " -> " + fmt(ratio) + " ";
  }
  return {ok, detail + "(expect 4, 16, 64)"};
}

// Random (W, B): half bilinear resize maps, half dense Gaussian maps.
struct Instance {
  PatchEmbedWeights w;
  ResizeMap b;
};

Instance random_instance(Rng& rng, int i) {
  const std::size_t c = 1 + rng.below(3);
  const std::size_t p = 2 + rng.below(5);            // 2..6
  const std::size_t ph = 1 + rng.below(p - 1);       // 1..p-1
  const std::size_t d = 1 + rng.below(8);            // 1..8
  ResizeMap b = build_resize_map(c, p, ph);
  if (i % 2 == 1) b.matrix = random_matrix(rng, b.matrix.rows(), b.matrix.cols());
  PatchEmbedWeights w{random_matrix(rng, d, c * p * p), std::vector<double>(d), p, c};
  for (double& v : w.bias) v = rng.normal();
  return {std::move(w), std::move(b)};
}

Outcome pi_resize_optimality() {
  const auto t0 = clock_type::now();
  Rng rng(derive_seed(3, 0));
  double worst_normal = 0.0;
  std::size_t beaten = 0;
  for (int i = 0; i < 50; ++i) {
    const auto [w, b] = random_instance(rng, i);
    const PatchEmbedWeights wh = pi_resize_weights(w, b);
    const Matrix wt = w.weight.transposed();
    const Matrix wht = wh.weight.transposed();
    const Matrix residual = wt - matmul(b.matrix, wht);
    worst_normal = std::max(worst_normal, max_abs(matmul(b.matrix.transposed(), residual)));
    const double best = frobenius_norm(residual);
    for (int k = 0; k < 100; ++k) {
      // Perturbation scales spread log-uniformly over [1e-4, 1].
      const double scale = std::pow(10.0, -4.0 * rng.uniform());
      const Matrix other = wt - matmul(b.matrix, wht + random_matrix(rng, wht.rows(), wht.cols(), scale));
      beaten += frobenius_norm(other) < best;
    }
  }
  const double t = seconds_since(t0);
  return {worst_normal <= 1e-7 && beaten == 0 && t < 10.0,
          "max |B^T(W^T - B W_hat^T)| = " + fmt(worst_normal) + " (tol 1e-7), perturbations better than optimum: " +
              std::to_string(beaten) + "/5000, " + fmt(t) + " s"};
}

Outcome consistent_patch() {
  Rng rng(derive_seed(4, 0));
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto [w, b] = random_instance(rng, i);
    const PatchEmbedWeights wh = pi_resize_weights(w, b);
    // t = s B^T lies in the column space of B; its fine version is t B.
    const Matrix t = matmul(random_matrix(rng, 4, b.matrix.cols()), b.matrix.transposed());
    const Matrix th = matmul(t, b.matrix);
    worst = std::max(worst, max_diff(matmul(t, w.weight.transposed()), matmul(th, wh.weight.transposed())));
  }
  return {worst <= 1e-7, "max |t W^T - t_hat W_hat^T| = " + fmt(worst) + " over 50 instances (tol 1e-7)"};
}

Outcome sigma_reduction() {
  Rng rng(derive_seed(5, 0));
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto [w, b] = random_instance(rng, i);
    const PatchEmbedWeights plain = pi_resize_weights(w, b);
    for (double c : {1.0, 2.0, 0.5}) {
      const CovarianceEstimate cov{c * Matrix::identity(b.matrix.rows()), 1, 0.0};
      worst = std::max(worst, max_diff(pi_resize_weights_sigma(w, b, cov).weight, plain.weight));
    }
  }
  return {worst <= 1e-9, "max |W_hat(cI) - W_hat| = " + fmt(worst) + " for c in {1, 2, 0.5} (tol 1e-9)"};
}

Outcome zero_init_equivalence() {
  Rng rng(derive_seed(6, 0));
  double standalone = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t h = 2 * (1 + rng.below(6)), w = 2 * (1 + rng.below(6)), d = 1 + rng.below(32);
    const TokenGrid g(h, w, random_matrix(rng, h * w, d, 3.0));
    const CAPoolParams p = zero_init_ca_params(d, 1 + rng.below(32), rng.next());
    standalone = std::max(standalone, max_diff(ca_pool_compress(g, p).tokens, avg_pool_compress(g).tokens));
  }
  double in_encoder = 0.0;
  EncoderConfig avg;  // 6 blocks, D=64, 4 heads
  avg.depth = 6;
  avg.patch = 8;
  avg.plan = WtcPlan::uniform({2, 4}, WtcKind::kAvg);
  EncoderConfig ca = avg;
  ca.plan = WtcPlan::uniform({2, 4}, WtcKind::kCa);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Image img = synthetic_image(32 * (1 + i % 3), 32 * (2 + i % 2), 3, i);
    const TokenGrid a = forward(img, init_state(avg, i), avg);
    const TokenGrid b = forward(img, init_state(ca, i), ca);
    in_encoder = std::max(in_encoder, max_diff(a.tokens, b.tokens));
  }
  return {standalone <= 1e-12 && in_encoder <= 1e-12,
          "max diff standalone " + fmt(standalone) + ", 6-block encoder " + fmt(in_encoder) +
              " over 20 cases each (tol 1e-12)"};
}

Outcome gradient_check() {
  const auto t0 = clock_type::now();
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t seed : {0, 1, 2}) {
    GradCheckOptions o;
    o.seed = seed;
    o.step = 1e-5;
    const auto r = ca_pool_gradcheck(o);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-4 && t < 30.0, "max relative error " + fmt(worst) + " over " + std::to_string(checked) +
                                         " coordinates, 3 seeds (tol 1e-4), " + fmt(t) + " s"};
}

Outcome softmax_convexity() {
  Rng rng(derive_seed(8, 0));
  double worst_sum = 0.0, worst_excursion = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t d = 1 + rng.below(16), hidden = 1 + rng.below(16);
    CAPoolParams p{random_matrix(rng, 2 * d, hidden, 1.0), std::vector<double>(hidden),
                   random_matrix(rng, hidden, d, 1.0), std::vector<double>(d)};
    for (double& v : p.mlp_b1) v = rng.normal();
    for (double& v : p.mlp_b2) v = rng.normal();
    const Matrix window = random_matrix(rng, 4, d, 2.0);
    const Matrix weights = channelwise_softmax(ca_window_logits(window, p));
    const TokenGrid out = ca_pool_compress(TokenGrid(2, 2, window), p);
    for (std::size_t ch = 0; ch < d; ++ch) {
      double sum = 0.0, lo = window(0, ch), hi = window(0, ch);
      for (std::size_t k = 0; k < 4; ++k) {
        sum += weights(k, ch);
        lo = std::min(lo, window(k, ch));
        hi = std::max(hi, window(k, ch));
      }
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      const double v = out.tokens(0, ch);
      worst_excursion = std::max(worst_excursion, std::max(lo - v, v - hi));
    }
  }
  return {worst_sum <= 1e-7 && worst_excursion <= 0.0,
          "max |sum w - 1| = " + fmt(worst_sum) + " (tol 1e-7), max excursion outside window range " +
              fmt(std::max(worst_excursion, 0.0)) + ", 1000 windows"};
}

Outcome insertion_monotonicity() {
  const LlmProxy llm;
  std::size_t moves = 0, violations = 0;
  for (std::size_t patch : {8, 16}) {
    EncoderConfig c = so400m(patch);
    const auto total = [&](std::vector<std::size_t> layers) {
      c.plan = WtcPlan::uniform(std::move(layers), WtcKind::kCa);
      return cost_report(c, 1024, 1024, llm).total_flops;
    };
    // Every plan with J = 1..3 and every single-step move of one index to an earlier free slot.
    for (std::size_t a = 0; a <= 27; ++a) {
      if (a > 0) {
        ++moves;
        violations += !(total({a - 1}) < total({a}));
      }
      for (std::size_t b = a + 1; b <= 27; ++b) {
        const auto here2 = total({a, b});
        if (a > 0) ++moves, violations += !(total({a - 1, b}) < here2);
        if (b - 1 > a) ++moves, violations += !(total({a, b - 1}) < here2);
        for (std::size_t e = b + 1; e <= 27; e += 3) {
          const auto here3 = total({a, b, e});
          if (a > 0) ++moves, violations += !(total({a - 1, b, e}) < here3);
          if (b - 1 > a) ++moves, violations += !(total({a, b - 1, e}) < here3);
          if (e - 1 > b) ++moves, violations += !(total({a, b, e - 1}) < here3);
        }
      }
    }
  }
  EncoderConfig c = so400m(16);
  c.plan = WtcPlan::uniform({18}, WtcKind::kCa);
  const auto at18 = cost_report(c, 1024, 1024, llm).total_flops;
  c.plan = WtcPlan::uniform({4}, WtcKind::kCa);
  const auto at4 = cost_report(c, 1024, 1024, llm).total_flops;
  return {violations == 0 && at4 < at18,
          std::to_string(violations) + " violations over " + std::to_string(moves) +
              " single-step moves; layer 18 -> 4: " + fmt(static_cast<double>(at18)) + " -> " +
              fmt(static_cast<double>(at4)) + " FLOPs"};
}

Outcome saturation() {
  const EncoderConfig c = so400m(8);
  std::vector<SweepPlan> plans;
  std::vector<std::size_t> layers;
  for (std::size_t j = 1; j <= 4; ++j) {
    layers.push_back(j);
    plans.push_back({"J" + std::to_string(j), WtcPlan::uniform(layers, WtcKind::kCa)});
  }
  const auto rows = sweep_insertions(c, 1024, 1024, LlmProxy{}, plans);
  bool decreasing = true;
  for (std::size_t i = 1; i < rows.size(); ++i) decreasing = decreasing && rows[i].total_flops < rows[i - 1].total_flops;
  const double d3 = *rows[2].marginal_reduction;
  const double d4 = *rows[3].marginal_reduction;
  const double ratio = d4 / d3;
  return {decreasing && ratio < 0.10,
          "marginal(J3->J4) / marginal(J2->J3) = " + fmt(d4) + " / " + fmt(d3) + " = " + fmt(ratio) +
              " (need < 0.10); the FLOP proxy shrinks marginals ~4x per 2x2 stage, so saturation below 10% "
              "is not reachable without fixed overheads"};
}

Outcome wall_clock_trend() {
  EncoderConfig base;
  base.depth = 27;
  base.dim = 32;
  base.heads = 4;
  base.patch = 16;
  base.plan = WtcPlan::uniform({27}, WtcKind::kPixelUnshuffle);
  EncoderConfig wtc = base;
  wtc.plan = WtcPlan::uniform({4, 18}, WtcKind::kCa);
  const Image img = synthetic_image(512, 512, 3, 0);
  const WallClock b = micro_bench(base, init_state(base, 0), img, 3);
  const WallClock w = micro_bench(wtc, init_state(wtc, 0), img, 3);
  return {w.median_ms < b.median_ms,
          "median ms: plan {4,18} " + fmt(w.median_ms) + " vs plan {27} " + fmt(b.median_ms) + " (512x512, P=16)"};
}

Outcome probe_datasets() {
  const auto t0 = clock_type::now();
  std::vector<std::string> problems;
  std::size_t items_checked = 0;
  for (const std::string kind : {"shapegrid", "sudoku"}) {
    const fs::path a = scratch(kind + "_a"), b = scratch(kind + "_b");
    int ca = 0, cb = 0;
    run_cli("probegen --kind " + kind + " --seed 0 --out-dir '" + a.string() + "'", &ca);
    run_cli("probegen --kind " + kind + " --seed 0 --out-dir '" + b.string() + "'", &cb);
    if (ca != 0 || cb != 0) {
      problems.push_back(kind + ": probegen exit " + std::to_string(ca) + "/" + std::to_string(cb));
      continue;
    }
    std::size_t files = 0, differing = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (!e.is_regular_file()) continue;
      ++files;
      differing += slurp(e.path()) != slurp(b / fs::relative(e.path(), a));
    }
    const std::size_t expected = kind == "sudoku" ? 8000 : 4000;
    if (differing) problems.push_back(kind + ": " + std::to_string(differing) + " files differ on regeneration");
    if (files != expected + 2) problems.push_back(kind + ": " + std::to_string(files) + " files");

    std::ifstream lines(a / "items.jsonl");
    std::string line;
    std::size_t n = 0, mismatched = 0, bad_anchor = 0;
    std::map<std::string, std::size_t> tasks, layouts;
    while (std::getline(lines, line)) {
      const auto j = nlohmann::json::parse(line);
      ProbeItem item;
      const std::string task = j.at("task");
      for (int t = 0; t < 5; ++t)
        if (task_name(static_cast<ProbeTask>(t)) == task) item.task = static_cast<ProbeTask>(t);
      item.meta = j.at("meta");
      mismatched += derive_answer(item) != j.at("answer").get<std::string>();
      ++tasks[task];
      ++layouts[j.at("meta").at("layout").get<std::string>()];
      if (kind == "sudoku") {
        const auto& center = j.at("meta").at("cells")[4];
        const bool meta_ok = center.at("row") == 1 && center.at("col") == 1 && center.at("kind") == "shape" &&
                             center.at("shape") == "pentagram" && center.at("color") == "red";
        const RgbImage img = read_image(a / j.at("image").get<std::string>());
        const std::uint8_t* px = img.px(504, 504);
        const auto& red = palette()[0];
        const bool pixel_ok = img.width == 1008 && px[0] == red.r && px[1] == red.g && px[2] == red.b;
        bad_anchor += !(meta_ok && pixel_ok);
      }
      ++n;
    }
    items_checked += n;
    if (n != expected) problems.push_back(kind + ": " + std::to_string(n) + " items");
    if (mismatched) problems.push_back(kind + ": " + std::to_string(mismatched) + " answers not re-derivable");
    if (bad_anchor) problems.push_back(kind + ": " + std::to_string(bad_anchor) + " images without the red pentagram");
    if (kind == "shapegrid" && (tasks.size() != 4 || layouts.size() != 5)) {
      problems.push_back("shapegrid: " + std::to_string(tasks.size()) + " tasks, " + std::to_string(layouts.size()) +
                         " layouts");
    }
    fs::remove_all(a);
    fs::remove_all(b);
  }
  std::string detail = std::to_string(items_checked) + " items (4000 shapegrid over 4 tasks x 5 layouts, 8000 sudoku), "
                       "answers re-derived, anchors probed, byte-identical regeneration, " +
                       fmt(seconds_since(t0)) + " s";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

Outcome determinism_roundtrip() {
  Rng rng(derive_seed(11, 0));
  EncoderConfig c;
  c.plan = WtcPlan::uniform({1, 3}, WtcKind::kCa);
  const EncoderState s = init_state(c, 7);
  TensorBundle b = to_bundle(s, c);
  b.add("noise_f64", random_matrix(rng, 9, 7));
  const fs::path dir = scratch("tensor");
  fs::create_directories(dir);
  write_tensor_file(dir / "state.pvct", b);
  const TensorBundle back = read_tensor_file(dir / "state.pvct");
  bool exact = back.tensors.size() == b.tensors.size();
  for (std::size_t i = 0; exact && i < b.tensors.size(); ++i) {
    const auto& x = b.tensors[i].values;
    const auto& y = back.tensors[i].values;
    exact = x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
  }
  exact = exact && serialize(back) == serialize(b);
  fs::remove_all(dir);

  const std::string cfg = std::string("'") + PVC_SOURCE_DIR + "/configs/budget256_rpe.json'";
  int c1 = 0, c2 = 0;
  const auto j1 = nlohmann::json::parse(run_cli("encode --config " + cfg + " --synthetic 256x256", &c1));
  const auto j2 = nlohmann::json::parse(run_cli("encode --config " + cfg + " --synthetic 256x256", &c2));
  const std::string k1 = j1.at("checksum"), k2 = j2.at("checksum");
  return {exact && c1 == 0 && c2 == 0 && k1 == k2,
          std::string("tensor file ") + (exact ? "bit-exact" : "NOT bit-exact") + "; encode checksums " + k1 + " / " + k2};
}

struct Criterion {
  const char* id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {"1", "token_arithmetic", token_arithmetic},
      {"2", "compression_ratio", compression_ratio_law},
      {"3", "pi_resize_optimality", pi_resize_optimality},
      {"4", "consistent_patch", consistent_patch},
      {"5", "sigma_reduction", sigma_reduction},
      {"6", "zero_init_equivalence", zero_init_equivalence},
      {"7", "gradient_check", gradient_check},
      {"8", "softmax_convexity", softmax_convexity},
      {"9a", "insertion_monotonicity", insertion_monotonicity},
      {"9b", "saturation", saturation},
      {"9c", "wall_clock_trend", wall_clock_trend},
      {"10", "probe_datasets", probe_datasets},
      {"11", "determinism_roundtrip", determinism_roundtrip},
  };
  const std::string only = argc > 1 ? argv[1] : "";
  bool all_pass = true, matched = false;
  for (const auto& c : criteria) {
    if (!only.empty() && only != c.id && only != c.name) continue;
    matched = true;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all_pass = all_pass && o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.id << " " << c.name << ": " << o.detail << std::endl;
  }
  if (!matched) {
    std::cerr << "unknown criterion '" << only << "'\n";
    return 2;
  }
  return all_pass ? 0 : 1;
}
