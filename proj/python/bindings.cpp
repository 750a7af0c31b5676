#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "pvc/config.hpp"
#include "pvc/costmodel.hpp"
#include "pvc/encoder.hpp"
#include "pvc/error.hpp"
#include "pvc/harness.hpp"
#include "pvc/probegen.hpp"
#include "pvc/rpe.hpp"
#include "pvc/wtc.hpp"

namespace py = pybind11;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

pvc::Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw pvc::ValidationError("expected a 2-D array");
  pvc::Matrix m(a.shape(0), a.shape(1));
  std::memcpy(m.values().data(), a.data(), m.size() * sizeof(double));
  return m;
}

Array from_matrix(const pvc::Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::memcpy(out.mutable_data(), m.values().data(), m.size() * sizeof(double));
  return out;
}

pvc::TokenGrid to_grid(const Array& a) {
  if (a.ndim() != 3) throw pvc::ValidationError("expected an (h, w, D) array");
  pvc::TokenGrid g(a.shape(0), a.shape(1), a.shape(2));
  std::memcpy(g.tokens.values().data(), a.data(), g.tokens.size() * sizeof(double));
  return g;
}

Array from_grid(const pvc::TokenGrid& g) {
  Array out({g.h, g.w, g.dim()});
  std::memcpy(out.mutable_data(), g.tokens.values().data(), g.tokens.size() * sizeof(double));
  return out;
}

pvc::Image to_image(const Array& a) {
  if (a.ndim() != 3) throw pvc::ValidationError("expected an (H, W, C) image");
  pvc::Image img(a.shape(0), a.shape(1), a.shape(2));
  std::memcpy(img.data.data(), a.data(), img.data.size() * sizeof(double));
  return img;
}

pvc::RunConfig parse_config(const std::string& text) {
  try {
    return pvc::run_config_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw pvc::ValidationError(std::string("config: ") + e.what());
  }
}

pvc::ProbeDataset generate(const std::string& kind, std::size_t count, std::uint64_t seed) {
  if (kind == "shapegrid") return pvc::gen_shapegrid(count, seed);
  if (kind == "sudoku") return pvc::gen_sudoku(count, seed);
  throw pvc::ValidationError("kind must be shapegrid or sudoku");
}

}  // namespace

PYBIND11_MODULE(_pvc, m) {
  m.doc() = "Native core of pvc: patch-embedding resize, windowed token compression, encoder, cost model, probes.";

  static py::exception<pvc::ValidationError> validation(m, "ValidationError", PyExc_ValueError);
  static py::exception<pvc::NumericalError> numerical(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const pvc::ValidationError& e) {
      py::set_error(validation, e.what());
    } catch (const pvc::NumericalError& e) {
      py::set_error(numerical, e.what());
    }
  });

  m.def("resize_map", [](std::size_t channels, std::size_t coarse, std::size_t fine) {
    return from_matrix(pvc::build_resize_map(channels, coarse, fine).matrix);
  }, py::arg("channels"), py::arg("coarse"), py::arg("fine"));

  m.def("pi_resize", [](const Array& weight, std::vector<double> bias, std::size_t patch, std::size_t channels,
                        std::size_t fine_patch) {
    pvc::PatchEmbedWeights w{to_matrix(weight), std::move(bias), patch, channels};
    const auto r = pvc::transform_weights(w, fine_patch, nullptr);
    return py::make_tuple(from_matrix(r.weights.weight), r.weights.bias, pvc::to_json(r.report).dump());
  }, py::arg("weight"), py::arg("bias"), py::arg("patch"), py::arg("channels"), py::arg("fine_patch"),
     "Least-squares kernel resize. Returns (weight, bias, report_json).");

  m.def("avg_pool", [](const Array& tokens) { return from_grid(pvc::avg_pool_compress(to_grid(tokens))); });

  m.def("ca_pool_zero_init", [](const Array& tokens, std::size_t hidden, std::uint64_t seed) {
    const auto g = to_grid(tokens);
    return from_grid(pvc::ca_pool_compress(g, pvc::zero_init_ca_params(g.dim(), hidden, seed)));
  }, py::arg("tokens"), py::arg("hidden"), py::arg("seed") = 0);

  m.def("pixel_unshuffle_avg_init", [](const Array& tokens) {
    const auto g = to_grid(tokens);
    return from_grid(pvc::pixel_unshuffle_compress(g, pvc::averaging_unshuffle_params(g.dim())));
  });

  m.def("token_count", [](const std::string& config, std::size_t height, std::size_t width) {
    return pvc::token_count(parse_config(config).encoder, height, width);
  }, py::arg("config"), py::arg("height"), py::arg("width"));

  m.def("encode", [](const Array& image, const std::string& config, std::uint64_t seed) {
    const auto cfg = parse_config(config);
    const auto state = pvc::init_state(cfg.encoder, seed);
    pvc::TokenGrid tokens;
    const auto img = to_image(image);
    pvc::EncodeSummary s;
    {
      py::gil_scoped_release release;
      s = pvc::encode_summary(img, cfg.encoder, &state, true, &tokens);
    }
    return py::make_tuple(from_grid(tokens), pvc::to_json(s).dump());
  }, py::arg("image"), py::arg("config"), py::arg("seed") = 0, "Returns (tokens, summary_json).");

  m.def("synthetic_image", [](std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
    const pvc::Image img = pvc::synthetic_image(h, w, c, seed);
    Array out({h, w, c});
    std::memcpy(out.mutable_data(), img.data.data(), img.data.size() * sizeof(double));
    return out;
  }, py::arg("height"), py::arg("width"), py::arg("channels") = 3, py::arg("seed") = 0);

  m.def("sweep_csv", [](const std::string& config) {
    const auto cfg = parse_config(config);
    std::string csv = pvc::csv_header() + "\n";
    for (const auto& r : pvc::sweep_insertions(cfg.encoder, cfg.height, cfg.width, cfg.llm, cfg.sweep)) {
      csv += pvc::to_csv_row(r) + "\n";
    }
    return csv;
  });

  m.def("gradcheck", [](std::uint64_t seed, std::size_t dim, std::size_t hidden, double step) {
    pvc::GradCheckOptions o;
    o.seed = seed;
    o.dim = dim;
    o.hidden = hidden;
    o.step = step;
    const auto r = pvc::ca_pool_gradcheck(o);
    return py::dict(py::arg("max_rel_error") = r.max_rel_error, py::arg("max_abs_error") = r.max_abs_error,
                    py::arg("worst") = r.worst, py::arg("checked") = r.checked);
  }, py::arg("seed") = 0, py::arg("dim") = 16, py::arg("hidden") = 16, py::arg("step") = 1e-5);

  m.def("probe_items", [](const std::string& kind, std::size_t count, std::uint64_t seed) {
    std::vector<std::string> out;
    for (const auto& s : generate(kind, count, seed).samples) out.push_back(pvc::item_json(s.item).dump());
    return out;
  }, py::arg("kind"), py::arg("count"), py::arg("seed") = 0, "JSON text of each item, in order.");

  m.def("probe_image", [](const std::string& kind, std::size_t index, std::uint64_t seed) {
    // Items are independent of count, so generating index+1 items yields the same item.
    const auto ds = generate(kind, index + 1, seed);
    const pvc::RgbImage img = pvc::rasterize(ds.samples[index].grid);
    py::array_t<std::uint8_t> out({img.height, img.width, std::size_t{3}});
    std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size());
    return out;
  }, py::arg("kind"), py::arg("index"), py::arg("seed") = 0);

  m.def("checksum", [](const Array& a) {
    pvc::Matrix m(1, static_cast<std::size_t>(a.size()));
    std::memcpy(m.values().data(), a.data(), m.size() * sizeof(double));
    return "fnv1a64:" + pvc::hex64(pvc::fnv1a64(m));
  });
}
