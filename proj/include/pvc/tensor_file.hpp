#pragma once

// Portable tensor bundle format.
//
//   line 1   "PVCT"
//   line 2   decimal byte length L of the JSON header
//   next L   JSON header:
//            {"format": "pvc-tensor", "version": 1, "attrs": {...},
//             "tensors": [{"name", "dtype": "f32"|"f64", "shape": [...],
//                          "layout": "row-major", "byte_order": "little",
//                          "offset": <absolute byte offset>, "nbytes": <n>}, ...]}
//   payload  raw little-endian values, tensors back to back in header order
//
// Files are written to a temporary sibling and renamed, so a failed write
// never leaves a partial output.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvc/encoder.hpp"
#include "pvc/numerics.hpp"
#include "pvc/rpe.hpp"
#include "pvc/wtc.hpp"

namespace pvc {

enum class DType { kF32, kF64 };

struct Tensor {
  std::string name;
  DType dtype = DType::kF64;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  std::size_t element_count() const;
};

struct TensorBundle {
  nlohmann::json attrs = nlohmann::json::object();
  std::vector<Tensor> tensors;

  const Tensor& get(const std::string& name) const;
  void add(std::string name, const Matrix& m, DType dtype = DType::kF64);
  void add(std::string name, const std::vector<double>& v, DType dtype = DType::kF64);
  Matrix matrix(const std::string& name) const;
  std::vector<double> vector(const std::string& name) const;
};

std::vector<std::uint8_t> serialize(const TensorBundle& bundle);
TensorBundle deserialize(const std::vector<std::uint8_t>& bytes);

void write_tensor_file(const std::filesystem::path& path, const TensorBundle& bundle);
TensorBundle read_tensor_file(const std::filesystem::path& path);

/// Writes `bytes` via temp file + rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

TensorBundle to_bundle(const PatchEmbedWeights& w);
PatchEmbedWeights patch_weights_from_bundle(const TensorBundle& b);

TensorBundle to_bundle(const CAPoolParams& p);
CAPoolParams ca_params_from_bundle(const TensorBundle& b);

TensorBundle to_bundle(const PixelUnshuffleParams& p);
PixelUnshuffleParams unshuffle_params_from_bundle(const TensorBundle& b);

TensorBundle to_bundle(const EncoderState& state, const EncoderConfig& config);
/// Throws ValidationError if the state does not match `config`.
EncoderState state_from_bundle(const TensorBundle& b, const EncoderConfig& config);

}  // namespace pvc
