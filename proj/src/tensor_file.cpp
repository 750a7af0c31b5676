#include "pvc/tensor_file.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <system_error>

#include "pvc/config.hpp"
#include "pvc/error.hpp"

namespace pvc {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

namespace {

constexpr const char* kMagic = "PVCT";

std::size_t dtype_size(DType t) { return t == DType::kF32 ? 4 : 8; }
const char* dtype_name(DType t) { return t == DType::kF32 ? "f32" : "f64"; }

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::kF32;
  if (s == "f64") return DType::kF64;
  throw ValidationError("tensor file: unsupported dtype '" + s + "'");
}

}  // namespace

std::size_t Tensor::element_count() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

const Tensor& TensorBundle::get(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw ValidationError("tensor file: missing tensor '" + name + "'");
}

void TensorBundle::add(std::string name, const Matrix& m, DType dtype) {
  tensors.push_back({std::move(name), dtype, {m.rows(), m.cols()}, {m.values().begin(), m.values().end()}});
}

void TensorBundle::add(std::string name, const std::vector<double>& v, DType dtype) {
  tensors.push_back({std::move(name), dtype, {v.size()}, v});
}

Matrix TensorBundle::matrix(const std::string& name) const {
  const Tensor& t = get(name);
  if (t.shape.size() != 2) throw ValidationError("tensor file: '" + name + "' is not 2-D");
  return Matrix(t.shape[0], t.shape[1], t.values);
}

std::vector<double> TensorBundle::vector(const std::string& name) const {
  const Tensor& t = get(name);
  if (t.shape.size() != 1) throw ValidationError("tensor file: '" + name + "' is not 1-D");
  return t.values;
}

std::vector<std::uint8_t> serialize(const TensorBundle& bundle) {
  // Offsets depend on the header length, which depends on the offsets;
  // iterate until the decimal width settles.
  nlohmann::json header;
  std::string header_text;
  std::size_t payload_start = 0;
  for (int pass = 0; pass < 4; ++pass) {
    header = {{"format", "pvc-tensor"}, {"version", 1}, {"attrs", bundle.attrs},
              {"tensors", nlohmann::json::array()}};
    std::size_t offset = payload_start;
    for (const auto& t : bundle.tensors) {
      if (t.values.size() != t.element_count()) {
        throw ValidationError("tensor file: '" + t.name + "' has " + std::to_string(t.values.size()) +
                              " values for its shape");
      }
      const std::size_t nbytes = t.values.size() * dtype_size(t.dtype);
      header["tensors"].push_back({{"name", t.name}, {"dtype", dtype_name(t.dtype)}, {"shape", t.shape},
                                   {"layout", "row-major"}, {"byte_order", "little"},
                                   {"offset", offset}, {"nbytes", nbytes}});
      offset += nbytes;
    }
    header_text = header.dump();
    const std::size_t start =
        std::strlen(kMagic) + 1 + std::to_string(header_text.size()).size() + 1 + header_text.size();
    if (start == payload_start) break;
    payload_start = start;
  }

  std::vector<std::uint8_t> out;
  const std::string prefix = std::string(kMagic) + "\n" + std::to_string(header_text.size()) + "\n" + header_text;
  out.assign(prefix.begin(), prefix.end());
  if (out.size() != payload_start) throw Error("tensor file: header layout did not converge");
  for (const auto& t : bundle.tensors) {
    for (double v : t.values) {
      if (t.dtype == DType::kF32) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
      } else {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
      }
    }
  }
  return out;
}

TensorBundle deserialize(const std::vector<std::uint8_t>& bytes) {
  const std::string magic_line = std::string(kMagic) + "\n";
  if (bytes.size() < magic_line.size() || !std::equal(magic_line.begin(), magic_line.end(), bytes.begin())) {
    throw ValidationError("tensor file: bad magic (expected PVCT)");
  }
  std::size_t pos = magic_line.size();
  std::string len_text;
  while (pos < bytes.size() && bytes[pos] != '\n') {
    if (!std::isdigit(bytes[pos]) || len_text.size() > 12) throw ValidationError("tensor file: corrupt header length");
    len_text.push_back(static_cast<char>(bytes[pos++]));
  }
  if (pos >= bytes.size() || len_text.empty()) throw ValidationError("tensor file: corrupt header length");
  ++pos;
  const std::size_t header_len = std::stoull(len_text);
  if (pos + header_len > bytes.size()) throw ValidationError("tensor file: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("tensor file: corrupt header: ") + e.what());
  }
  const std::size_t payload_start = pos + header_len;

  TensorBundle bundle;
  try {
    if (header.at("format") != "pvc-tensor" || header.at("version") != 1) {
      throw ValidationError("tensor file: unsupported format or version");
    }
    bundle.attrs = header.value("attrs", nlohmann::json::object());
    std::size_t expected_offset = payload_start;
    for (const auto& jt : header.at("tensors")) {
      Tensor t;
      t.name = jt.at("name").get<std::string>();
      t.dtype = parse_dtype(jt.at("dtype").get<std::string>());
      t.shape = jt.at("shape").get<std::vector<std::size_t>>();
      if (jt.at("layout") != "row-major" || jt.at("byte_order") != "little") {
        throw ValidationError("tensor file: '" + t.name + "' must be row-major little-endian");
      }
      const std::size_t offset = jt.at("offset").get<std::size_t>();
      const std::size_t nbytes = jt.at("nbytes").get<std::size_t>();
      const std::size_t count = t.element_count();
      if (nbytes != count * dtype_size(t.dtype)) {
        throw ValidationError("tensor file: '" + t.name + "' byte count does not match its shape");
      }
      if (offset != expected_offset || offset + nbytes > bytes.size()) {
        throw ValidationError("tensor file: '" + t.name + "' payload out of range");
      }
      t.values.resize(count);
      const std::uint8_t* p = bytes.data() + offset;
      for (std::size_t i = 0; i < count; ++i) {
        if (t.dtype == DType::kF32) {
          std::uint32_t bits = 0;
          for (int b = 0; b < 4; ++b) bits |= std::uint32_t{p[4 * i + b]} << (8 * b);
          t.values[i] = std::bit_cast<float>(bits);
        } else {
          std::uint64_t bits = 0;
          for (int b = 0; b < 8; ++b) bits |= std::uint64_t{p[8 * i + b]} << (8 * b);
          t.values[i] = std::bit_cast<double>(bits);
        }
      }
      expected_offset = offset + nbytes;
      bundle.tensors.push_back(std::move(t));
    }
    if (expected_offset != bytes.size()) throw ValidationError("tensor file: trailing bytes after payload");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("tensor file: malformed header: ") + e.what());
  }
  return bundle;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("cannot open " + tmp.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
      f.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("write failed: " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

void write_tensor_file(const std::filesystem::path& path, const TensorBundle& bundle) {
  const auto bytes = serialize(bundle);
  write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

TensorBundle read_tensor_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open tensor file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

TensorBundle to_bundle(const PatchEmbedWeights& w) {
  w.validate();
  TensorBundle b;
  b.attrs = {{"kind", "patch_embed"}, {"patch", w.patch}, {"channels", w.channels}};
  b.add("weight", w.weight);
  b.add("bias", w.bias);
  return b;
}

PatchEmbedWeights patch_weights_from_bundle(const TensorBundle& b) {
  if (b.attrs.value("kind", "") != "patch_embed") {
    throw ValidationError("tensor file: not a patch_embed bundle");
  }
  PatchEmbedWeights w;
  try {
    w.patch = b.attrs.at("patch").get<std::size_t>();
    w.channels = b.attrs.at("channels").get<std::size_t>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("tensor file: patch_embed bundle needs integer 'patch' and 'channels' attrs");
  }
  w.weight = b.matrix("weight");
  w.bias = b.vector("bias");
  w.validate();
  return w;
}

namespace {

void add_ca(TensorBundle& b, const std::string& prefix, const CAPoolParams& p) {
  b.add(prefix + "mlp_w1", p.mlp_w1);
  b.add(prefix + "mlp_b1", p.mlp_b1);
  b.add(prefix + "mlp_w2", p.mlp_w2);
  b.add(prefix + "mlp_b2", p.mlp_b2);
}

CAPoolParams read_ca(const TensorBundle& b, const std::string& prefix) {
  return CAPoolParams{b.matrix(prefix + "mlp_w1"), b.vector(prefix + "mlp_b1"), b.matrix(prefix + "mlp_w2"),
                      b.vector(prefix + "mlp_b2")};
}

void add_unshuffle(TensorBundle& b, const std::string& prefix, const PixelUnshuffleParams& p) {
  b.add(prefix + "proj", p.proj);
  b.add(prefix + "bias", p.bias);
}

PixelUnshuffleParams read_unshuffle(const TensorBundle& b, const std::string& prefix) {
  return PixelUnshuffleParams{b.matrix(prefix + "proj"), b.vector(prefix + "bias")};
}

void add_linear(TensorBundle& b, const std::string& prefix, const Linear& l) {
  b.add(prefix + ".weight", l.weight);
  b.add(prefix + ".bias", l.bias);
}

Linear read_linear(const TensorBundle& b, const std::string& prefix) {
  return Linear{b.matrix(prefix + ".weight"), b.vector(prefix + ".bias")};
}

}  // namespace

TensorBundle to_bundle(const CAPoolParams& p) {
  TensorBundle b;
  b.attrs = {{"kind", "ca_pool"}};
  add_ca(b, "", p);
  return b;
}

CAPoolParams ca_params_from_bundle(const TensorBundle& b) {
  CAPoolParams p = read_ca(b, "");
  p.validate(p.mlp_w2.cols());
  return p;
}

TensorBundle to_bundle(const PixelUnshuffleParams& p) {
  TensorBundle b;
  b.attrs = {{"kind", "pixel_unshuffle"}};
  add_unshuffle(b, "", p);
  return b;
}

PixelUnshuffleParams unshuffle_params_from_bundle(const TensorBundle& b) {
  PixelUnshuffleParams p = read_unshuffle(b, "");
  p.validate(p.proj.cols());
  return p;
}

TensorBundle to_bundle(const EncoderState& state, const EncoderConfig& config) {
  state.validate(config);
  TensorBundle b;
  b.attrs = {{"kind", "encoder_state"}, {"config", to_json(config)}};
  b.add("patch_embed.weight", state.patch_embed.weight);
  b.add("patch_embed.bias", state.patch_embed.bias);
  for (std::size_t i = 0; i < state.blocks.size(); ++i) {
    const auto& p = state.blocks[i];
    const std::string pre = "blocks." + std::to_string(i) + ".";
    b.add(pre + "norm1.gamma", p.norm1_gamma);
    b.add(pre + "norm1.beta", p.norm1_beta);
    add_linear(b, pre + "qkv", p.qkv);
    add_linear(b, pre + "proj", p.proj);
    b.add(pre + "norm2.gamma", p.norm2_gamma);
    b.add(pre + "norm2.beta", p.norm2_beta);
    add_linear(b, pre + "fc1", p.fc1);
    add_linear(b, pre + "fc2", p.fc2);
  }
  for (std::size_t i = 0; i < state.compressors.size(); ++i) {
    const std::string pre = "compressors." + std::to_string(i) + ".";
    if (const auto* ca = std::get_if<CAPoolParams>(&state.compressors[i])) add_ca(b, pre, *ca);
    if (const auto* pu = std::get_if<PixelUnshuffleParams>(&state.compressors[i])) add_unshuffle(b, pre, *pu);
  }
  return b;
}

EncoderState state_from_bundle(const TensorBundle& b, const EncoderConfig& config) {
  if (b.attrs.value("kind", "") != "encoder_state") throw ValidationError("tensor file: not an encoder_state bundle");
  config.validate();
  EncoderState s;
  s.patch_embed = PatchEmbedWeights{b.matrix("patch_embed.weight"), b.vector("patch_embed.bias"), config.patch,
                                    config.channels};
  for (std::size_t i = 0; i < config.depth; ++i) {
    const std::string pre = "blocks." + std::to_string(i) + ".";
    BlockParams p;
    p.norm1_gamma = b.vector(pre + "norm1.gamma");
    p.norm1_beta = b.vector(pre + "norm1.beta");
    p.qkv = read_linear(b, pre + "qkv");
    p.proj = read_linear(b, pre + "proj");
    p.norm2_gamma = b.vector(pre + "norm2.gamma");
    p.norm2_beta = b.vector(pre + "norm2.beta");
    p.fc1 = read_linear(b, pre + "fc1");
    p.fc2 = read_linear(b, pre + "fc2");
    s.blocks.push_back(std::move(p));
  }
  for (std::size_t i = 0; i < config.plan.count(); ++i) {
    const std::string pre = "compressors." + std::to_string(i) + ".";
    switch (config.plan.entries[i].kind) {
      case WtcKind::kAvg: s.compressors.emplace_back(std::monostate{}); break;
      case WtcKind::kCa: s.compressors.emplace_back(read_ca(b, pre)); break;
      case WtcKind::kPixelUnshuffle: s.compressors.emplace_back(read_unshuffle(b, pre)); break;
    }
  }
  s.validate(config);
  return s;
}

}  // namespace pvc
