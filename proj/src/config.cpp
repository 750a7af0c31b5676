#include "pvc/config.hpp"

#include <fstream>
#include <set>

#include "pvc/error.hpp"

namespace pvc {

namespace {

using nlohmann::json;

void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError("config: '" + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw ValidationError("config: unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: '" + where + "." + key + "' has the wrong type");
  }
}

std::size_t get_count(const json& j, const std::string& key, std::size_t fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ValidationError("config: '" + where + "." + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

WtcPlan plan_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("config: plan must be an array of {layer, kind}");
  WtcPlan plan;
  for (const auto& e : j) {
    only_keys(e, {"layer", "kind"}, "plan[]");
    if (!e.contains("layer") || !e.contains("kind")) {
      throw ValidationError("config: plan entries need 'layer' and 'kind'");
    }
    const std::size_t layer = get_count(e, "layer", 0, "plan[]");
    plan.entries.push_back({layer, parse_wtc_kind(get_or<std::string>(e, "kind", "", "plan[]"))});
  }
  return plan;
}

json to_json(const WtcPlan& plan) {
  json j = json::array();
  for (const auto& e : plan.entries) j.push_back({{"layer", e.layer}, {"kind", to_string(e.kind)}});
  return j;
}

EncoderConfig encoder_config_from_json(const json& j) {
  only_keys(j, {"depth", "dim", "heads", "mlp_ratio", "patch", "source_patch", "channels", "ca_hidden", "plan",
                "normalize", "pos_encoding"},
            "encoder");
  EncoderConfig c;
  c.depth = get_count(j, "depth", c.depth, "encoder");
  c.dim = get_count(j, "dim", c.dim, "encoder");
  c.heads = get_count(j, "heads", c.heads, "encoder");
  c.mlp_ratio = get_or<double>(j, "mlp_ratio", c.mlp_ratio, "encoder");
  c.patch = get_count(j, "patch", c.patch, "encoder");
  if (j.contains("source_patch") && !j.at("source_patch").is_null()) {
    c.source_patch = get_count(j, "source_patch", 0, "encoder");
  }
  c.channels = get_count(j, "channels", c.channels, "encoder");
  c.ca_hidden = get_count(j, "ca_hidden", c.ca_hidden, "encoder");
  c.normalize = get_or<bool>(j, "normalize", c.normalize, "encoder");
  if (get_or<std::string>(j, "pos_encoding", "sinusoidal_2d", "encoder") != "sinusoidal_2d") {
    throw ValidationError("config: 'encoder.pos_encoding' must be sinusoidal_2d");
  }
  if (j.contains("plan")) c.plan = plan_from_json(j.at("plan"));
  c.validate();
  return c;
}

json to_json(const EncoderConfig& c) {
  json j = {{"depth", c.depth},       {"dim", c.dim},           {"heads", c.heads},
            {"mlp_ratio", c.mlp_ratio}, {"patch", c.patch},       {"channels", c.channels},
            {"ca_hidden", c.ca_hidden}, {"normalize", c.normalize}, {"pos_encoding", "sinusoidal_2d"},
            {"plan", to_json(c.plan)}};
  j["source_patch"] = c.source_patch ? json(*c.source_patch) : json(nullptr);
  return j;
}

RunConfig run_config_from_json(const json& j) {
  only_keys(j, {"encoder", "llm", "seed", "input", "sweep", "output"}, "");
  RunConfig rc;
  if (j.contains("encoder")) rc.encoder = encoder_config_from_json(j.at("encoder"));
  else rc.encoder.validate();
  if (j.contains("llm")) {
    const json& l = j.at("llm");
    only_keys(l, {"dim", "depth", "mlp_ratio"}, "llm");
    rc.llm.dim = get_count(l, "dim", rc.llm.dim, "llm");
    rc.llm.depth = get_count(l, "depth", rc.llm.depth, "llm");
    rc.llm.mlp_ratio = get_or<double>(l, "mlp_ratio", rc.llm.mlp_ratio, "llm");
  }
  rc.llm.validate();
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ValidationError("config: 'seed' must be a non-negative integer");
    rc.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("input")) {
    const json& in = j.at("input");
    only_keys(in, {"height", "width"}, "input");
    rc.height = get_count(in, "height", rc.height, "input");
    rc.width = get_count(in, "width", rc.width, "input");
  }
  if (rc.height == 0 || rc.width == 0) throw ValidationError("config: input height and width must be >= 1");
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    if (!s.is_array()) throw ValidationError("config: 'sweep' must be an array");
    std::set<std::string> ids;
    for (const auto& item : s) {
      only_keys(item, {"id", "plan"}, "sweep[]");
      SweepPlan p;
      p.id = get_or<std::string>(item, "id", "", "sweep[]");
      if (p.id.empty()) throw ValidationError("config: sweep entries need a non-empty 'id'");
      if (!ids.insert(p.id).second) throw ValidationError("config: duplicate sweep plan id '" + p.id + "'");
      if (!item.contains("plan")) throw ValidationError("config: sweep entry '" + p.id + "' has no plan");
      p.plan = plan_from_json(item.at("plan"));
      rc.sweep.push_back(std::move(p));
    }
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    only_keys(o, {"dir"}, "output");
    rc.output_dir = get_or<std::string>(o, "dir", "", "output");
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace pvc
