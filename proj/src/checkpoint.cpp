#include "prokan/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "prokan/error.hpp"

namespace prokan {

namespace {

using nlohmann::json;

constexpr std::string_view kFormatName = "prokan-checkpoint";

json layer_to_json(const KanLayer& layer) {
  const auto c = layer.coefficients();
  return json{{"in_dim", layer.in_dim()},
              {"out_dim", layer.out_dim()},
              {"grid_size", layer.grid_size()},
              {"degree", layer.degree()},
              {"domain_min", layer.knots().domain_min()},
              {"domain_max", layer.knots().domain_max()},
              {"coefficients", std::vector<double>(c.begin(), c.end())}};
}

KanLayer layer_from_json(const json& j) {
  KanLayer layer(j.at("in_dim").get<int>(), j.at("out_dim").get<int>(),
                 j.at("grid_size").get<int>(), j.at("degree").get<int>(),
                 j.at("domain_min").get<double>(), j.at("domain_max").get<double>());
  const auto coeffs = j.at("coefficients").get<std::vector<double>>();
  if (coeffs.size() != layer.parameter_count()) {
    throw Error(ErrorCode::kParseError, "coefficient count does not match layer topology");
  }
  std::copy(coeffs.begin(), coeffs.end(), layer.coefficients().begin());
  return layer;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  json blocks = json::array();
  for (const auto& block : ckpt.net.blocks()) {
    json layers = json::array();
    for (const auto& layer : block.layers) layers.push_back(layer_to_json(layer));
    blocks.push_back(json{{"residual", block.residual}, {"layers", std::move(layers)}});
  }
  json doc{{"format", kFormatName},
           {"format_version", kCheckpointFormatVersion},
           {"input_dim", ckpt.net.input_dim()},
           {"hidden_width", ckpt.net.hidden_width()},
           {"patch_radius", ckpt.patch_radius},
           {"epoch", ckpt.epoch},
           {"val_dice", ckpt.val_dice},
           {"blocks", std::move(blocks)},
           {"head", layer_to_json(ckpt.net.head())}};
  return doc.dump(1) + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", std::string{}) != kFormatName) {
      throw Error(ErrorCode::kParseError, "not a proKAN checkpoint");
    }
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw Error(ErrorCode::kVersionMismatch,
                  "checkpoint format_version " + std::to_string(version) + " is not supported");
    }
    std::vector<KanBlock> blocks;
    for (const auto& jb : doc.at("blocks")) {
      KanBlock block;
      block.residual = jb.at("residual").get<bool>();
      for (const auto& jl : jb.at("layers")) block.layers.push_back(layer_from_json(jl));
      blocks.push_back(std::move(block));
    }
    ProKanNetwork net(doc.at("input_dim").get<int>(), doc.at("hidden_width").get<int>(),
                      std::move(blocks), layer_from_json(doc.at("head")));
    return Checkpoint{std::move(net), doc.at("patch_radius").get<int>(), doc.at("epoch").get<int>(),
                      doc.at("val_dice").get<double>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("malformed checkpoint: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParseError || e.code() == ErrorCode::kVersionMismatch) throw;
    throw Error(ErrorCode::kParseError, std::string("inconsistent checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << serialize_checkpoint(ckpt);
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(text);
}

}  // namespace prokan
