#include "cmc/nn/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace cmc::nn {

nlohmann::json layer_spec_to_json(const LayerSpec& spec) {
  nlohmann::json j{{"kind", to_string(spec.kind)}};
  switch (spec.kind) {
    case LayerKind::dense:
      j["units"] = spec.units;
      if (!spec.out_shape.empty()) j["out_shape"] = spec.out_shape;
      break;
    case LayerKind::conv2d:
      j["filters"] = spec.filters;
      j["kernel"] = spec.kernel;
      j["stride"] = spec.stride;
      j["zero_pad"] = spec.zero_pad;
      break;
    case LayerKind::activation: j["activation"] = to_string(spec.activation); break;
    case LayerKind::mean_pool:
    case LayerKind::upsample: break;
  }
  return j;
}

LayerSpec layer_spec_from_json(const nlohmann::json& j) {
  switch (layer_kind_from_string(j.at("kind").get<std::string>())) {
    case LayerKind::dense: return LayerSpec::dense(j.at("units").get<std::size_t>(), j.value("out_shape", Shape{}));
    case LayerKind::conv2d:
      return LayerSpec::conv2d(j.at("filters").get<std::size_t>(), j.at("kernel").get<std::size_t>(),
                               j.value("stride", std::size_t{1}), j.value("zero_pad", true));
    case LayerKind::activation: return LayerSpec::act(activation_from_string(j.at("activation").get<std::string>()));
    case LayerKind::mean_pool: return LayerSpec::mean_pool();
    case LayerKind::upsample: return LayerSpec::upsample();
  }
  throw std::invalid_argument("unreachable layer kind");
}

nlohmann::json to_json(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) layers.push_back(layer_spec_to_json(l));
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t i = 0; i < net.params().size(); ++i)
    params.push_back({{"name", net.param_names()[i]},
                      {"shape", net.params()[i].shape()},
                      {"data", net.params()[i].data()}});
  return {{"version", kCheckpointVersion},
          {"spec", {{"input_dims", net.input_dims()}, {"layers", layers}}},
          {"seed", net.seed()},
          {"params", params}};
}

Network network_from_json(const nlohmann::json& doc) {
  const int version = doc.at("version").get<int>();
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                             std::to_string(kCheckpointVersion) + ")");
  std::vector<LayerSpec> layers;
  for (const auto& l : doc.at("spec").at("layers")) layers.push_back(layer_spec_from_json(l));
  Network net(doc.at("spec").at("input_dims").get<Shape>(), std::move(layers), doc.at("seed").get<std::uint64_t>());
  const auto& stored = doc.at("params");
  if (stored.size() != net.params().size())
    throw std::runtime_error("checkpoint holds " + std::to_string(stored.size()) + " parameter tensors, spec needs " +
                             std::to_string(net.params().size()));
  for (std::size_t i = 0; i < stored.size(); ++i) {
    const auto& p = stored[i];
    if (p.at("name").get<std::string>() != net.param_names()[i])
      throw std::runtime_error("checkpoint parameter " + std::to_string(i) + " is named '" +
                               p.at("name").get<std::string>() + "', expected '" + net.param_names()[i] + "'");
    Tensor t(p.at("shape").get<Shape>(), p.at("data").get<std::vector<double>>());
    if (t.shape() != net.params()[i].shape())
      throw std::runtime_error("checkpoint parameter '" + net.param_names()[i] + "' has shape " + to_string(t.shape()));
    net.params()[i] = std::move(t);
  }
  return net;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << to_json(net).dump() << '\n';
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  return network_from_json(nlohmann::json::parse(in));
}

}  // namespace cmc::nn
