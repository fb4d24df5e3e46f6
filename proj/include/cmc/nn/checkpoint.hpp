#pragma once

#include <filesystem>

#include "json.hpp"

#include "cmc/nn/network.hpp"

namespace cmc::nn {

inline constexpr int kCheckpointVersion = 1;

/// {version, spec: {input_dims, layers}, seed, params: [{name, shape, data}]}
nlohmann::json to_json(const Network& net);
/// Rebuilds the network from its spec and overwrites the parameters. Throws std::runtime_error on
/// version mismatch or when stored parameters disagree with the spec.
Network network_from_json(const nlohmann::json& doc);

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

nlohmann::json layer_spec_to_json(const LayerSpec& spec);
LayerSpec layer_spec_from_json(const nlohmann::json& j);

}  // namespace cmc::nn
