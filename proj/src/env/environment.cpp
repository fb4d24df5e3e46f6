#include "cmc/env/environment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cmc::env {

std::string to_string(RewardMode m) { return m == RewardMode::dense ? "dense" : "sparse"; }

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::none: return "none";
    case Outcome::success: return "success";
    case Outcome::topple: return "topple";
    case Outcome::timeout: return "timeout";
  }
  return "?";
}

RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "dense") return RewardMode::dense;
  if (s == "sparse") return RewardMode::sparse;
  throw std::invalid_argument("unknown reward mode '" + s + "' (expected dense or sparse)");
}

void EnvConfig::validate() const {
  if (image_height < 8) throw std::invalid_argument("image_height must be >= 8");
  if (image_width < 8) throw std::invalid_argument("image_width must be >= 8");
  if (channels < 1) throw std::invalid_argument("channels must be positive");
  if (episode_length < 1) throw std::invalid_argument("episode_length must be >= 1");
  if (!(max_step > 0.0) || !std::isfinite(max_step)) throw std::invalid_argument("max_step must be positive");
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

TraceWriter::TraceWriter(const std::filesystem::path& path) : out_(std::make_unique<std::ofstream>(path)) {
  if (!*out_) throw std::runtime_error("cannot write trace " + path.string());
}

void TraceWriter::record(std::size_t t, std::span<const double> action, double reward_ext, Outcome outcome,
                         const nlohmann::json& state) {
  nlohmann::json rec{{"t", t},
                     {"action", std::vector<double>(action.begin(), action.end())},
                     {"reward_ext", reward_ext},
                     {"outcome", to_string(outcome)},
                     {"state", state}};
  *out_ << rec.dump() << '\n';
}

void write_ppm(const Observation& obs, const std::filesystem::path& path) {
  if (obs.rank() != 3 || (obs.shape()[2] != 1 && obs.shape()[2] != 3))
    throw std::invalid_argument("write_ppm expects [H,W,1] or [H,W,3], got " + nn::to_string(obs.shape()));
  const std::size_t h = obs.shape()[0], w = obs.shape()[1], c = obs.shape()[2];
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P6\n" << w << ' ' << h << "\n255\n";
  for (std::size_t i = 0; i < h * w; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      const double v = obs[i * c + (c == 1 ? 0 : k)];
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    }
}

}  // namespace cmc::env
