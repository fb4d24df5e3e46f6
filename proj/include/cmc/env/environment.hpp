#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>

#include "json.hpp"

#include "cmc/nn/tensor.hpp"

namespace cmc::env {

/// Pixel image [H, W, C] with values in [0, 1], quantised to multiples of 1/255.
using Observation = nn::Tensor;

enum class RewardMode { dense, sparse };
enum class Outcome { none, success, topple, timeout };

std::string to_string(RewardMode m);
std::string to_string(Outcome o);
RewardMode reward_mode_from_string(const std::string& s);

struct EnvConfig {
  std::size_t image_height = 32;
  std::size_t image_width = 32;
  std::size_t channels = 3;
  RewardMode reward_mode = RewardMode::sparse;
  std::size_t episode_length = 30;
  double max_step = 20.0;  // degrees per unit action
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct StepInfo {
  double distance = 0.0;
  Outcome outcome = Outcome::none;
};

struct StepResult {
  Observation observation;
  double reward_ext = 0.0;
  bool done = false;
  StepInfo info;
};

class Environment {
 public:
  virtual ~Environment() = default;

  /// Starts episode `episode_index`; the initial state is a pure function of (config seed, index).
  virtual Observation reset(std::uint64_t episode_index) = 0;
  /// Components outside [-1, 1] are clipped. Calling step on a finished episode throws.
  virtual StepResult step(std::span<const double> action) = 0;

  virtual std::size_t action_dim() const = 0;
  virtual const EnvConfig& config() const = 0;
  virtual std::size_t step_index() const = 0;
  virtual bool episode_done() const = 0;
  virtual Observation render() const = 0;
  virtual nlohmann::json state_summary() const = 0;
  virtual std::string name() const = 0;
};

/// Mixes a base seed with a stream index (splitmix64 finaliser).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream);

/// Newline-delimited JSON episode trace: {t, action, reward_ext, outcome, state}.
class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path);
  void record(std::size_t t, std::span<const double> action, double reward_ext, Outcome outcome,
              const nlohmann::json& state);

 private:
  std::unique_ptr<std::ofstream> out_;
};

/// Binary PPM (P6) of an observation with 1 or 3 channels.
void write_ppm(const Observation& obs, const std::filesystem::path& path);

}  // namespace cmc::env
