#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dvbf/keyvalue.hpp"

namespace dvbf::model {

enum class TransitionKind { kMlp, kLocallyLinear, kSlds };

std::string to_string(TransitionKind kind);
// Accepts mlp, locally-linear, slds. Throws ContractError otherwise.
TransitionKind parse_transition(const std::string& name);

struct ModelConfig {
  std::size_t channels = 1;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t latent_dim = 64;
  std::size_t control_dim = 1;

  std::vector<std::size_t> encoder_filters{4, 8, 16, 64};
  std::size_t encoder_hidden = 256;
  std::size_t decoder_hidden = 256;
  std::size_t decoder_bottleneck = 64;
  std::vector<std::size_t> decoder_filters{16, 8, 4, 1};

  TransitionKind transition = TransitionKind::kMlp;
  std::size_t transition_hidden = 256;
  // Hidden width of the locally-linear hypernetwork and of the SLDS mixing net.
  std::size_t hyper_hidden = 128;
  std::size_t slds_bases = 8;
  // Prior and posterior transitions share the mean network.
  bool shared_mean = false;
  // Deep-Kalman-Filter style posterior: one network on (x_t, z_{t-1}, u_{t-1}),
  // no fusion with a transition factor.
  bool joint_posterior = false;

  double variance_floor = 1e-4;
  // Emission log-variance at initialization, about log(0.01).
  double initial_logvar = -4.6;
  std::uint64_t init_seed = 1;

  std::size_t obs_dim() const { return channels * height * width; }
  void validate() const;

  void store(KeyValues& kv, const std::string& prefix = "model.") const;
  // Missing keys keep their defaults.
  static ModelConfig load(const KeyValues& kv, const std::string& prefix = "model.");
  // Names accepted by load/store under the prefix, for unknown-key checks.
  static std::vector<std::string> keys();
};

// Table-1 style presets sized for an environment ("pendulum" or "ball").
// names: dvbf-non-shared, dvbf-slds, deep-kalman-filter.
ModelConfig preset(const std::string& name, const std::string& env, std::size_t image_size);

std::string join_sizes(const std::vector<std::size_t>& v);
std::vector<std::size_t> parse_sizes(const std::string& s);

}  // namespace dvbf::model
