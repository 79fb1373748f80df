#pragma once

#include <random>

#include "dvbf/model/model.hpp"

namespace dvbf::testing {

// 4x4 single-channel images, 4 latents: small enough for exhaustive
// finite differences.
inline model::ModelConfig toy_config(model::TransitionKind kind = model::TransitionKind::kMlp) {
  model::ModelConfig c;
  c.height = c.width = 4;
  c.latent_dim = 4;
  c.control_dim = 1;
  c.encoder_filters = {2, 3};
  c.encoder_hidden = 6;
  c.decoder_hidden = 5;
  c.decoder_bottleneck = 3;
  c.decoder_filters = {2, 1};
  c.transition = kind;
  c.transition_hidden = 5;
  c.hyper_hidden = 4;
  c.slds_bases = 2;
  c.init_seed = 11;
  return c;
}

template <typename T>
model::SequenceTensors<T> random_sequences(const model::ModelConfig& c, std::size_t batch, std::size_t steps,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pix(0.0, 1.0), ctl(-1.0, 1.0);
  model::SequenceTensors<T> s;
  s.batch = batch;
  s.steps = steps;
  s.frames = diff::Tensor<T>({steps * batch, c.obs_dim()});
  for (auto& v : s.frames.values()) v = static_cast<T>(pix(rng));
  if (steps > 1) {
    s.controls = diff::Tensor<T>({(steps - 1) * batch, c.control_dim});
    for (auto& v : s.controls.values()) v = static_cast<T>(ctl(rng));
  }
  return s;
}

}  // namespace dvbf::testing
