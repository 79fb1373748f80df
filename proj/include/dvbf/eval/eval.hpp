#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dvbf/env/dataset.hpp"
#include "dvbf/image.hpp"
#include "dvbf/keyvalue.hpp"
#include "dvbf/model/model.hpp"

namespace dvbf::eval {

struct Correlation {
  double r = 0.0;          // best |Pearson r|
  std::size_t latent = 0;  // latent dimension attaining it
};

// Rows are samples: latents [n x latent_dim], truths [n x truth_dim]. For
// each truth channel, the max over latent dimensions of |r|; constant
// columns score 0. Throws ContractError when n < 2.
std::vector<Correlation> latent_correlation(std::span<const double> latents, std::size_t latent_dim,
                                            std::span<const double> truths, std::size_t truth_dim);

// Zero-noise filtered posterior means of every sequence, rows (seq, t).
template <typename T>
std::vector<double> filtered_means(const model::Model<T>& m, const env::SequenceBatch& data);

struct MseEntry {
  std::size_t horizon = 0;
  double per_pixel = 0.0;
  double per_image = 0.0;  // per_pixel * obs_dim
};

// Every horizon is scored on the same targets x_tau, tau in [H, T) with H
// the largest horizon: filter to tau - h, roll the prior mean h steps under
// the true controls, decode. Throws ContractError for h == 0 or h >= T.
template <typename T>
std::vector<MseEntry> nstep_mse(const model::Model<T>& m, const env::SequenceBatch& data,
                                const std::vector<std::size_t>& horizons);

// Mean image and per-pixel variance around it over frames [first, T) of all
// sequences; the score of a decoder that always emits that mean image.
struct PixelStats {
  std::vector<double> mean_image;
  double variance = 0.0;
};
PixelStats pixel_stats(const env::SequenceBatch& data, std::size_t first);

// Generated / reconstructed / original rows of every second frame of one
// sequence. Generation starts from the filtered z_1 and follows the prior
// mean; reconstruction decodes the filtered means.
template <typename T>
GrayImage strip_image(const model::Model<T>& m, const env::SequenceBatch& data, std::size_t seq);

struct MetricsRecord {
  double elbo = 0.0, kl = 0.0, nll = 0.0;  // per-sequence means
  std::vector<std::string> channels;
  std::vector<Correlation> corr;
  bool has_angle_trig = false;
  Correlation angle_trig;  // best over sin(psi) and cos(psi)
  std::vector<MseEntry> mse;
  KeyValues meta;

  const Correlation& channel(const std::string& name) const;
  KeyValues to_keyvalues() const;
  static MetricsRecord from_keyvalues(const KeyValues& kv);
};

inline const std::vector<std::size_t> kDefaultHorizons{1, 5, 10};

// Names of the ground-truth state channels of an environment.
std::vector<std::string> state_channels(const std::string& env_name, std::size_t state_dim);
std::string infer_env(std::size_t state_dim);

struct EvalConfig {
  std::vector<std::size_t> horizons = kDefaultHorizons;
  std::uint64_t seed = 0;  // noise for the ELBO estimate
  // pendulum or ball; empty infers it from the state dimension.
  std::string env_name;
};

// All metrics on `heldout`. The environment selects channel names and the
// pendulum's trigonometric angle variant.
MetricsRecord evaluate(const model::Model<float>& m, const env::SequenceBatch& heldout, const EvalConfig& cfg = {});

struct EvalOutputs {
  MetricsRecord record;
  std::filesystem::path metrics;
  std::filesystem::path strips;
};

// Loads the checkpoint and dataset, evaluates on the held-out split and
// writes <out_dir>/metrics.txt and <out_dir>/strips.pgm.
EvalOutputs evaluate_files(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                           const std::filesystem::path& out_dir, const EvalConfig& cfg = {});

}  // namespace dvbf::eval
