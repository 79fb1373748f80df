#pragma once

#include <string>

#include "dvbf/keyvalue.hpp"
#include "dvbf/model/model.hpp"

namespace dvbf::objective {

using diff::Tensor;
using model::DiagGaussian;

enum class ObjectiveKind { kElbo, kBetaElbo, kGeco };

std::string to_string(ObjectiveKind kind);
// elbo, beta-elbo, geco
ObjectiveKind parse_objective(const std::string& name);

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::kElbo;
  double beta = 1.0;
  double anneal_temp = 1.0;
  double kappa = 3.0;
  double geco_step = 1e-3;
  double geco_decay = 0.99;
  double geco_lambda0 = 1e3;

  void validate() const;
  void store(KeyValues& kv, const std::string& prefix = "objective.") const;
  static ObjectiveConfig load(const KeyValues& kv, const std::string& prefix = "objective.");
  static std::vector<std::string> keys();
};

struct GecoState {
  double lambda = 1.0;
  double constraint_ema = 0.0;
};

// Per-sequence quantities averaged over the batch.
struct ObjectiveReport {
  double elbo = 0.0;
  double recon_nll = 0.0;
  double kl_raw = 0.0;
  double kl_weight = 1.0;
  double lambda = 0.0;
  // GECO: mean over frames of ||x - g(z)||^2 - kappa^2.
  double constraint = 0.0;
  double loss = 0.0;
};

template <typename T>
struct Objective {
  Tensor<T> loss;  // scalar to minimize
  ObjectiveReport report;
};

// 1/2 sum [log(v_p/v_q) + (v_q + (m_q - m_p)^2)/v_p - 1] over every entry.
// Throws DomainError on non-positive variances.
template <typename T>
Tensor<T> kl_diag(const DiagGaussian<T>& q, const DiagGaussian<T>& p);

// 1/2 sum [(x - mean)^2 / var + log var + log 2 pi] over every entry; var is [1].
template <typename T>
Tensor<T> recon_nll(const Tensor<T>& x, const Tensor<T>& mean, const Tensor<T>& var);

// Batch-averaged reconstruction and KL sums of a filtered minibatch.
template <typename T>
struct Terms {
  Tensor<T> nll;
  Tensor<T> kl;
  Tensor<T> decoded;  // image means, time-major like seq.frames
};

template <typename T>
Terms<T> terms(const model::Model<T>& m, const model::FilterOutput<T>& f, const model::SequenceTensors<T>& seq);

template <typename T>
Objective<T> sequential_elbo(const model::Model<T>& m, const model::FilterOutput<T>& f,
                             const model::SequenceTensors<T>& seq);

double anneal_factor(long long iter, double beta, double anneal_temp);

// Loss nll + anneal_factor(iter) * kl.
template <typename T>
Objective<T> beta_elbo(const model::Model<T>& m, const model::FilterOutput<T>& f,
                       const model::SequenceTensors<T>& seq, long long iter, const ObjectiveConfig& cfg);

// obs_dim / latent_dim rounded to the nearest power of two (at least 1).
double suggest_beta(double obs_dim, double latent_dim);

// Loss lambda * mean_t(C_t) + kl with C_t = ||x_t - g(z_t)||^2 - kappa^2 per
// frame. Returns the multiplier after its update; lambda itself is not
// differentiated.
template <typename T>
std::pair<Objective<T>, GecoState> geco_objective(const model::Model<T>& m, const model::FilterOutput<T>& f,
                                                  const model::SequenceTensors<T>& seq, const GecoState& state,
                                                  const ObjectiveConfig& cfg);

// ema <- decay * ema + (1 - decay) * c; lambda <- clamp(lambda * exp(step * ema), 1e-6, 1e6).
GecoState geco_update(const GecoState& state, double mean_constraint, const ObjectiveConfig& cfg);

// Dispatch on cfg.kind; `geco` is read and updated for GECO only.
template <typename T>
Objective<T> compute_objective(const model::Model<T>& m, const model::FilterOutput<T>& f,
                               const model::SequenceTensors<T>& seq, long long iter, const ObjectiveConfig& cfg,
                               GecoState& geco);

std::string csv_header();
std::string csv_row(long long iter, const ObjectiveReport& r);

}  // namespace dvbf::objective
