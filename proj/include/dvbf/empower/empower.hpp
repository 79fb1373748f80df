#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dvbf/env/environment.hpp"
#include "dvbf/image.hpp"
#include "dvbf/keyvalue.hpp"
#include "dvbf/model/checkpoint.hpp"
#include "dvbf/model/model.hpp"

namespace dvbf::empower {

using diff::Tensor;
using model::DiagGaussian;

// Elementwise log N(a; mean, variance), same shape as a.
template <typename T>
Tensor<T> gaussian_log_density(const DiagGaussian<T>& d, const Tensor<T>& a);

// Row sums of the log density of u = bound * tanh(a), including the
// squashing Jacobian. Evaluation only.
template <typename T>
std::vector<double> squashed_log_density(const DiagGaussian<T>& d, const Tensor<T>& a, double bound);

struct EmpowerConfig {
  std::size_t horizon = 7;  // open-loop steps k
  std::size_t hidden = 128;
  std::size_t batch = 128;
  std::size_t samples = 4;  // action samples per latent
  long long iterations = 5000;
  double learning_rate = 1e-3;
  double grad_clip = 10.0;
  double variance_floor = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
  void store(KeyValues& kv, const std::string& prefix = "empower.") const;
  static EmpowerConfig load(const KeyValues& kv, const std::string& prefix = "empower.");
  static std::vector<std::string> keys();
};

// Source omega(a | z) and planning q(a | z, z') distributions over the
// pre-squash k-step action a in R^{k n_u}; controls are bound * tanh(a).
template <typename T>
class EmpowermentNets {
 public:
  EmpowermentNets(std::size_t latent_dim, std::size_t control_dim, double control_bound, const EmpowerConfig& cfg);

  DiagGaussian<T> source(const Tensor<T>& z) const;
  DiagGaussian<T> planner(const Tensor<T>& z, const Tensor<T>& z_next) const;
  // First control of the source mean, [N x n_u].
  Tensor<T> act(const Tensor<T>& z) const;

  model::ParamSet<T>& params() { return params_; }
  const model::ParamSet<T>& params() const { return params_; }
  std::size_t latent_dim() const { return latent_dim_; }
  std::size_t control_dim() const { return control_dim_; }
  std::size_t horizon() const { return horizon_; }
  double control_bound() const { return bound_; }
  const EmpowerConfig& config() const { return cfg_; }

 private:
  std::size_t latent_dim_, control_dim_, horizon_;
  double bound_;
  EmpowerConfig cfg_;
  model::ParamSet<T> params_;
  model::Dense<T> source_hidden_, source_mean_, source_var_;
  model::Dense<T> planner_hidden_, planner_mean_, planner_var_;
};

// Differentiable latent transition used for the k-step rollout.
template <typename T>
using Dynamics = std::function<DiagGaussian<T>(const Tensor<T>& z, const Tensor<T>& u)>;

template <typename T>
Dynamics<T> prior_dynamics(const model::Model<T>& m);

// Samples a ~ omega(.|z) n_samples times per row of z, rolls z' through the
// dynamics k steps with reparameterized noise, and returns the elementwise
// log q(a|z,z') - log omega(a|z) terms, [N*n_samples x k n_u]. The squashing
// Jacobian appears in both densities and cancels.
template <typename T>
Tensor<T> bound_terms(const EmpowermentNets<T>& nets, const Dynamics<T>& dyn, const Tensor<T>& z,
                      std::size_t n_samples, std::mt19937_64& rng);

// Monte-Carlo estimate of E(z) for each row of z (evaluation only).
template <typename T>
std::vector<double> empowerment_bound(const EmpowermentNets<T>& nets, const Dynamics<T>& dyn, const Tensor<T>& z,
                                      std::size_t n_samples, std::mt19937_64& rng);

// Mean entropy of omega in the pre-squash space.
template <typename T>
double source_entropy(const EmpowermentNets<T>& nets, const Tensor<T>& z);

struct EmpowerReport {
  double bound = 0.0;
  double entropy = 0.0;
};

// Ascends the bound jointly in omega and q, drawing latents uniformly from
// the rows of z_pool ([n x n_z]). Throws NumericError on a non-finite bound
// or gradient.
template <typename T>
std::vector<EmpowerReport> train_empowerment(EmpowermentNets<T>& nets, const Dynamics<T>& dyn,
                                             const Tensor<T>& z_pool, const EmpowerConfig& cfg);

// Empowerment nets and their configuration in the checkpoint container.
model::Checkpoint nets_checkpoint(const EmpowermentNets<float>& nets);
EmpowermentNets<float> load_nets(const model::Checkpoint& ckpt);

// Latent of a ball at rest at (x, y): mean of the first filtering step.
Tensor<float> ball_latents(const model::Model<float>& m, const env::BallConfig& ball,
                           const std::vector<std::pair<double, double>>& positions);

struct EmpowerMap {
  std::size_t cells = 0;
  std::vector<double> values;  // row-major, row = y cell, column = x cell
  std::vector<double> centres;  // cell centre coordinates along each axis

  double at(std::size_t row, std::size_t col) const { return values[row * cells + col]; }
  // Mean over cells touching the border versus all other cells.
  double edge_mean() const;
  double interior_mean() const;
  std::string to_text() const;
  GrayImage heat_image() const;
};

// Grid of cells x cells ball positions spanning the reachable area.
EmpowerMap empowerment_map(const EmpowermentNets<float>& nets, const model::Model<float>& m,
                           const env::BallConfig& ball, std::size_t cells, std::size_t n_samples,
                           std::uint64_t seed);

enum class RolloutPolicy { kEmpowerment, kRandom };

struct RolloutPoint {
  std::size_t agent = 0, step = 0;
  double x = 0.0, y = 0.0;
};

// n_agents balls from random initial states; each step applies the first
// control of the source mean at the filtered latent (or a uniform random
// control), steps the true environment and filters the new frame.
std::vector<RolloutPoint> empowerment_rollout(const EmpowermentNets<float>& nets, const model::Model<float>& m,
                                              const env::BallEnv& ball, std::size_t n_agents, std::size_t steps,
                                              std::uint64_t seed, RolloutPolicy policy = RolloutPolicy::kEmpowerment);

std::string rollout_csv(const std::vector<RolloutPoint>& points);

// Mean distance to the nearest wall of the agents' last positions.
double terminal_wall_distance(const std::vector<RolloutPoint>& points, const env::BallConfig& ball);

}  // namespace dvbf::empower
