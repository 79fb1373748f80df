#pragma once

#include <random>
#include <vector>

#include "dvbf/model/config.hpp"
#include "dvbf/model/gaussian.hpp"
#include "dvbf/model/params.hpp"

namespace dvbf::model {

// Mean network of a transition p(z'|z,u), shareable between prior and
// posterior. features() feeds the variance head attached by each owner.
template <typename T>
struct TransitionNet {
  TransitionKind kind = TransitionKind::kMlp;
  std::size_t latent_dim = 0, control_dim = 0;
  Dense<T> hidden;  // MLP: sigmoid layer. LL / SLDS: relu layer of the hypernet / mixing net.
  Dense<T> head;    // MLP: mean. LL: flattened [A | B | c]. SLDS: mixing logits.
  Tensor<T> bases;  // SLDS only: [K x (n_z * (n_z + n_u + 1))], row k = [A_k | B_k | c_k].

  struct Output {
    Tensor<T> mean;
    Tensor<T> features;
    Tensor<T> mixing;  // SLDS weights alpha, [N x K]
  };
  Output operator()(const Tensor<T>& z, const Tensor<T>& u) const;
  std::size_t feature_dim() const;
};

template <typename T>
struct Transition {
  TransitionNet<T> net;
  Dense<T> variance;
  T floor{};
  DiagGaussian<T> operator()(const Tensor<T>& z, const Tensor<T>& u) const;
  DiagGaussian<T> from(const typename TransitionNet<T>::Output& out) const;
};

// A minibatch laid out time-major: row t * batch + b.
template <typename T>
struct SequenceTensors {
  std::size_t batch = 0, steps = 0;
  Tensor<T> frames;    // [steps*batch x obs_dim]
  Tensor<T> controls;  // [(steps-1)*batch x control_dim], undefined when steps == 1
  Tensor<T> frame(std::size_t t) const { return diff::slice_rows(frames, t * batch, (t + 1) * batch); }
  Tensor<T> control(std::size_t t) const {
    return diff::slice_rows(controls, t * batch, (t + 1) * batch);
  }
};

template <typename T>
struct FilterOutput {
  std::size_t batch = 0, steps = 0;
  std::vector<Tensor<T>> latents;             // z_t, [batch x n_z]
  std::vector<DiagGaussian<T>> posteriors;     // q(z_t | ...)
  std::vector<DiagGaussian<T>> priors;         // [0] is N(0, I), then p(z_t | z_{t-1}, u_{t-1})
  std::vector<DiagGaussian<T>> measurements;   // inverse measurement, t >= 1 (fused models only)
  std::vector<DiagGaussian<T>> transitions;    // posterior transition factor, t >= 1
  Tensor<T> all_latents() const { return diff::concat_rows(latents); }
};

template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }

  // x: [N x obs_dim]. Shared convolutional trunk, [N x encoder_hidden].
  Tensor<T> features(const Tensor<T>& x) const;
  DiagGaussian<T> initial_net(const Tensor<T>& x) const;
  DiagGaussian<T> inverse_measurement(const Tensor<T>& x) const;
  DiagGaussian<T> prior_transition(const Tensor<T>& z, const Tensor<T>& u) const;
  DiagGaussian<T> posterior_transition(const Tensor<T>& z, const Tensor<T>& u) const;
  // Joint posterior of the Deep-Kalman-Filter variant.
  DiagGaussian<T> joint_posterior(const Tensor<T>& features, const Tensor<T>& z, const Tensor<T>& u) const;

  // [N x n_z] -> image means [N x obs_dim].
  Tensor<T> decode(const Tensor<T>& z) const;
  // exp(log-variance), shape [1].
  Tensor<T> emission_variance() const;

  // q(z_{t+1} | z_t, u_t, x_{t+1}) for online filtering.
  DiagGaussian<T> filter_step(const Tensor<T>& z, const Tensor<T>& u, const Tensor<T>& x) const;

  // Samples z_t by reparameterization; rng == nullptr means zero noise.
  FilterOutput<T> filter(const SequenceTensors<T>& seq, std::mt19937_64* rng) const;

  // Decoded image means of z_1 .. z_n with z_{t+1} drawn from the prior
  // transition. controls: [(>= n-1)*batch x n_u] time-major.
  std::vector<Tensor<T>> generate(const Tensor<T>& z1, const Tensor<T>& controls, std::size_t n_steps,
                                  std::mt19937_64* rng) const;
  // z_1 drawn from initial_net(x_1).
  std::vector<Tensor<T>> generate_from_frame(const Tensor<T>& x1, const Tensor<T>& controls,
                                             std::size_t n_steps, std::mt19937_64* rng) const;

  const Transition<T>& prior() const { return prior_; }
  const Transition<T>& posterior() const { return posterior_; }

 private:
  ModelConfig cfg_;
  ParamSet<T> params_;
  std::vector<Conv<T>> encoder_convs_;
  Dense<T> encoder_dense_;
  Dense<T> initial_mean_, initial_var_;
  Dense<T> measure_mean_, measure_var_;
  Dense<T> joint_hidden_, joint_mean_, joint_var_;
  Transition<T> prior_, posterior_;
  Dense<T> decoder_hidden_, decoder_bottleneck_;
  std::vector<ConvT<T>> decoder_convs_;
  Dense<T> decoder_out_;
  Tensor<T> logvar_;
  std::size_t decoder_side_h_ = 1, decoder_side_w_ = 1;
};

// Zero-mean unit-variance noise of the given shape, or zeros without an rng.
template <typename T>
Tensor<T> draw_noise(diff::Shape shape, std::mt19937_64* rng);

}  // namespace dvbf::model
