#include "dvbf/model/model.hpp"

#include <algorithm>

#include "dvbf/errors.hpp"

namespace dvbf::model {

using namespace diff;

template <typename T>
DiagGaussian<T> fuse(const DiagGaussian<T>& a, const DiagGaussian<T>& b) {
  if (a.mean.shape() != b.mean.shape() || a.variance.shape() != a.mean.shape() ||
      b.variance.shape() != b.mean.shape()) {
    throw DimensionError("fuse: factor shapes " + diff::to_string(a.mean.shape()) + " and " +
                         diff::to_string(b.mean.shape()) + " differ");
  }
  for (const auto* v : {&a.variance, &b.variance}) {
    for (T x : v->values())
      if (!(x > T{0})) throw DomainError("fuse: variances must be positive");
  }
  const auto one = Tensor<T>::scalar(T{1});
  const auto pa = div(one, a.variance);
  const auto pb = div(one, b.variance);
  const auto var = div(one, add(pa, pb));
  const auto mean = mul(var, add(mul(a.mean, pa), mul(b.mean, pb)));
  return {mean, var};
}

template <typename T>
Tensor<T> draw_noise(Shape shape, std::mt19937_64* rng) {
  Tensor<T> t(std::move(shape));
  if (rng != nullptr) {
    std::normal_distribution<double> normal;
    for (auto& v : t.values()) v = static_cast<T>(normal(*rng));
  }
  return t;
}

namespace {

template <typename T>
Tensor<T> with_ones(const Tensor<T>& z, const Tensor<T>& u) {
  return concat_cols(std::vector<Tensor<T>>{z, u, Tensor<T>::filled({z.dim(0), 1}, T{1})});
}

template <typename T>
TransitionNet<T> make_transition_net(ParamSet<T>& params, const std::string& prefix, const ModelConfig& cfg,
                                     std::mt19937_64& rng) {
  TransitionNet<T> net;
  net.kind = cfg.transition;
  net.latent_dim = cfg.latent_dim;
  net.control_dim = cfg.control_dim;
  const std::size_t nz = cfg.latent_dim, nu = cfg.control_dim;
  const std::size_t cols = nz + nu + 1;
  switch (cfg.transition) {
    case TransitionKind::kMlp:
      net.hidden = make_dense(params, prefix + "hidden", nz + nu, cfg.transition_hidden, rng);
      net.head = make_dense(params, prefix + "mean", cfg.transition_hidden, nz, rng);
      break;
    case TransitionKind::kLocallyLinear: {
      net.hidden = make_dense(params, prefix + "hyper", nz + nu, cfg.hyper_hidden, rng);
      net.head = make_dense(params, prefix + "matrices", cfg.hyper_hidden, nz * cols, rng, 0.1);
      // Start near the identity map.
      for (std::size_t i = 0; i < nz; ++i) net.head.b[i * cols + i] = T{1};
      break;
    }
    case TransitionKind::kSlds: {
      net.hidden = make_dense(params, prefix + "mixing_hidden", nz + nu, cfg.hyper_hidden, rng);
      net.head = make_dense(params, prefix + "mixing", cfg.hyper_hidden, cfg.slds_bases, rng);
      std::uniform_real_distribution<double> jitter(-0.01, 0.01);
      Tensor<T> bases({cfg.slds_bases, nz * cols});
      for (std::size_t k = 0; k < cfg.slds_bases; ++k)
        for (std::size_t i = 0; i < nz * cols; ++i) {
          const bool diagonal = i / cols == i % cols;
          bases[k * nz * cols + i] = static_cast<T>((diagonal ? 1.0 : 0.0) + jitter(rng));
        }
      net.bases = params.add(prefix + "bases", bases);
      break;
    }
  }
  return net;
}

}  // namespace

template <typename T>
typename TransitionNet<T>::Output TransitionNet<T>::operator()(const Tensor<T>& z, const Tensor<T>& u) const {
  if (z.rank() != 2 || z.dim(1) != latent_dim || u.rank() != 2 || u.dim(1) != control_dim ||
      u.dim(0) != z.dim(0)) {
    throw DimensionError("transition: expected z [N x " + std::to_string(latent_dim) + "] and u [N x " +
                         std::to_string(control_dim) + "], got " + diff::to_string(z.shape()) + " and " +
                         diff::to_string(u.shape()));
  }
  const auto zu = concat_cols(std::vector<Tensor<T>>{z, u});
  Output out;
  switch (kind) {
    case TransitionKind::kMlp: {
      out.features = sigmoid(hidden(zu));
      out.mean = head(out.features);
      break;
    }
    case TransitionKind::kLocallyLinear: {
      const auto matrices = head(relu(hidden(zu)));
      out.mean = batched_matvec(matrices, with_ones(z, u));
      out.features = zu;
      break;
    }
    case TransitionKind::kSlds: {
      out.mixing = softmax_rows(head(relu(hidden(zu))));
      out.mean = batched_matvec(matmul(out.mixing, bases), with_ones(z, u));
      out.features = zu;
      break;
    }
  }
  return out;
}

template <typename T>
std::size_t TransitionNet<T>::feature_dim() const {
  return kind == TransitionKind::kMlp ? hidden.out() : latent_dim + control_dim;
}

template <typename T>
DiagGaussian<T> Transition<T>::from(const typename TransitionNet<T>::Output& out) const {
  return {out.mean, positive_variance(variance(out.features), floor)};
}

template <typename T>
DiagGaussian<T> Transition<T>::operator()(const Tensor<T>& z, const Tensor<T>& u) const {
  return from(net(z, u));
}

template <typename T>
Model<T>::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.init_seed);
  const T floor = static_cast<T>(cfg_.variance_floor);
  const std::size_t nz = cfg_.latent_dim;

  // Encoder trunk shared by the initial network and the inverse measurement.
  std::size_t in = cfg_.channels, h = cfg_.height, w = cfg_.width;
  for (std::size_t i = 0; i < cfg_.encoder_filters.size(); ++i) {
    encoder_convs_.push_back(make_conv(params_, "phi_e.conv" + std::to_string(i), in, cfg_.encoder_filters[i], 2, rng));
    in = cfg_.encoder_filters[i];
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  encoder_dense_ = make_dense(params_, "phi_e.dense", in * h * w, cfg_.encoder_hidden, rng);
  const std::size_t feat = cfg_.encoder_hidden;

  initial_mean_ = make_dense(params_, "theta0.mean", feat, nz, rng);
  initial_var_ = make_dense(params_, "theta0.var", feat, nz, rng);

  prior_.net = make_transition_net(params_, "theta_t.", cfg_, rng);
  prior_.variance = make_dense(params_, "theta_t.var", prior_.net.feature_dim(), nz, rng);
  prior_.floor = floor;

  if (cfg_.joint_posterior) {
    joint_hidden_ = make_dense(params_, "phi_t.joint_hidden", feat + nz + cfg_.control_dim, cfg_.encoder_hidden, rng);
    joint_mean_ = make_dense(params_, "phi_t.joint_mean", cfg_.encoder_hidden, nz, rng);
    joint_var_ = make_dense(params_, "phi_t.joint_var", cfg_.encoder_hidden, nz, rng);
  } else {
    measure_mean_ = make_dense(params_, "phi_e.mean", feat, nz, rng);
    measure_var_ = make_dense(params_, "phi_e.var", feat, nz, rng);
    posterior_.net = cfg_.shared_mean ? prior_.net : make_transition_net(params_, "phi_t.", cfg_, rng);
    posterior_.variance = make_dense(params_, "phi_t.var", posterior_.net.feature_dim(), nz, rng);
    posterior_.floor = floor;
  }

  decoder_hidden_ = make_dense(params_, "theta_e.hidden", nz, cfg_.decoder_hidden, rng);
  decoder_bottleneck_ = make_dense(params_, "theta_e.bottleneck", cfg_.decoder_hidden, cfg_.decoder_bottleneck, rng);
  const std::size_t up = std::size_t{1} << cfg_.decoder_filters.size();
  decoder_side_h_ = cfg_.height / up;
  decoder_side_w_ = cfg_.width / up;
  in = cfg_.decoder_bottleneck / (decoder_side_h_ * decoder_side_w_);
  for (std::size_t i = 0; i < cfg_.decoder_filters.size(); ++i) {
    decoder_convs_.push_back(
        make_conv_transpose(params_, "theta_e.tconv" + std::to_string(i), in, cfg_.decoder_filters[i], 2, rng));
    in = cfg_.decoder_filters[i];
  }
  decoder_out_ = make_dense(params_, "theta_e.out", cfg_.obs_dim(), cfg_.obs_dim(), rng);
  logvar_ = params_.add("theta_e.logvar", Tensor<T>::scalar(static_cast<T>(cfg_.initial_logvar)));
}

template <typename T>
Tensor<T> Model<T>::features(const Tensor<T>& x) const {
  if (x.rank() != 2 || x.dim(1) != cfg_.obs_dim()) {
    throw DimensionError("encoder: expected [N x " + std::to_string(cfg_.obs_dim()) + "] images, got " +
                         diff::to_string(x.shape()));
  }
  const std::size_t n = x.dim(0);
  auto y = reshape(x, {n, cfg_.channels, cfg_.height, cfg_.width});
  for (const auto& conv : encoder_convs_) y = relu(conv(y));
  return relu(encoder_dense_(reshape(y, {n, y.numel() / n})));
}

template <typename T>
DiagGaussian<T> Model<T>::initial_net(const Tensor<T>& x) const {
  const auto f = features(x);
  return {initial_mean_(f), positive_variance(initial_var_(f), prior_.floor)};
}

template <typename T>
DiagGaussian<T> Model<T>::inverse_measurement(const Tensor<T>& x) const {
  if (cfg_.joint_posterior) throw ContractError("inverse_measurement: model uses a joint posterior");
  const auto f = features(x);
  return {measure_mean_(f), positive_variance(measure_var_(f), prior_.floor)};
}

template <typename T>
DiagGaussian<T> Model<T>::prior_transition(const Tensor<T>& z, const Tensor<T>& u) const {
  return prior_(z, u);
}

template <typename T>
DiagGaussian<T> Model<T>::posterior_transition(const Tensor<T>& z, const Tensor<T>& u) const {
  if (cfg_.joint_posterior) throw ContractError("posterior_transition: model uses a joint posterior");
  return posterior_(z, u);
}

template <typename T>
DiagGaussian<T> Model<T>::joint_posterior(const Tensor<T>& f, const Tensor<T>& z, const Tensor<T>& u) const {
  if (!cfg_.joint_posterior) throw ContractError("joint_posterior: model uses a fused posterior");
  const auto h = relu(joint_hidden_(concat_cols(std::vector<Tensor<T>>{f, z, u})));
  return {joint_mean_(h), positive_variance(joint_var_(h), prior_.floor)};
}

template <typename T>
Tensor<T> Model<T>::decode(const Tensor<T>& z) const {
  if (z.rank() != 2 || z.dim(1) != cfg_.latent_dim) {
    throw DimensionError("decode: expected [N x " + std::to_string(cfg_.latent_dim) + "], got " +
                         diff::to_string(z.shape()));
  }
  const std::size_t n = z.dim(0);
  auto b = decoder_bottleneck_(relu(decoder_hidden_(z)));
  auto y = reshape(b, {n, cfg_.decoder_bottleneck / (decoder_side_h_ * decoder_side_w_), decoder_side_h_,
                       decoder_side_w_});
  for (std::size_t i = 0; i < decoder_convs_.size(); ++i) {
    y = decoder_convs_[i](y);
    if (i + 1 < decoder_convs_.size()) y = relu(y);
  }
  return decoder_out_(reshape(y, {n, cfg_.obs_dim()}));
}

template <typename T>
Tensor<T> Model<T>::emission_variance() const {
  return diff::exp(logvar_);
}

template <typename T>
DiagGaussian<T> Model<T>::filter_step(const Tensor<T>& z, const Tensor<T>& u, const Tensor<T>& x) const {
  const auto feats = features(x);
  if (cfg_.joint_posterior) return joint_posterior(feats, z, u);
  const DiagGaussian<T> meas{measure_mean_(feats), positive_variance(measure_var_(feats), prior_.floor)};
  return fuse(meas, posterior_(z, u));
}

template <typename T>
FilterOutput<T> Model<T>::filter(const SequenceTensors<T>& seq, std::mt19937_64* rng) const {
  const std::size_t b = seq.batch, steps = seq.steps, nz = cfg_.latent_dim;
  if (b == 0 || steps == 0 || seq.frames.dim(0) != b * steps) {
    throw DimensionError("filter: frames " + diff::to_string(seq.frames.shape()) + " do not hold " +
                         std::to_string(steps) + " steps of " + std::to_string(b) + " sequences");
  }
  if (steps > 1 && (!seq.controls.defined() || seq.controls.dim(0) < (steps - 1) * b)) {
    throw ContractError("filter: need " + std::to_string(steps - 1) + " control steps");
  }
  FilterOutput<T> out;
  out.batch = b;
  out.steps = steps;

  const auto feats = features(seq.frames);
  const auto f1 = slice_rows(feats, 0, b);
  DiagGaussian<T> q1{initial_mean_(f1), positive_variance(initial_var_(f1), prior_.floor)};
  out.priors.push_back(standard_normal<T>({b, nz}));
  out.posteriors.push_back(q1);
  out.measurements.emplace_back();
  out.transitions.emplace_back();
  auto z = sample_reparam(q1.mean, q1.variance, draw_noise<T>({b, nz}, rng));
  out.latents.push_back(z);
  if (steps == 1) return out;

  // Every inverse measurement in one pass.
  DiagGaussian<T> meas_all;
  if (!cfg_.joint_posterior) {
    const auto rest = slice_rows(feats, b, steps * b);
    meas_all = {measure_mean_(rest), positive_variance(measure_var_(rest), prior_.floor)};
  }

  for (std::size_t t = 1; t < steps; ++t) {
    const auto u = seq.control(t - 1);
    DiagGaussian<T> prior, post;
    if (cfg_.joint_posterior) {
      prior = prior_(z, u);
      post = joint_posterior(slice_rows(feats, t * b, (t + 1) * b), z, u);
      out.measurements.emplace_back();
      out.transitions.emplace_back();
    } else {
      DiagGaussian<T> trans;
      if (cfg_.shared_mean) {
        const auto o = prior_.net(z, u);
        prior = prior_.from(o);
        trans = posterior_.from(o);
      } else {
        prior = prior_(z, u);
        trans = posterior_(z, u);
      }
      DiagGaussian<T> meas{slice_rows(meas_all.mean, (t - 1) * b, t * b),
                           slice_rows(meas_all.variance, (t - 1) * b, t * b)};
      post = fuse(meas, trans);
      out.measurements.push_back(meas);
      out.transitions.push_back(trans);
    }
    z = sample_reparam(post.mean, post.variance, draw_noise<T>({b, nz}, rng));
    out.priors.push_back(prior);
    out.posteriors.push_back(post);
    out.latents.push_back(z);
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> Model<T>::generate(const Tensor<T>& z1, const Tensor<T>& controls, std::size_t n_steps,
                                          std::mt19937_64* rng) const {
  if (n_steps == 0) throw ContractError("generate: n_steps must be positive");
  const std::size_t b = z1.dim(0);
  if (n_steps > 1 && (!controls.defined() || controls.dim(0) < (n_steps - 1) * b)) {
    throw ContractError("generate: " + std::to_string(n_steps) + " steps need " + std::to_string(n_steps - 1) +
                        " control steps");
  }
  std::vector<Tensor<T>> zs{z1};
  for (std::size_t t = 1; t < n_steps; ++t) {
    const auto p = prior_(zs.back(), slice_rows(controls, (t - 1) * b, t * b));
    zs.push_back(sample_reparam(p.mean, p.variance, draw_noise<T>({b, cfg_.latent_dim}, rng)));
  }
  const auto decoded = decode(concat_rows(zs));
  std::vector<Tensor<T>> frames;
  for (std::size_t t = 0; t < n_steps; ++t) frames.push_back(slice_rows(decoded, t * b, (t + 1) * b));
  return frames;
}

template <typename T>
std::vector<Tensor<T>> Model<T>::generate_from_frame(const Tensor<T>& x1, const Tensor<T>& controls,
                                                     std::size_t n_steps, std::mt19937_64* rng) const {
  const auto q = initial_net(x1);
  const auto z1 = sample_reparam(q.mean, q.variance, draw_noise<T>(q.mean.shape(), rng));
  return generate(z1, controls, n_steps, rng);
}

#define DVBF_INSTANTIATE_MODEL(T)                                                   \
  template DiagGaussian<T> fuse(const DiagGaussian<T>&, const DiagGaussian<T>&);    \
  template Tensor<T> draw_noise(Shape, std::mt19937_64*);                           \
  template struct TransitionNet<T>;                                                 \
  template struct Transition<T>;                                                    \
  template class Model<T>;

DVBF_INSTANTIATE_MODEL(float)
DVBF_INSTANTIATE_MODEL(double)

}  // namespace dvbf::model
