#include "dvbf/empower/empower.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dvbf/diff/tape.hpp"
#include "dvbf/errors.hpp"
#include "dvbf/train/optim.hpp"

namespace dvbf::empower {

using diff::Shape;

template <typename T>
Tensor<T> gaussian_log_density(const DiagGaussian<T>& d, const Tensor<T>& a) {
  if (a.shape() != d.mean.shape() || d.variance.shape() != d.mean.shape()) {
    throw DimensionError("gaussian_log_density: sample " + diff::to_string(a.shape()) + " vs distribution " +
                         diff::to_string(d.mean.shape()));
  }
  const T log_2pi = static_cast<T>(std::log(2.0 * std::numbers::pi));
  const auto quad = diff::div(diff::square(diff::sub(a, d.mean)), d.variance);
  return diff::scale(diff::add_scalar(diff::add(quad, diff::log(d.variance)), log_2pi), T{-0.5});
}

template <typename T>
std::vector<double> squashed_log_density(const DiagGaussian<T>& d, const Tensor<T>& a, double bound) {
  typename diff::Tape<T>::NoGrad no_grad;
  const auto lp = gaussian_log_density(d, a);
  const std::size_t n = a.dim(0), cols = a.numel() / n;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double t = std::tanh(static_cast<double>(a[i * cols + j]));
      out[i] += static_cast<double>(lp[i * cols + j]) - std::log(bound * (1.0 - t * t));
    }
  return out;
}

void EmpowerConfig::validate() const {
  if (horizon == 0) throw ContractError("empower: horizon must be at least 1");
  if (hidden == 0 || batch == 0 || samples == 0) throw ContractError("empower: hidden, batch and samples must be positive");
  if (iterations <= 0) throw ContractError("empower: iterations must be positive");
  if (!(learning_rate > 0)) throw ContractError("empower: learning_rate must be positive");
  if (!(grad_clip > 0)) throw ContractError("empower: grad_clip must be positive");
  if (!(variance_floor > 0)) throw ContractError("empower: variance_floor must be positive");
}

void EmpowerConfig::store(KeyValues& kv, const std::string& p) const {
  kv.set(p + "horizon", std::to_string(horizon));
  kv.set(p + "hidden", std::to_string(hidden));
  kv.set(p + "batch", std::to_string(batch));
  kv.set(p + "samples", std::to_string(samples));
  kv.set(p + "iterations", std::to_string(iterations));
  kv.set(p + "learning_rate", learning_rate);
  kv.set(p + "grad_clip", grad_clip);
  kv.set(p + "variance_floor", variance_floor);
  kv.set(p + "seed", std::to_string(seed));
}

EmpowerConfig EmpowerConfig::load(const KeyValues& kv, const std::string& p) {
  EmpowerConfig c;
  const auto size = [&](const char* key, std::size_t& field) {
    if (kv.has(p + key)) {
      const long long v = kv.get_int(p + key);
      if (v < 0) throw ContractError("empower: " + std::string(key) + " must be non-negative");
      field = static_cast<std::size_t>(v);
    }
  };
  const auto num = [&](const char* key, double& field) {
    if (kv.has(p + key)) field = kv.get_double(p + key);
  };
  size("horizon", c.horizon);
  size("hidden", c.hidden);
  size("batch", c.batch);
  size("samples", c.samples);
  if (kv.has(p + "iterations")) c.iterations = kv.get_int(p + "iterations");
  num("learning_rate", c.learning_rate);
  num("grad_clip", c.grad_clip);
  num("variance_floor", c.variance_floor);
  if (kv.has(p + "seed")) c.seed = std::stoull(kv.get(p + "seed"));
  c.validate();
  return c;
}

std::vector<std::string> EmpowerConfig::keys() {
  KeyValues kv;
  EmpowerConfig{}.store(kv, "");
  std::vector<std::string> out;
  for (const auto& [k, v] : kv.entries()) out.push_back(k);
  return out;
}

template <typename T>
EmpowermentNets<T>::EmpowermentNets(std::size_t latent_dim, std::size_t control_dim, double control_bound,
                                    const EmpowerConfig& cfg)
    : latent_dim_(latent_dim), control_dim_(control_dim), horizon_(cfg.horizon), bound_(control_bound), cfg_(cfg) {
  cfg.validate();
  if (latent_dim == 0 || control_dim == 0) throw ContractError("empower: latent and control dims must be positive");
  if (!(control_bound > 0)) throw ContractError("empower: control bound must be positive");
  std::mt19937_64 rng(env::derive_seed(cfg.seed, 0xe3));
  const std::size_t a = horizon_ * control_dim_;
  source_hidden_ = model::make_dense(params_, "omega.hidden", latent_dim, cfg.hidden, rng);
  source_mean_ = model::make_dense(params_, "omega.mean", cfg.hidden, a, rng, 0.1);
  source_var_ = model::make_dense(params_, "omega.var", cfg.hidden, a, rng, 0.1);
  planner_hidden_ = model::make_dense(params_, "q.hidden", 2 * latent_dim, cfg.hidden, rng);
  planner_mean_ = model::make_dense(params_, "q.mean", cfg.hidden, a, rng, 0.1);
  planner_var_ = model::make_dense(params_, "q.var", cfg.hidden, a, rng, 0.1);
  // softplus(0.5413) = 1: both distributions start near N(0, 1) in a-space.
  for (auto* d : {&source_var_, &planner_var_})
    for (auto& v : d->b.values()) v = static_cast<T>(0.5413);
}

template <typename T>
DiagGaussian<T> EmpowermentNets<T>::source(const Tensor<T>& z) const {
  const auto h = diff::relu(source_hidden_(z));
  return {source_mean_(h), model::positive_variance(source_var_(h), static_cast<T>(cfg_.variance_floor))};
}

template <typename T>
DiagGaussian<T> EmpowermentNets<T>::planner(const Tensor<T>& z, const Tensor<T>& z_next) const {
  const auto h = diff::relu(planner_hidden_(diff::concat_cols(std::vector<Tensor<T>>{z, z_next})));
  return {planner_mean_(h), model::positive_variance(planner_var_(h), static_cast<T>(cfg_.variance_floor))};
}

template <typename T>
Tensor<T> EmpowermentNets<T>::act(const Tensor<T>& z) const {
  const auto first = diff::slice_cols(source(z).mean, 0, control_dim_);
  return diff::scale(diff::tanh(first), static_cast<T>(bound_));
}

template <typename T>
Dynamics<T> prior_dynamics(const model::Model<T>& m) {
  return [&m](const Tensor<T>& z, const Tensor<T>& u) { return m.prior_transition(z, u); };
}

namespace {

template <typename T>
Tensor<T> repeat_rows(const Tensor<T>& z, std::size_t times) {
  if (times == 1) return z;
  std::vector<Tensor<T>> parts(times, z);
  return diff::concat_rows(parts);
}

template <typename T>
Tensor<T> gaussian_noise(Shape shape, std::mt19937_64& rng) {
  Tensor<T> n(std::move(shape));
  std::normal_distribution<double> g;
  for (auto& v : n.values()) v = static_cast<T>(g(rng));
  return n;
}

}  // namespace

template <typename T>
Tensor<T> bound_terms(const EmpowermentNets<T>& nets, const Dynamics<T>& dyn, const Tensor<T>& z,
                      std::size_t n_samples, std::mt19937_64& rng) {
  if (n_samples == 0) throw ContractError("empowerment_bound: n_samples must be positive");
  if (z.rank() != 2 || z.dim(1) != nets.latent_dim()) {
    throw DimensionError("empowerment_bound: latents must be [N x " + std::to_string(nets.latent_dim()) + "], got " +
                         diff::to_string(z.shape()));
  }
  const auto zr = repeat_rows(z, n_samples);
  const std::size_t n = zr.dim(0), nu = nets.control_dim(), k = nets.horizon();
  const auto omega = nets.source(zr);
  const auto a = diff::sample_reparam(omega.mean, omega.variance, gaussian_noise<T>({n, k * nu}, rng));
  const auto u = diff::scale(diff::tanh(a), static_cast<T>(nets.control_bound()));
  Tensor<T> zt = zr;
  for (std::size_t s = 0; s < k; ++s) {
    const auto p = dyn(zt, diff::slice_cols(u, s * nu, (s + 1) * nu));
    zt = diff::sample_reparam(p.mean, p.variance, gaussian_noise<T>({n, nets.latent_dim()}, rng));
  }
  const auto q = nets.planner(zr, zt);
  return diff::sub(gaussian_log_density(q, a), gaussian_log_density(omega, a));
}

template <typename T>
std::vector<double> empowerment_bound(const EmpowermentNets<T>& nets, const Dynamics<T>& dyn, const Tensor<T>& z,
                                      std::size_t n_samples, std::mt19937_64& rng) {
  typename diff::Tape<T>::NoGrad no_grad;
  const auto terms = bound_terms(nets, dyn, z, n_samples, rng);
  const std::size_t rows = z.dim(0), cols = terms.dim(1);
  std::vector<double> out(rows, 0.0);
  for (std::size_t s = 0; s < n_samples; ++s)
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out[i] += static_cast<double>(terms[(s * rows + i) * cols + j]);
  for (double& v : out) v /= static_cast<double>(n_samples);
  return out;
}

template <typename T>
double source_entropy(const EmpowermentNets<T>& nets, const Tensor<T>& z) {
  typename diff::Tape<T>::NoGrad no_grad;
  const auto omega = nets.source(z);
  double h = 0.0;
  for (T v : omega.variance.values()) h += 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * v);
  return h / static_cast<double>(z.dim(0));
}

template <typename T>
std::vector<EmpowerReport> train_empowerment(EmpowermentNets<T>& nets, const Dynamics<T>& dyn,
                                             const Tensor<T>& z_pool, const EmpowerConfig& cfg) {
  cfg.validate();
  if (z_pool.rank() != 2 || z_pool.dim(1) != nets.latent_dim() || z_pool.dim(0) == 0) {
    throw DimensionError("train_empowerment: latent pool must be [n x " + std::to_string(nets.latent_dim()) + "]");
  }
  using Tape = diff::Tape<T>;
  const auto& params = nets.params();
  auto adam = train::make_adam_state(params);
  const train::AdamConfig acfg{cfg.learning_rate, 0.9, 0.999, 1e-8};
  const std::size_t pool = z_pool.dim(0), nz = nets.latent_dim();
  std::vector<EmpowerReport> history;
  history.reserve(static_cast<std::size_t>(cfg.iterations));
  for (long long it = 1; it <= cfg.iterations; ++it) {
    std::mt19937_64 rng(env::derive_seed(cfg.seed, static_cast<std::uint64_t>(it)));
    std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
    Tensor<T> z({cfg.batch, nz});
    for (std::size_t i = 0; i < cfg.batch; ++i) {
      const std::size_t r = pick(rng);
      std::copy_n(z_pool.data() + r * nz, nz, z.data() + i * nz);
    }
    params.zero_grad();
    EmpowerReport rep;
    {
      Tape tape;
      typename Tape::Scope scope(tape);
      const auto terms = bound_terms(nets, dyn, z, cfg.samples, rng);
      const T rows = static_cast<T>(terms.dim(0));
      auto loss = diff::scale(diff::sum(terms), T{-1} / rows);
      rep.bound = -static_cast<double>(loss.item());
      if (!std::isfinite(rep.bound)) {
        throw NumericError("empowerment: non-finite bound at iteration " + std::to_string(it));
      }
      tape.backward(loss);
    }
    for (const auto& e : params.entries())
      for (T g : e.tensor.grads())
        if (!std::isfinite(static_cast<double>(g))) {
          throw NumericError("empowerment: non-finite gradient of " + e.name + " at iteration " + std::to_string(it));
        }
    train::clip_grad_norm(params, cfg.grad_clip);
    train::adam_step(params, adam, acfg);
    rep.entropy = source_entropy(nets, z);
    history.push_back(rep);
  }
  return history;
}

model::Checkpoint nets_checkpoint(const EmpowermentNets<float>& nets) {
  model::Checkpoint ckpt;
  nets.config().store(ckpt.config);
  ckpt.config.set("nets.latent_dim", std::to_string(nets.latent_dim()));
  ckpt.config.set("nets.control_dim", std::to_string(nets.control_dim()));
  ckpt.config.set("nets.control_bound", nets.control_bound());
  model::store_params(ckpt, nets.params());
  return ckpt;
}

EmpowermentNets<float> load_nets(const model::Checkpoint& ckpt) {
  const auto cfg = EmpowerConfig::load(ckpt.config);
  EmpowermentNets<float> nets(static_cast<std::size_t>(ckpt.config.get_int("nets.latent_dim")),
                              static_cast<std::size_t>(ckpt.config.get_int("nets.control_dim")),
                              ckpt.config.get_double("nets.control_bound"), cfg);
  model::load_params(ckpt, nets.params());
  return nets;
}

Tensor<float> ball_latents(const model::Model<float>& m, const env::BallConfig& ball,
                           const std::vector<std::pair<double, double>>& positions) {
  diff::Tape<float>::NoGrad no_grad;
  const std::size_t side = ball.image_size, obs = side * side;
  if (m.config().obs_dim() != obs) throw DimensionError("ball_latents: model and renderer disagree on image size");
  Tensor<float> x({positions.size(), obs});
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto img = env::render_ball({positions[i].first, positions[i].second, 0.0, 0.0}, ball, side);
    std::copy(img.begin(), img.end(), x.data() + i * obs);
  }
  return m.initial_net(x).mean;
}

double EmpowerMap::edge_mean() const {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < cells; ++r)
    for (std::size_t c = 0; c < cells; ++c)
      if (r == 0 || c == 0 || r + 1 == cells || c + 1 == cells) {
        s += at(r, c);
        ++n;
      }
  return n ? s / static_cast<double>(n) : 0.0;
}

double EmpowerMap::interior_mean() const {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 1; r + 1 < cells; ++r)
    for (std::size_t c = 1; c + 1 < cells; ++c) {
      s += at(r, c);
      ++n;
    }
  return n ? s / static_cast<double>(n) : 0.0;
}

std::string EmpowerMap::to_text() const {
  std::ostringstream os;
  for (std::size_t r = 0; r < cells; ++r) {
    for (std::size_t c = 0; c < cells; ++c) os << (c ? " " : "") << format_double(at(r, c));
    os << '\n';
  }
  return os.str();
}

GrayImage EmpowerMap::heat_image() const {
  GrayImage img(cells, cells);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double span = (values.empty() || *hi <= *lo) ? 1.0 : *hi - *lo;
  for (std::size_t i = 0; i < values.size(); ++i)
    img.pixels[i] = static_cast<float>((values[i] - (values.empty() ? 0.0 : *lo)) / span);
  return img;
}

EmpowerMap empowerment_map(const EmpowermentNets<float>& nets, const model::Model<float>& m,
                           const env::BallConfig& ball, std::size_t cells, std::size_t n_samples,
                           std::uint64_t seed) {
  if (cells < 3) throw ContractError("empowerment_map: need at least 3 cells per side");
  EmpowerMap map;
  map.cells = cells;
  const double lo = ball.ball_radius, hi = ball.box_side - ball.ball_radius;
  for (std::size_t i = 0; i < cells; ++i) map.centres.push_back(lo + (hi - lo) * (i + 0.5) / cells);
  std::vector<std::pair<double, double>> positions;
  for (std::size_t r = 0; r < cells; ++r)
    for (std::size_t c = 0; c < cells; ++c) positions.emplace_back(map.centres[c], map.centres[r]);
  const auto z = ball_latents(m, ball, positions);
  std::mt19937_64 rng(seed);
  map.values = empowerment_bound(nets, prior_dynamics(m), z, n_samples, rng);
  return map;
}

std::vector<RolloutPoint> empowerment_rollout(const EmpowermentNets<float>& nets, const model::Model<float>& m,
                                              const env::BallEnv& ball, std::size_t n_agents, std::size_t steps,
                                              std::uint64_t seed, RolloutPolicy policy) {
  if (n_agents == 0) throw ContractError("empowerment_rollout: need at least one agent");
  diff::Tape<float>::NoGrad no_grad;
  const std::size_t nu = ball.control_dim(), obs = m.config().obs_dim();
  if (nets.control_dim() != nu || m.config().control_dim != nu) {
    throw DimensionError("empowerment_rollout: control dimensions disagree");
  }
  std::vector<std::vector<double>> states;
  for (std::size_t a = 0; a < n_agents; ++a) {
    std::mt19937_64 init(env::derive_seed(seed, a));
    states.push_back(ball.initial_state(init));
  }
  std::mt19937_64 noise(env::derive_seed(seed, 0x5eed));
  std::uniform_real_distribution<double> random_control(-ball.control_bound(), ball.control_bound());
  const auto render_all = [&]() {
    Tensor<float> x({n_agents, obs});
    for (std::size_t a = 0; a < n_agents; ++a) {
      const auto img = ball.render(states[a]);
      std::copy(img.begin(), img.end(), x.data() + a * obs);
    }
    return x;
  };
  std::vector<RolloutPoint> out;
  const auto record = [&](std::size_t step) {
    for (std::size_t a = 0; a < n_agents; ++a) out.push_back({a, step, states[a][0], states[a][1]});
  };
  record(0);
  Tensor<float> z = m.initial_net(render_all()).mean;
  for (std::size_t step = 1; step <= steps; ++step) {
    Tensor<float> u({n_agents, nu});
    if (policy == RolloutPolicy::kEmpowerment) {
      u = nets.act(z);
    } else {
      for (auto& v : u.values()) v = static_cast<float>(random_control(noise));
    }
    for (std::size_t a = 0; a < n_agents; ++a) {
      std::vector<double> ctl(nu);
      for (std::size_t j = 0; j < nu; ++j) {
        ctl[j] = std::clamp(static_cast<double>(u[a * nu + j]), -ball.control_bound(), ball.control_bound());
        u[a * nu + j] = static_cast<float>(ctl[j]);
      }
      states[a] = ball.step(states[a], ctl);
    }
    record(step);
    z = m.filter_step(z, u, render_all()).mean;
  }
  return out;
}

std::string rollout_csv(const std::vector<RolloutPoint>& points) {
  std::ostringstream os;
  os << "agent,step,x,y\n";
  for (const auto& p : points) os << p.agent << ',' << p.step << ',' << format_double(p.x) << ',' << format_double(p.y) << '\n';
  return os.str();
}

double terminal_wall_distance(const std::vector<RolloutPoint>& points, const env::BallConfig& ball) {
  std::size_t last = 0;
  for (const auto& p : points) last = std::max(last, p.step);
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& p : points)
    if (p.step == last) {
      s += env::wall_distance({p.x, p.y, 0.0, 0.0}, ball);
      ++n;
    }
  return n ? s / static_cast<double>(n) : 0.0;
}

#define DVBF_INSTANTIATE_EMPOWER(T)                                                                                 \
  template Tensor<T> gaussian_log_density(const DiagGaussian<T>&, const Tensor<T>&);                                \
  template std::vector<double> squashed_log_density(const DiagGaussian<T>&, const Tensor<T>&, double);              \
  template class EmpowermentNets<T>;                                                                                \
  template Dynamics<T> prior_dynamics(const model::Model<T>&);                                                      \
  template Tensor<T> bound_terms(const EmpowermentNets<T>&, const Dynamics<T>&, const Tensor<T>&, std::size_t,     \
                                 std::mt19937_64&);                                                                 \
  template std::vector<double> empowerment_bound(const EmpowermentNets<T>&, const Dynamics<T>&, const Tensor<T>&,  \
                                                 std::size_t, std::mt19937_64&);                                    \
  template double source_entropy(const EmpowermentNets<T>&, const Tensor<T>&);                                      \
  template std::vector<EmpowerReport> train_empowerment(EmpowermentNets<T>&, const Dynamics<T>&, const Tensor<T>&, \
                                                        const EmpowerConfig&);

DVBF_INSTANTIATE_EMPOWER(float)
DVBF_INSTANTIATE_EMPOWER(double)

}  // namespace dvbf::empower
