#include "dvbf/objective/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dvbf/errors.hpp"

namespace dvbf::objective {

using namespace diff;

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::kElbo: return "elbo";
    case ObjectiveKind::kBetaElbo: return "beta-elbo";
    case ObjectiveKind::kGeco: return "geco";
  }
  return "?";
}

ObjectiveKind parse_objective(const std::string& name) {
  if (name == "elbo") return ObjectiveKind::kElbo;
  if (name == "beta-elbo") return ObjectiveKind::kBetaElbo;
  if (name == "geco") return ObjectiveKind::kGeco;
  throw ContractError("unknown objective '" + name + "' (expected elbo, beta-elbo or geco)");
}

void ObjectiveConfig::validate() const {
  if (!(beta >= 1.0)) throw ContractError("objective: beta must be >= 1");
  if (!(anneal_temp > 0)) throw ContractError("objective: anneal_temp must be positive");
  if (kind == ObjectiveKind::kGeco) {
    if (!(kappa > 0)) throw ContractError("objective: kappa must be positive");
    if (!(geco_step > 0)) throw ContractError("objective: geco_step must be positive");
    if (!(geco_decay > 0 && geco_decay < 1)) throw ContractError("objective: geco_decay must lie in (0, 1)");
    if (!(geco_lambda0 > 0)) throw ContractError("objective: geco_lambda0 must be positive");
  }
}

void ObjectiveConfig::store(KeyValues& kv, const std::string& p) const {
  kv.set(p + "kind", to_string(kind));
  kv.set(p + "beta", beta);
  kv.set(p + "anneal_temp", anneal_temp);
  kv.set(p + "kappa", kappa);
  kv.set(p + "geco_step", geco_step);
  kv.set(p + "geco_decay", geco_decay);
  kv.set(p + "geco_lambda0", geco_lambda0);
}

ObjectiveConfig ObjectiveConfig::load(const KeyValues& kv, const std::string& p) {
  ObjectiveConfig c;
  if (kv.has(p + "kind")) c.kind = parse_objective(kv.get(p + "kind"));
  const auto num = [&](const char* key, double& field) {
    if (kv.has(p + key)) field = kv.get_double(p + key);
  };
  num("beta", c.beta);
  num("anneal_temp", c.anneal_temp);
  num("kappa", c.kappa);
  num("geco_step", c.geco_step);
  num("geco_decay", c.geco_decay);
  num("geco_lambda0", c.geco_lambda0);
  c.validate();
  return c;
}

std::vector<std::string> ObjectiveConfig::keys() {
  KeyValues kv;
  ObjectiveConfig{}.store(kv, "");
  std::vector<std::string> out;
  for (const auto& [k, v] : kv.entries()) out.push_back(k);
  return out;
}

template <typename T>
Tensor<T> kl_diag(const DiagGaussian<T>& q, const DiagGaussian<T>& p) {
  if (q.mean.shape() != p.mean.shape() || q.variance.shape() != q.mean.shape() ||
      p.variance.shape() != p.mean.shape()) {
    throw DimensionError("kl_diag: shapes " + diff::to_string(q.mean.shape()) + " and " + diff::to_string(p.mean.shape()) +
                         " differ");
  }
  for (const auto* v : {&q.variance, &p.variance}) {
    for (T x : v->values())
      if (!(x > T{0})) throw DomainError("kl_diag: variances must be positive");
  }
  const auto log_ratio = sub(diff::log(p.variance), diff::log(q.variance));
  const auto spread = div(add(q.variance, square(sub(q.mean, p.mean))), p.variance);
  return scale(sum(add_scalar(add(log_ratio, spread), T{-1})), T{0.5});
}

template <typename T>
Tensor<T> recon_nll(const Tensor<T>& x, const Tensor<T>& mean, const Tensor<T>& var) {
  if (x.shape() != mean.shape()) {
    throw DimensionError("recon_nll: image " + diff::to_string(x.shape()) + " vs mean " + diff::to_string(mean.shape()));
  }
  if (var.numel() != 1) throw DimensionError("recon_nll: emission variance must be a scalar");
  if (!(var[0] > T{0})) throw DomainError("recon_nll: emission variance must be positive");
  const T n = static_cast<T>(x.numel());
  const auto sq = div(sum(square(sub(x, mean))), var);
  const auto logs = scale(diff::log(var), n);
  return scale(add_scalar(add(sq, logs), n * static_cast<T>(std::log(2 * std::numbers::pi))), T{0.5});
}

template <typename T>
Terms<T> terms(const model::Model<T>& m, const model::FilterOutput<T>& f, const model::SequenceTensors<T>& seq) {
  const T inv_b = T{1} / static_cast<T>(f.batch);
  Terms<T> out;
  out.decoded = m.decode(f.all_latents());
  out.nll = scale(recon_nll(seq.frames, out.decoded, m.emission_variance()), inv_b);
  std::vector<Tensor<T>> kls;
  for (std::size_t t = 0; t < f.steps; ++t) kls.push_back(kl_diag(f.posteriors[t], f.priors[t]));
  out.kl = scale(sum(concat_rows(kls)), inv_b);
  return out;
}

namespace {

template <typename T>
ObjectiveReport base_report(const Terms<T>& t) {
  ObjectiveReport r;
  r.recon_nll = static_cast<double>(t.nll.item());
  r.kl_raw = static_cast<double>(t.kl.item());
  r.elbo = -r.recon_nll - r.kl_raw;
  return r;
}

}  // namespace

template <typename T>
Objective<T> sequential_elbo(const model::Model<T>& m, const model::FilterOutput<T>& f,
                             const model::SequenceTensors<T>& seq) {
  const auto t = terms(m, f, seq);
  Objective<T> out{add(t.nll, t.kl), base_report(t)};
  out.report.kl_weight = 1.0;
  out.report.loss = static_cast<double>(out.loss.item());
  return out;
}

double anneal_factor(long long iter, double beta, double anneal_temp) {
  if (iter < 0) throw ContractError("anneal_factor: negative iteration");
  if (!(anneal_temp > 0)) throw ContractError("anneal_factor: temperature must be positive");
  return beta * std::min(1.0, static_cast<double>(iter) / anneal_temp);
}

template <typename T>
Objective<T> beta_elbo(const model::Model<T>& m, const model::FilterOutput<T>& f,
                       const model::SequenceTensors<T>& seq, long long iter, const ObjectiveConfig& cfg) {
  const auto t = terms(m, f, seq);
  const double w = anneal_factor(iter, cfg.beta, cfg.anneal_temp);
  Objective<T> out{add(t.nll, scale(t.kl, static_cast<T>(w))), base_report(t)};
  out.report.kl_weight = w;
  out.report.loss = static_cast<double>(out.loss.item());
  return out;
}

double suggest_beta(double obs_dim, double latent_dim) {
  if (!(obs_dim > 0 && latent_dim > 0)) throw ContractError("suggest_beta: dimensions must be positive");
  const double e = std::round(std::log2(obs_dim / latent_dim));
  return std::max(1.0, std::exp2(e));
}

GecoState geco_update(const GecoState& s, double c, const ObjectiveConfig& cfg) {
  GecoState n;
  n.constraint_ema = cfg.geco_decay * s.constraint_ema + (1.0 - cfg.geco_decay) * c;
  n.lambda = std::clamp(s.lambda * std::exp(cfg.geco_step * n.constraint_ema), 1e-6, 1e6);
  return n;
}

template <typename T>
std::pair<Objective<T>, GecoState> geco_objective(const model::Model<T>& m, const model::FilterOutput<T>& f,
                                                  const model::SequenceTensors<T>& seq, const GecoState& state,
                                                  const ObjectiveConfig& cfg) {
  const auto t = terms(m, f, seq);
  const std::size_t frames = seq.frames.dim(0);
  const T kappa2 = static_cast<T>(cfg.kappa * cfg.kappa);
  // Mean over frames of (||x_t - g(z_t)||^2 - kappa^2).
  const auto mean_c = add_scalar(scale(sum(square(sub(seq.frames, t.decoded))), T{1} / static_cast<T>(frames)),
                                 -kappa2);
  Objective<T> out{add(scale(mean_c, static_cast<T>(state.lambda)), t.kl), base_report(t)};
  out.report.kl_weight = 1.0;
  out.report.lambda = state.lambda;
  out.report.constraint = static_cast<double>(mean_c.item());
  out.report.loss = static_cast<double>(out.loss.item());
  return {out, geco_update(state, out.report.constraint, cfg)};
}

template <typename T>
Objective<T> compute_objective(const model::Model<T>& m, const model::FilterOutput<T>& f,
                               const model::SequenceTensors<T>& seq, long long iter, const ObjectiveConfig& cfg,
                               GecoState& geco) {
  switch (cfg.kind) {
    case ObjectiveKind::kElbo: return sequential_elbo(m, f, seq);
    case ObjectiveKind::kBetaElbo: return beta_elbo(m, f, seq, iter, cfg);
    case ObjectiveKind::kGeco: {
      auto [obj, next] = geco_objective(m, f, seq, geco, cfg);
      geco = next;
      return obj;
    }
  }
  throw ContractError("compute_objective: unknown kind");
}

std::string csv_header() { return "iter,elbo,nll,kl_raw,kl_weight,lambda"; }

std::string csv_row(long long iter, const ObjectiveReport& r) {
  return std::to_string(iter) + "," + format_double(r.elbo) + "," + format_double(r.recon_nll) + "," +
         format_double(r.kl_raw) + "," + format_double(r.kl_weight) + "," + format_double(r.lambda);
}

#define DVBF_INSTANTIATE_OBJECTIVE(T)                                                                         \
  template Tensor<T> kl_diag(const DiagGaussian<T>&, const DiagGaussian<T>&);                                 \
  template Tensor<T> recon_nll(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Terms<T> terms(const model::Model<T>&, const model::FilterOutput<T>&,                              \
                          const model::SequenceTensors<T>&);                                                  \
  template Objective<T> sequential_elbo(const model::Model<T>&, const model::FilterOutput<T>&,                \
                                        const model::SequenceTensors<T>&);                                    \
  template Objective<T> beta_elbo(const model::Model<T>&, const model::FilterOutput<T>&,                      \
                                  const model::SequenceTensors<T>&, long long, const ObjectiveConfig&);       \
  template std::pair<Objective<T>, GecoState> geco_objective(const model::Model<T>&,                          \
                                                             const model::FilterOutput<T>&,                   \
                                                             const model::SequenceTensors<T>&,                \
                                                             const GecoState&, const ObjectiveConfig&);       \
  template Objective<T> compute_objective(const model::Model<T>&, const model::FilterOutput<T>&,              \
                                          const model::SequenceTensors<T>&, long long, const ObjectiveConfig&, \
                                          GecoState&);

DVBF_INSTANTIATE_OBJECTIVE(float)
DVBF_INSTANTIATE_OBJECTIVE(double)

}  // namespace dvbf::objective
