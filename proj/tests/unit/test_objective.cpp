#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dvbf/errors.hpp"
#include "dvbf/objective/objective.hpp"
#include "support/gradcheck.hpp"
#include "support/toy_model.hpp"

using namespace dvbf;
using namespace dvbf::objective;
using diff::Shape;
using diff::Tape;
using diff::Tensor;
using model::DiagGaussian;
using model::Model;

namespace {

DiagGaussian<double> gaussian(std::vector<double> m, std::vector<double> v) {
  const std::size_t n = m.size();
  return {Tensor<double>({1, n}, std::move(m)), Tensor<double>({1, n}, std::move(v))};
}

}  // namespace

TEST_CASE("kl_diag closed form") {
  CHECK(kl_diag(gaussian({0}, {1}), gaussian({0}, {1})).item() == 0.0);
  CHECK(kl_diag(gaussian({1}, {1}), gaussian({0}, {1})).item() == doctest::Approx(0.5));
  CHECK_THROWS_AS(kl_diag(gaussian({0}, {-1}), gaussian({0}, {1})), DomainError);
  CHECK_THROWS_AS(kl_diag(gaussian({0}, {1}), gaussian({0, 0}, {1, 1})), DimensionError);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> mu(-2, 2), var(0.1, 3);
  for (int i = 0; i < 100; ++i) {
    const auto q = gaussian({mu(rng), mu(rng)}, {var(rng), var(rng)});
    const auto p = gaussian({mu(rng), mu(rng)}, {var(rng), var(rng)});
    CHECK(kl_diag(q, p).item() >= 0.0);
    CHECK(std::abs(kl_diag(q, q).item()) < 1e-10);
  }
}

TEST_CASE("kl_diag agrees with a Monte-Carlo estimate") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> mu(-1, 1), var(0.3, 2);
  std::vector<double> mq, vq, mp, vp;
  for (int i = 0; i < 8; ++i) {
    mq.push_back(mu(rng));
    vq.push_back(var(rng));
    mp.push_back(mu(rng));
    vp.push_back(var(rng));
  }
  const double closed = kl_diag(gaussian(mq, vq), gaussian(mp, vp)).item();
  // log q(z) - log p(z) for z ~ q.
  std::normal_distribution<double> n;
  const int samples = 1000000;
  double s = 0, s2 = 0;
  for (int k = 0; k < samples; ++k) {
    double d = 0;
    for (int i = 0; i < 8; ++i) {
      const double z = mq[i] + std::sqrt(vq[i]) * n(rng);
      d += -0.5 * std::log(vq[i]) - 0.5 * (z - mq[i]) * (z - mq[i]) / vq[i];
      d -= -0.5 * std::log(vp[i]) - 0.5 * (z - mp[i]) * (z - mp[i]) / vp[i];
    }
    s += d;
    s2 += d * d;
  }
  const double mean = s / samples;
  const double se = std::sqrt((s2 / samples - mean * mean) / samples);
  CHECK(std::abs(mean - closed) < 3 * se);
}

TEST_CASE("recon_nll examples") {
  const double log2pi = std::log(2 * std::numbers::pi);
  Tensor<double> x({1, 256});
  std::mt19937_64 rng(3);
  for (auto& v : x.values()) v = std::uniform_real_distribution<double>(0, 1)(rng);
  CHECK(recon_nll(x, x, Tensor<double>::scalar(1.0)).item() == doctest::Approx(0.5 * 256 * log2pi));
  const double d = recon_nll(x, x, Tensor<double>::scalar(2.0)).item() - recon_nll(x, x, Tensor<double>::scalar(1.0)).item();
  CHECK(d == doctest::Approx(0.5 * 256 * std::log(2.0)));

  // Two pixels against the Gaussian density written out directly.
  const Tensor<double> a({1, 2}, {0.3, -1.2}), m({1, 2}, {0.1, 0.4});
  const double var = 0.7;
  double direct = 0;
  for (int i = 0; i < 2; ++i) {
    direct -= std::log(std::exp(-(a[i] - m[i]) * (a[i] - m[i]) / (2 * var)) / std::sqrt(2 * std::numbers::pi * var));
  }
  CHECK(std::abs(recon_nll(a, m, Tensor<double>::scalar(var)).item() - direct) < 1e-12);
  CHECK_THROWS_AS(recon_nll(a, m, Tensor<double>::scalar(0.0)), DomainError);
}

TEST_CASE("sequential ELBO boundaries") {
  const auto cfg = testing::toy_config();
  Model<double> m(cfg);
  const auto one = testing::random_sequences<double>(cfg, 3, 1, 4);
  const auto f = m.filter(one, nullptr);
  const auto obj = sequential_elbo(m, f, one);
  const double nll = recon_nll(one.frames, m.decode(f.latents[0]), m.emission_variance()).item() / 3;
  const double kl = kl_diag(f.posteriors[0], model::standard_normal<double>({3, 4})).item() / 3;
  CHECK(obj.report.elbo == doctest::Approx(-nll - kl).epsilon(1e-12));
  CHECK(obj.report.elbo == doctest::Approx(-obj.report.recon_nll - obj.report.kl_raw).epsilon(1e-14));

  // Posteriors pinned to the priors from t = 2 on.
  const auto seq = testing::random_sequences<double>(cfg, 3, 4, 5);
  auto g = m.filter(seq, nullptr);
  for (std::size_t t = 1; t < 4; ++t) g.posteriors[t] = g.priors[t];
  const double kl1 = kl_diag(g.posteriors[0], g.priors[0]).item() / 3;
  CHECK(sequential_elbo(m, g, seq).report.kl_raw == doctest::Approx(kl1).epsilon(1e-12));
}

TEST_CASE("two-step ELBO gradient matches finite differences for every parameter group") {
  struct Variant {
    model::TransitionKind kind;
    bool shared, joint;
  };
  for (const auto v : {Variant{model::TransitionKind::kMlp, false, false},
                       Variant{model::TransitionKind::kSlds, true, false},
                       Variant{model::TransitionKind::kLocallyLinear, false, true}}) {
    auto cfg = testing::toy_config(v.kind);
    cfg.shared_mean = v.shared;
    cfg.joint_posterior = v.joint;
    Model<double> m(cfg);
    const auto seq = testing::random_sequences<double>(cfg, 2, 2, 6);
    const auto loss = [&] {
      std::mt19937_64 rng(7);
      return sequential_elbo(m, m.filter(seq, &rng), seq).loss;
    };
    for (const std::string group : {"theta0.", "theta_t.", "theta_e.", "phi_e.", "phi_t."}) {
      std::vector<Tensor<double>> inputs;
      for (const auto& e : m.params().group(group)) inputs.push_back(e.tensor);
      REQUIRE_FALSE(inputs.empty());
      const auto r = testing::gradcheck(inputs, loss);
      INFO("group " << group << " kind " << model::to_string(v.kind));
      CHECK(r.max_rel_error < 1e-3);
    }
  }
}

TEST_CASE("anneal schedule") {
  CHECK(anneal_factor(0, 8, 5000) == 0.0);
  CHECK(anneal_factor(5000, 8, 5000) == 8.0);
  CHECK(anneal_factor(2500, 8, 5000) == 4.0);
  CHECK(anneal_factor(90000, 8, 5000) == 8.0);
  CHECK_THROWS_AS(anneal_factor(-1, 8, 5000), ContractError);
}

TEST_CASE("beta ELBO reductions, monotonicity and ordering") {
  const auto cfg = testing::toy_config();
  Model<double> m(cfg);
  const auto seq = testing::random_sequences<double>(cfg, 3, 4, 8);
  std::mt19937_64 rng(9);
  const auto f = m.filter(seq, &rng);
  const auto plain = sequential_elbo(m, f, seq);
  REQUIRE(plain.report.kl_raw > 0);

  ObjectiveConfig c;
  c.kind = ObjectiveKind::kBetaElbo;
  c.beta = 1;
  c.anneal_temp = 100;
  CHECK(beta_elbo(m, f, seq, 100, c).loss.item() == plain.loss.item());
  const auto start = beta_elbo(m, f, seq, 0, c);
  CHECK(start.loss.item() == plain.report.recon_nll);
  CHECK(start.report.kl_raw == plain.report.kl_raw);
  CHECK(start.report.kl_weight == 0.0);

  c.beta = 8;
  double previous = 1e300;
  for (long long it = 0; it <= 200; it += 10) {
    const auto o = beta_elbo(m, f, seq, it, c);
    CHECK(o.report.kl_weight == anneal_factor(it, 8, 100));
    // The bound being maximized is -loss.
    CHECK(-o.loss.item() <= previous);
    previous = -o.loss.item();
    if (it >= 100) CHECK(-o.loss.item() <= plain.report.elbo);
  }
}

TEST_CASE("suggest_beta") {
  CHECK(suggest_beta(96 * 128 * 3, 128) == 256);
  CHECK(suggest_beta(256, 64) == 4);
  CHECK(suggest_beta(64, 64) == 1);
  CHECK(suggest_beta(10, 64) == 1);
}

TEST_CASE("GECO constraint and multiplier") {
  const auto cfg = testing::toy_config();
  Model<double> m(cfg);
  auto seq = testing::random_sequences<double>(cfg, 2, 3, 10);
  const auto f = m.filter(seq, nullptr);
  // Frames replaced by the decoder's own output: zero residual.
  const auto decoded = m.decode(f.all_latents());
  std::copy(decoded.values().begin(), decoded.values().end(), seq.frames.values().begin());
  ObjectiveConfig c;
  c.kind = ObjectiveKind::kGeco;
  c.kappa = 3;
  auto [obj, next] = geco_objective(m, f, seq, GecoState{}, c);
  CHECK(obj.report.constraint == doctest::Approx(-9.0));
  CHECK(next.lambda < 1.0);

  CHECK(geco_update(GecoState{1.0, 0.0}, 2.0, c).lambda > 1.0);
  CHECK(geco_update(GecoState{1.0, 0.0}, -2.0, c).lambda < 1.0);
  CHECK(geco_update(GecoState{1e6, 5.0}, 5.0, c).lambda == 1e6);
  CHECK(geco_update(GecoState{1e-6, -5.0}, -5.0, c).lambda == 1e-6);

  // Constant C: after burn-in the multiplier grows by exp(step * C) per update.
  GecoState s;
  for (int i = 0; i < 2000; ++i) s = geco_update(s, 0.5, c);
  const auto n = geco_update(s, 0.5, c);
  CHECK(std::log(n.lambda / s.lambda) == doctest::Approx(c.geco_step * 0.5).epsilon(1e-6));
}

TEST_CASE("GECO multiplier is not differentiated") {
  const auto cfg = testing::toy_config();
  Model<double> m(cfg);
  const auto seq = testing::random_sequences<double>(cfg, 2, 2, 11);
  ObjectiveConfig c;
  c.kind = ObjectiveKind::kGeco;
  const auto loss = [&] {
    std::mt19937_64 rng(12);
    return geco_objective(m, m.filter(seq, &rng), seq, GecoState{2.5, 0.0}, c).first.loss;
  };
  std::vector<Tensor<double>> dec;
  for (const auto& e : m.params().group("theta_e.")) dec.push_back(e.tensor);
  CHECK(testing::gradcheck(dec, loss).max_rel_error < 1e-3);
}

TEST_CASE("ELBO estimator is stable across noise draws") {
  const auto cfg = testing::toy_config();
  Model<double> m(cfg);
  const auto seq = testing::random_sequences<double>(cfg, 2, 5, 13);
  Tape<double>::NoGrad no_grad;
  const auto stats = [&](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double s = 0, s2 = 0;
    for (int i = 0; i < 64; ++i) {
      const double e = sequential_elbo(m, m.filter(seq, &rng), seq).report.elbo;
      s += e;
      s2 += e * e;
    }
    const double mean = s / 64;
    return std::pair{mean, std::sqrt((s2 / 64 - mean * mean) / 64)};
  };
  const auto [m1, se1] = stats(100);
  const auto [m2, se2] = stats(200);
  CHECK(std::abs(m1 - m2) < 2 * std::hypot(se1, se2));
}

TEST_CASE("objective config and log rows") {
  ObjectiveConfig c;
  c.kind = ObjectiveKind::kBetaElbo;
  c.beta = 8;
  c.anneal_temp = 1250;
  KeyValues kv;
  c.store(kv);
  const auto back = ObjectiveConfig::load(KeyValues::parse(kv.emit()));
  CHECK(back.kind == ObjectiveKind::kBetaElbo);
  CHECK(back.anneal_temp == 1250);
  c.beta = 0.5;
  CHECK_THROWS_AS(c.validate(), ContractError);
  ObjectiveReport r;
  r.elbo = -1.5;
  r.recon_nll = 1.0;
  r.kl_raw = 0.5;
  CHECK(csv_header() == "iter,elbo,nll,kl_raw,kl_weight,lambda");
  CHECK(csv_row(3, r) == "3,-1.5,1,0.5,1,0");
}
