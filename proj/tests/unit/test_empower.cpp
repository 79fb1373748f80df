#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dvbf/diff/tape.hpp"
#include "dvbf/empower/empower.hpp"
#include "dvbf/errors.hpp"
#include "support/empower_toy.hpp"
#include "support/toy_model.hpp"

using namespace dvbf;
using namespace dvbf::empower;
using diff::Tensor;

using testing::quadrature_mi;
using testing::toy_dynamics;
using testing::toy_pool;

TEST_CASE("log densities agree with their samplers") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  const std::size_t n = 200000;
  const double m = 0.3, v = 0.49;
  DiagGaussian<double> d{Tensor<double>::filled({n, 1}, m), Tensor<double>::filled({n, 1}, v)};
  Tensor<double> a({n, 1});
  for (auto& x : a.values()) x = m + std::sqrt(v) * g(rng);
  const auto lp = gaussian_log_density(d, a);
  double mean = 0.0, sq = 0.0;
  for (double x : lp.values()) {
    mean += x / n;
    sq += x * x / n;
  }
  const double se = std::sqrt((sq - mean * mean) / n);
  const double entropy = 0.5 * std::log(2 * std::numbers::pi * std::numbers::e * v);
  CHECK(std::abs(-mean - entropy) < 3 * se);

  const auto sq_lp = squashed_log_density(d, a, 2.0);
  for (std::size_t i = 0; i < 1000; ++i) {
    CHECK(std::isfinite(sq_lp[i]));
    const double t = std::tanh(a[i]);
    CHECK(sq_lp[i] == doctest::Approx(lp[i] - std::log(2.0 * (1 - t * t))));
  }
}

TEST_CASE("identical source and planner give a zero bound") {
  auto cfg = testing::toy_empower_config();
  EmpowermentNets<double> nets(1, 1, 1.0, cfg);
  // q ignores z' and copies omega: zero the z' half of q's input weights.
  auto qh = nets.params().get("q.hidden.w");
  const auto oh = nets.params().get("omega.hidden.w");
  for (std::size_t j = 0; j < qh.dim(1); ++j) {
    qh[j] = oh[j];
    qh[qh.dim(1) + j] = 0.0;
  }
  for (const char* part : {"hidden.b", "mean.w", "mean.b", "var.w", "var.b"}) {
    auto q = nets.params().get(std::string("q.") + part);
    const auto o = nets.params().get(std::string("omega.") + part);
    for (std::size_t i = 0; i < q.numel(); ++i) q[i] = o[i];
  }
  std::mt19937_64 rng(2);
  for (double e : empowerment_bound(nets, toy_dynamics(), toy_pool(), 4, rng)) CHECK(std::abs(e) < 1e-12);
}

TEST_CASE("trained toy bound matches quadrature mutual information") {
  const auto cfg = testing::toy_empower_config();
  EmpowermentNets<double> nets(1, 1, 1.0, cfg);
  const auto history = train_empowerment(nets, toy_dynamics(), toy_pool(), cfg);
  REQUIRE(history.size() == 3000);

  std::mt19937_64 rng(3);
  const Tensor<double> z0({20000, 1});
  const auto per = empowerment_bound(nets, toy_dynamics(), z0, 1, rng);
  double mean = 0.0, sq = 0.0;
  for (double e : per) {
    mean += e / per.size();
    sq += e * e / per.size();
  }
  const double se = std::sqrt((sq - mean * mean) / per.size());

  diff::Tape<double>::NoGrad ng;
  const auto omega = nets.source(Tensor<double>({1, 1}));
  const double mi = quadrature_mi(omega.mean[0], omega.variance[0]);
  MESSAGE("bound " << mean << " +- " << se << ", quadrature MI " << mi);
  CHECK(std::abs(mean - mi) < 0.1);
  // Lower-bound property.
  CHECK(mean <= mi + 3 * se);

  // Learning curve: 500-step window means rise, entropy stays finite.
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < 500; ++i) {
    first += history[i].bound / 500;
    last += history[history.size() - 500 + i].bound / 500;
  }
  CHECK(last > first);
  for (const auto& r : history) REQUIRE(std::isfinite(r.entropy));
}

TEST_CASE("bounded controls and finite values on an untrained model") {
  auto mcfg = testing::toy_config();
  mcfg.control_dim = 2;
  model::Model<float> m(mcfg);
  EmpowerConfig cfg;
  cfg.hidden = 8;
  EmpowermentNets<float> nets(mcfg.latent_dim, 2, 3.0, cfg);
  Tensor<float> z({5, mcfg.latent_dim});
  std::mt19937_64 rng(1);
  std::normal_distribution<float> g;
  for (auto& v : z.values()) v = 5 * g(rng);
  const auto u = nets.act(z);
  for (float v : u.values()) CHECK(std::abs(v) <= 3.0f);
  for (double e : empowerment_bound(nets, prior_dynamics(m), z, 3, rng)) CHECK(std::isfinite(e));
  CHECK_THROWS_AS(empowerment_bound(nets, prior_dynamics(m), z, 0, rng), ContractError);
  EmpowerConfig bad;
  bad.horizon = 0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("map and rollout on an untrained ball model") {
  auto mcfg = testing::toy_config();
  mcfg.control_dim = 2;
  model::Model<float> m(mcfg);
  env::BallConfig bc;
  bc.image_size = 4;
  env::BallEnv ball(bc);
  EmpowerConfig cfg;
  cfg.hidden = 8;
  cfg.horizon = 3;
  EmpowermentNets<float> nets(mcfg.latent_dim, 2, ball.control_bound(), cfg);

  const auto map = empowerment_map(nets, m, bc, 5, 2, 9);
  REQUIRE(map.values.size() == 25);
  for (double v : map.values) CHECK(std::isfinite(v));
  CHECK(map.to_text() == empowerment_map(nets, m, bc, 5, 2, 9).to_text());
  const auto heat = map.heat_image();
  CHECK(heat.width == 5);

  const auto a = empowerment_rollout(nets, m, ball, 4, 10, 3);
  CHECK(a.size() == 4 * 11);
  CHECK(rollout_csv(a) == rollout_csv(empowerment_rollout(nets, m, ball, 4, 10, 3)));
  for (const auto& p : empowerment_rollout(nets, m, ball, 4, 30, 5, RolloutPolicy::kRandom)) {
    CHECK(p.x >= bc.ball_radius);
    CHECK(p.x <= bc.box_side - bc.ball_radius);
    CHECK(p.y >= bc.ball_radius);
    CHECK(p.y <= bc.box_side - bc.ball_radius);
  }
  CHECK(rollout_csv(a).rfind("agent,step,x,y\n0,0,", 0) == 0);
  CHECK(terminal_wall_distance(a, bc) >= 0.0);
}

TEST_CASE("empowerment nets checkpoint round trip") {
  EmpowerConfig cfg;
  cfg.hidden = 6;
  cfg.horizon = 2;
  EmpowermentNets<float> nets(3, 2, 1.5, cfg);
  const auto back = load_nets(model::decode_checkpoint(model::encode_checkpoint(nets_checkpoint(nets))));
  CHECK(back.horizon() == 2);
  CHECK(back.control_bound() == 1.5);
  Tensor<float> z({2, 3}, {0.1f, -0.2f, 0.3f, 1.0f, 2.0f, -1.0f});
  const auto a = nets.act(z), b = back.act(z);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
}
