#include <doctest.h>

#include <cmath>
#include <random>

#include "dvbf/env/dataset.hpp"
#include "dvbf/errors.hpp"
#include "dvbf/eval/eval.hpp"
#include "support/toy_model.hpp"

using namespace dvbf;
using namespace dvbf::eval;

namespace {

env::SequenceBatch toy_pendulum(std::size_t n, std::size_t steps, std::uint64_t seed) {
  env::PendulumConfig pc;
  pc.image_size = 4;
  env::PendulumEnv e(pc);
  return env::generate_dataset(e, env::uniform_controls(e.control_bound()), n, steps, seed);
}

}  // namespace

TEST_CASE("correlation of copies, affine maps and independent noise") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  const std::size_t n = 10000;
  std::vector<double> truth(n), lat(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = g(rng);
    lat[3 * i] = g(rng);
    lat[3 * i + 1] = -2.0 * truth[i] + 5.0;
    lat[3 * i + 2] = 0.25;  // constant
  }
  auto c = latent_correlation(lat, 3, truth, 1);
  CHECK(c[0].r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c[0].latent == 1);

  std::vector<double> copy(truth);
  CHECK(latent_correlation(copy, 1, truth, 1)[0].r == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> noise(n), cst(n, 3.0);
  for (auto& v : noise) v = g(rng);
  CHECK(latent_correlation(noise, 1, truth, 1)[0].r < 0.05);
  CHECK(latent_correlation(cst, 1, truth, 1)[0].r == 0.0);

  CHECK_THROWS_AS(latent_correlation(std::vector<double>{1.0}, 1, std::vector<double>{2.0}, 1), ContractError);
  CHECK_THROWS_AS(latent_correlation(std::vector<double>{1.0, 2.0}, 1, std::vector<double>{2.0}, 1), DimensionError);
}

TEST_CASE("correlation is invariant under per-dimension affine rescaling") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  const std::size_t n = 500, d = 4;
  std::vector<double> truth(2 * n), lat(d * n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[2 * i] = g(rng);
    truth[2 * i + 1] = g(rng);
    for (std::size_t j = 0; j < d; ++j) lat[d * i + j] = g(rng) + 0.3 * j * truth[2 * i] - 0.2 * truth[2 * i + 1];
  }
  const auto before = latent_correlation(lat, d, truth, 2);
  const double a[] = {-3.0, 0.5, 7.0, -0.01}, b[] = {1.0, -4.0, 0.0, 100.0};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) lat[d * i + j] = a[j] * lat[d * i + j] + b[j];
  const auto after = latent_correlation(lat, d, truth, 2);
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(after[c].latent == before[c].latent);
    CHECK(after[c].r == doctest::Approx(before[c].r).epsilon(1e-9));
  }
}

TEST_CASE("mean-image decoder scores the pixel variance at every horizon") {
  const auto data = toy_pendulum(12, 14, 3);
  model::Model<double> m(testing::toy_config());
  const auto stats = pixel_stats(data, 10);
  auto w = m.params().get("theta_e.out.w");
  auto b = m.params().get("theta_e.out.b");
  for (auto& v : w.values()) v = 0.0;
  for (std::size_t i = 0; i < b.numel(); ++i) b[i] = stats.mean_image[i];

  const auto mse = nstep_mse(m, data, kDefaultHorizons);
  REQUIRE(mse.size() == 3);
  for (const auto& e : mse) {
    CHECK(std::abs(e.per_pixel - stats.variance) < 1e-6);
    CHECK(e.per_image == doctest::Approx(e.per_pixel * 16));
  }
  CHECK(stats.variance > 0.0);
}

TEST_CASE("nstep_mse contracts") {
  const auto data = toy_pendulum(5, 12, 4);
  model::Model<float> m(testing::toy_config());
  for (const auto& e : nstep_mse(m, data, kDefaultHorizons)) {
    CHECK(std::isfinite(e.per_pixel));
    CHECK(e.per_pixel >= 0.0);
  }
  CHECK_THROWS_AS(nstep_mse(m, data, {0}), ContractError);
  CHECK_THROWS_AS(nstep_mse(m, data, {12}), ContractError);
  CHECK_NOTHROW(nstep_mse(m, data, {11}));
}

TEST_CASE("strips: three rows of every second frame, clamped and deterministic") {
  const auto data = toy_pendulum(2, 40, 8);
  model::Model<float> m(testing::toy_config());
  const auto a = strip_image(m, data, 1);
  CHECK(a.width == 20 * 4);
  CHECK(a.height == 3 * 4);
  CHECK(encode_pgm(a) == encode_pgm(strip_image(m, data, 1)));
  // Bottom row holds the original frames 0, 2, 4, ...
  CHECK(a.at(8 + 2, 4 * 3 + 1) == data.frame(1, 6)[2 * 4 + 1]);

  const auto back = decode_pgm(encode_pgm(a));
  CHECK(back.width == a.width);
  for (std::size_t i = 0; i < back.pixels.size(); ++i) {
    CHECK(back.pixels[i] >= 0.0f);
    CHECK(back.pixels[i] <= 1.0f);
  }
  CHECK_THROWS_AS(strip_image(m, data, 2), ContractError);
}

TEST_CASE("evaluate is deterministic and its metrics file round-trips") {
  const auto data = toy_pendulum(6, 12, 9);
  model::Model<float> m(testing::toy_config());
  const auto r1 = evaluate(m, data);
  const auto r2 = evaluate(m, data);
  const auto text = r1.to_keyvalues().emit();
  CHECK(text == r2.to_keyvalues().emit());

  const auto kv = KeyValues::parse(text);
  for (const char* key : {"metric.elbo", "metric.kl", "metric.nll", "metric.corr.angle.r", "metric.corr.velocity.r",
                          "metric.corr.angle_trig.r", "metric.mse.1.pixel", "metric.mse.5.pixel",
                          "metric.mse.10.image", "meta.env"}) {
    CHECK_MESSAGE(kv.has(key), key);
  }
  const auto back = MetricsRecord::from_keyvalues(kv);
  CHECK(back.to_keyvalues().emit() == text);
  CHECK(back.channel("velocity").r == r1.channel("velocity").r);
  CHECK(r1.elbo == doctest::Approx(-(r1.nll + r1.kl)));
  for (const auto& c : r1.corr) {
    CHECK(c.r >= 0.0);
    CHECK(c.r <= 1.0);
  }
}
