#include "dvbf/env/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dvbf/errors.hpp"

namespace dvbf::env {

void PendulumConfig::validate() const {
  if (!(mass > 0 && length > 0 && gravity > 0 && dt > 0)) {
    throw ContractError("pendulum: mass, length, gravity and dt must be positive");
  }
  if (friction < 0) throw ContractError("pendulum: friction must be non-negative");
  if (max_torque < 0) throw ContractError("pendulum: max_torque must be non-negative");
  if (image_size < 4) throw ContractError("pendulum: image_size must be at least 4");
  if (substeps == 0) throw ContractError("pendulum: substeps must be positive");
}

void BallConfig::validate() const {
  if (!(ball_radius > 0 && 2 * ball_radius < box_side)) {
    throw ContractError("ball: need 0 < 2*radius < box_side");
  }
  if (!(dt > 0 && mass > 0)) throw ContractError("ball: dt and mass must be positive");
  if (restitution < 0 || restitution > 1) throw ContractError("ball: restitution must lie in [0, 1]");
  if (max_force < 0 || damping < 0) throw ContractError("ball: max_force and damping must be non-negative");
  if (image_size < 4) throw ContractError("ball: image_size must be at least 4");
}

double wrap_angle(double psi) {
  constexpr double pi = std::numbers::pi;
  double w = std::fmod(psi + pi, 2 * pi);
  if (w < 0) w += 2 * pi;
  w -= pi;
  // fmod maps +pi to -pi; the interval is (-pi, pi].
  return w <= -pi ? pi : w;
}

PendulumState pendulum_step(PendulumState s, double torque, const PendulumConfig& cfg) {
  if (std::abs(torque) > cfg.max_torque) {
    throw ContractError("pendulum_step: |torque| " + std::to_string(torque) + " exceeds bound " +
                        std::to_string(cfg.max_torque));
  }
  const double h = cfg.dt / static_cast<double>(cfg.substeps);
  for (std::size_t i = 0; i < cfg.substeps; ++i) {
    s.psi_dot += h * pendulum_acceleration(s, torque, cfg);
    s.psi = wrap_angle(s.psi + h * s.psi_dot);
  }
  return s;
}

double pendulum_acceleration(PendulumState s, double torque, const PendulumConfig& cfg) {
  return (-cfg.friction * s.psi_dot + cfg.mass * cfg.gravity * cfg.length * std::sin(s.psi) + torque) /
         (cfg.mass * cfg.length * cfg.length);
}

std::vector<float> render_pendulum(PendulumState s, std::size_t size) {
  const double unit = static_cast<double>(size) / 16.0;
  const double centre = (static_cast<double>(size) - 1.0) / 2.0;
  const double radius = 5.5 * unit;
  const double sigma = 1.2 * unit;
  const double cx = centre + radius * std::sin(s.psi);
  const double cy = centre - radius * std::cos(s.psi);
  std::vector<float> img(size * size);
  for (std::size_t row = 0; row < size; ++row) {
    for (std::size_t col = 0; col < size; ++col) {
      const double dx = static_cast<double>(col) - cx;
      const double dy = static_cast<double>(row) - cy;
      img[row * size + col] = static_cast<float>(std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)));
    }
  }
  return img;
}

BallState ball_step(BallState s, double fx, double fy, const BallConfig& cfg) {
  if (std::abs(fx) > cfg.max_force || std::abs(fy) > cfg.max_force) {
    throw ContractError("ball_step: force exceeds bound " + std::to_string(cfg.max_force));
  }
  BallState n;
  n.vx = s.vx + cfg.dt * (fx / cfg.mass - cfg.damping * s.vx);
  n.vy = s.vy + cfg.dt * (fy / cfg.mass - cfg.damping * s.vy);
  n.x = s.x + cfg.dt * n.vx;
  n.y = s.y + cfg.dt * n.vy;
  const double lo = cfg.ball_radius;
  const double hi = cfg.box_side - cfg.ball_radius;
  const auto reflect = [&](double& p, double& v) {
    if (p < lo) {
      p = lo;
      if (v < 0) v = -cfg.restitution * v;
    } else if (p > hi) {
      p = hi;
      if (v > 0) v = -cfg.restitution * v;
    }
  };
  reflect(n.x, n.vx);
  reflect(n.y, n.vy);
  return n;
}

std::vector<float> render_ball(BallState s, const BallConfig& cfg, std::size_t size) {
  constexpr int kSub = 4;
  const double scale = static_cast<double>(size) / cfg.box_side;
  const double cx = s.x * scale;
  const double cy = s.y * scale;
  const double r = cfg.ball_radius * scale;
  const double r2 = r * r;
  std::vector<float> img(size * size, 0.0f);
  const auto lo = [&](double c) { return static_cast<std::ptrdiff_t>(std::max(0.0, std::floor(c - r - 1))); };
  const auto hi = [&](double c) {
    return static_cast<std::ptrdiff_t>(std::min(static_cast<double>(size), std::ceil(c + r + 1)));
  };
  for (std::ptrdiff_t row = lo(cy); row < hi(cy); ++row) {
    for (std::ptrdiff_t col = lo(cx); col < hi(cx); ++col) {
      int inside = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double px = static_cast<double>(col) + (sx + 0.5) / kSub;
          const double py = static_cast<double>(row) + (sy + 0.5) / kSub;
          if ((px - cx) * (px - cx) + (py - cy) * (py - cy) <= r2) ++inside;
        }
      }
      img[static_cast<std::size_t>(row) * size + static_cast<std::size_t>(col)] =
          static_cast<float>(inside) / static_cast<float>(kSub * kSub);
    }
  }
  return img;
}

double wall_distance(const BallState& s, const BallConfig& cfg) {
  const double hi = cfg.box_side - cfg.ball_radius;
  const double lo = cfg.ball_radius;
  return std::min({s.x - lo, hi - s.x, s.y - lo, hi - s.y});
}

PendulumEnv::PendulumEnv(PendulumConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::vector<double> PendulumEnv::initial_state(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> speed(-cfg_.max_initial_speed, cfg_.max_initial_speed);
  const double psi = wrap_angle(angle(rng));
  const double psi_dot = speed(rng);
  return {psi, psi_dot};
}

std::vector<double> PendulumEnv::step(std::span<const double> state, std::span<const double> control) const {
  const auto n = pendulum_step({state[0], state[1]}, control[0], cfg_);
  return {n.psi, n.psi_dot};
}

std::vector<float> PendulumEnv::render(std::span<const double> state) const {
  return render_pendulum({state[0], state[1]}, cfg_.image_size);
}

BallEnv::BallEnv(BallConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::vector<double> BallEnv::initial_state(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> pos(cfg_.ball_radius, cfg_.box_side - cfg_.ball_radius);
  std::normal_distribution<double> vel(0.0, cfg_.initial_speed_sd);
  const double x = pos(rng);
  const double y = pos(rng);
  const double vx = vel(rng);
  const double vy = vel(rng);
  return {x, y, vx, vy};
}

std::vector<double> BallEnv::step(std::span<const double> state, std::span<const double> control) const {
  const auto n = ball_step({state[0], state[1], state[2], state[3]}, control[0], control[1], cfg_);
  return {n.x, n.y, n.vx, n.vy};
}

std::vector<float> BallEnv::render(std::span<const double> state) const {
  return render_ball({state[0], state[1], state[2], state[3]}, cfg_, cfg_.image_size);
}

std::unique_ptr<Environment> make_environment(const std::string& name, const PendulumConfig& pendulum,
                                              const BallConfig& ball) {
  if (name == "pendulum") return std::make_unique<PendulumEnv>(pendulum);
  if (name == "ball") return std::make_unique<BallEnv>(ball);
  throw ContractError("unknown environment '" + name + "' (expected pendulum or ball)");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed ^ (index + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace dvbf::env
