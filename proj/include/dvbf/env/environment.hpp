#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dvbf::env {

struct PendulumState {
  double psi = 0.0;      // radians, wrapped to (-pi, pi]; 0 is upright
  double psi_dot = 0.0;  // rad/s
};

struct PendulumConfig {
  double mass = 1.0;
  double length = 1.0;
  double gravity = 9.8;
  double friction = 0.5;
  double dt = 0.05;
  double max_torque = 2.0;
  // Semi-implicit Euler sub-steps per dt.
  std::size_t substeps = 4;
  std::size_t image_size = 16;
  double max_initial_speed = 2.0;

  void validate() const;
};

struct BallState {
  double x = 0.0, y = 0.0;
  double vx = 0.0, vy = 0.0;
};

struct BallConfig {
  double box_side = 10.0;
  double ball_radius = 1.0;
  double mass = 1.0;
  double dt = 0.05;
  double restitution = 0.8;
  double max_force = 20.0;
  // Linear velocity damping (1/s), the rolling-friction stand-in.
  double damping = 1.0;
  std::size_t image_size = 64;
  double initial_speed_sd = 1.0;

  void validate() const;
};

double wrap_angle(double psi);

// psi'' from m l^2 psi'' = -mu psi' + m g l sin(psi) + u.
double pendulum_acceleration(PendulumState s, double torque, const PendulumConfig& cfg);

// cfg.substeps semi-implicit Euler updates of length dt / substeps:
// psi_dot += h * psi''; psi = wrap(psi + h * psi_dot).
PendulumState pendulum_step(PendulumState s, double torque, const PendulumConfig& cfg);

// Gaussian blob over the pendulum mass, row-major size x size, values in [0, 1].
std::vector<float> render_pendulum(PendulumState s, std::size_t size = 16);

// Semi-implicit Euler with impulse reflection at the four walls.
BallState ball_step(BallState s, double fx, double fy, const BallConfig& cfg);

// Anti-aliased filled disc, row-major size x size, values in [0, 1].
std::vector<float> render_ball(BallState s, const BallConfig& cfg, std::size_t size);

// Distance from the ball's edge to the closest wall.
double wall_distance(const BallState& s, const BallConfig& cfg);

// Uniform interface used by dataset generation and closed-loop control.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::string name() const = 0;
  virtual std::size_t control_dim() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t image_size() const = 0;
  virtual double control_bound() const = 0;
  virtual std::vector<double> initial_state(std::mt19937_64& rng) const = 0;
  virtual std::vector<double> step(std::span<const double> state, std::span<const double> control) const = 0;
  virtual std::vector<float> render(std::span<const double> state) const = 0;
};

class PendulumEnv final : public Environment {
 public:
  explicit PendulumEnv(PendulumConfig cfg = {});
  std::string name() const override { return "pendulum"; }
  std::size_t control_dim() const override { return 1; }
  std::size_t state_dim() const override { return 2; }
  std::size_t image_size() const override { return cfg_.image_size; }
  double control_bound() const override { return cfg_.max_torque; }
  std::vector<double> initial_state(std::mt19937_64& rng) const override;
  std::vector<double> step(std::span<const double> state, std::span<const double> control) const override;
  std::vector<float> render(std::span<const double> state) const override;
  const PendulumConfig& config() const { return cfg_; }

 private:
  PendulumConfig cfg_;
};

class BallEnv final : public Environment {
 public:
  explicit BallEnv(BallConfig cfg = {});
  std::string name() const override { return "ball"; }
  std::size_t control_dim() const override { return 2; }
  std::size_t state_dim() const override { return 4; }
  std::size_t image_size() const override { return cfg_.image_size; }
  double control_bound() const override { return cfg_.max_force; }
  std::vector<double> initial_state(std::mt19937_64& rng) const override;
  std::vector<double> step(std::span<const double> state, std::span<const double> control) const override;
  std::vector<float> render(std::span<const double> state) const override;
  const BallConfig& config() const { return cfg_; }

 private:
  BallConfig cfg_;
};

std::unique_ptr<Environment> make_environment(const std::string& name, const PendulumConfig& pendulum,
                                              const BallConfig& ball);

// splitmix64 mix; used to derive per-sequence / per-agent seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace dvbf::env
