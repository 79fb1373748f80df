#include "dvbf/cli/run_config.hpp"

#include <algorithm>
#include <set>

#include "dvbf/errors.hpp"

namespace dvbf::cli {

namespace {

void store_env(const RunConfig& c, KeyValues& kv) {
  kv.set("env.name", c.env);
  kv.set("env.image_size", std::to_string(c.image_size));
  kv.set("env.sequences", std::to_string(c.sequences));
  kv.set("env.steps", std::to_string(c.steps));
  kv.set("env.seed", std::to_string(c.data_seed));
  kv.set("env.pendulum.friction", c.pendulum.friction);
  kv.set("env.pendulum.dt", c.pendulum.dt);
  kv.set("env.pendulum.max_torque", c.pendulum.max_torque);
  kv.set("env.pendulum.substeps", std::to_string(c.pendulum.substeps));
  kv.set("env.ball.dt", c.ball.dt);
  kv.set("env.ball.restitution", c.ball.restitution);
  kv.set("env.ball.damping", c.ball.damping);
  kv.set("env.ball.max_force", c.ball.max_force);
}

std::size_t size_value(const KeyValues& kv, const std::string& key, std::size_t fallback) {
  if (!kv.has(key)) return fallback;
  const long long v = kv.get_int(key);
  if (v < 0) throw ContractError("key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

double num_value(const KeyValues& kv, const std::string& key, double fallback) {
  return kv.has(key) ? kv.get_double(key) : fallback;
}

std::vector<std::string> with_prefix(const std::string& prefix, const std::vector<std::string>& keys) {
  std::vector<std::string> out;
  for (const auto& k : keys) out.push_back(prefix + k);
  return out;
}

}  // namespace

RunConfig::RunConfig() { model = model::preset(preset, env, image_size); }

std::vector<std::string> RunConfig::keys() {
  KeyValues env_kv;
  store_env(RunConfig{}, env_kv);
  std::vector<std::string> out;
  for (const auto& [k, v] : env_kv.entries()) out.push_back(k);
  out.push_back("model.preset");
  for (const auto& k : with_prefix("model.", model::ModelConfig::keys())) out.push_back(k);
  for (const auto& k : with_prefix("train.", train::TrainConfig::keys())) out.push_back(k);
  for (const auto& k : with_prefix("objective.", objective::ObjectiveConfig::keys())) out.push_back(k);
  out.push_back("eval.seed");
  out.push_back("eval.horizons");
  for (const auto& k : with_prefix("empower.", empower::EmpowerConfig::keys())) out.push_back(k);
  for (const char* k : {"empower.map_cells", "empower.map_samples", "empower.rollout_agents", "empower.rollout_steps"})
    out.push_back(k);
  return out;
}

RunConfig RunConfig::from_keyvalues(const KeyValues& kv) {
  const auto known = keys();
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [k, v] : kv.entries()) {
    if (!allowed.count(k)) throw ContractError("unknown config key '" + k + "'");
  }
  RunConfig c;
  if (kv.has("env.name")) c.env = kv.get("env.name");
  if (c.env != "pendulum" && c.env != "ball") {
    throw ContractError("env.name must be pendulum or ball, got '" + c.env + "'");
  }
  c.image_size = size_value(kv, "env.image_size", c.env == "ball" ? c.ball.image_size : c.pendulum.image_size);
  c.sequences = size_value(kv, "env.sequences", c.sequences);
  c.steps = size_value(kv, "env.steps", c.steps);
  c.data_seed = kv.has("env.seed") ? std::stoull(kv.get("env.seed")) : c.data_seed;
  c.pendulum.friction = num_value(kv, "env.pendulum.friction", c.pendulum.friction);
  c.pendulum.dt = num_value(kv, "env.pendulum.dt", c.pendulum.dt);
  c.pendulum.max_torque = num_value(kv, "env.pendulum.max_torque", c.pendulum.max_torque);
  c.pendulum.substeps = size_value(kv, "env.pendulum.substeps", c.pendulum.substeps);
  c.ball.dt = num_value(kv, "env.ball.dt", c.ball.dt);
  c.ball.restitution = num_value(kv, "env.ball.restitution", c.ball.restitution);
  c.ball.damping = num_value(kv, "env.ball.damping", c.ball.damping);
  c.ball.max_force = num_value(kv, "env.ball.max_force", c.ball.max_force);
  c.pendulum.image_size = c.ball.image_size = c.image_size;
  c.pendulum.validate();
  c.ball.validate();

  if (kv.has("model.preset")) c.preset = kv.get("model.preset");
  // Preset first, then explicit overrides.
  KeyValues mkv;
  model::preset(c.preset, c.env, c.image_size).store(mkv);
  KeyValues merged;
  for (const auto& [k, v] : mkv.entries()) merged.set(k, kv.has(k) ? kv.get(k) : v);
  c.model = model::ModelConfig::load(merged);

  c.train = train::TrainConfig::load(kv);
  if (kv.has("eval.seed")) c.eval.seed = std::stoull(kv.get("eval.seed"));
  if (kv.has("eval.horizons")) c.eval.horizons = model::parse_sizes(kv.get("eval.horizons"));
  c.eval.env_name = c.env;
  c.empower = empower::EmpowerConfig::load(kv);
  c.map_cells = size_value(kv, "empower.map_cells", c.map_cells);
  c.map_samples = size_value(kv, "empower.map_samples", c.map_samples);
  c.rollout_agents = size_value(kv, "empower.rollout_agents", c.rollout_agents);
  c.rollout_steps = size_value(kv, "empower.rollout_steps", c.rollout_steps);
  return c;
}

RunConfig RunConfig::parse(const std::string& text) { return from_keyvalues(KeyValues::parse(text)); }

KeyValues RunConfig::to_keyvalues() const {
  KeyValues kv;
  store_env(*this, kv);
  kv.set("model.preset", preset);
  model.store(kv);
  train.store(kv);
  kv.set("eval.seed", std::to_string(eval.seed));
  kv.set("eval.horizons", model::join_sizes(eval.horizons));
  empower.store(kv);
  kv.set("empower.map_cells", std::to_string(map_cells));
  kv.set("empower.map_samples", std::to_string(map_samples));
  kv.set("empower.rollout_agents", std::to_string(rollout_agents));
  kv.set("empower.rollout_steps", std::to_string(rollout_steps));
  return kv;
}

}  // namespace dvbf::cli
