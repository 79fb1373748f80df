#pragma once

#include <string>
#include <vector>

#include "dvbf/empower/empower.hpp"
#include "dvbf/env/environment.hpp"
#include "dvbf/eval/eval.hpp"
#include "dvbf/keyvalue.hpp"
#include "dvbf/model/config.hpp"
#include "dvbf/train/trainer.hpp"

namespace dvbf::cli {

// Everything one experiment needs, as "section.key = value" text. Model
// settings start from model.preset sized for the environment; explicit
// model.* keys override it.
struct RunConfig {
  std::string env = "pendulum";
  std::size_t image_size = 16;
  std::size_t sequences = 500;
  std::size_t steps = 40;
  std::uint64_t data_seed = 1;
  env::PendulumConfig pendulum;
  env::BallConfig ball;

  std::string preset = "dvbf-non-shared";
  model::ModelConfig model;
  train::TrainConfig train;  // carries the objective.* section
  eval::EvalConfig eval;
  empower::EmpowerConfig empower;
  std::size_t map_cells = 16;
  std::size_t map_samples = 64;
  std::size_t rollout_agents = 100;
  std::size_t rollout_steps = 80;

  RunConfig();

  // Throws ContractError on unknown keys or invalid values.
  static RunConfig parse(const std::string& text);
  static RunConfig from_keyvalues(const KeyValues& kv);
  KeyValues to_keyvalues() const;
  std::string emit() const { return to_keyvalues().emit(); }

  static std::vector<std::string> keys();
};

}  // namespace dvbf::cli
