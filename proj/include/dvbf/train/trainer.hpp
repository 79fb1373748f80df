#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dvbf/env/dataset.hpp"
#include "dvbf/model/checkpoint.hpp"
#include "dvbf/model/model.hpp"
#include "dvbf/objective/objective.hpp"
#include "dvbf/train/optim.hpp"

namespace dvbf::train {

struct TrainConfig {
  std::size_t batch_size = 32;
  long long iterations = 1000;
  // Training window length; 0 uses whole sequences.
  std::size_t window = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 10.0;
  std::uint64_t seed = 0;
  long long checkpoint_every = 0;  // 0: only at the end
  objective::ObjectiveConfig objective;

  void validate() const;
  void store(KeyValues& kv, const std::string& prefix = "train.") const;
  static TrainConfig load(const KeyValues& kv, const std::string& prefix = "train.");
  static std::vector<std::string> keys();
};

// Owns the float model, the optimizer state and the GECO multiplier. Each
// iteration draws its minibatch and noise from derive_seed(seed, iteration),
// so a resumed run continues exactly where a checkpoint left off.
class Trainer {
 public:
  Trainer(const env::SequenceBatch& data, const model::ModelConfig& mcfg, const TrainConfig& cfg);

  // One optimizer step; throws NumericError naming the first non-finite
  // tensor when the loss or a gradient is NaN/Inf.
  objective::ObjectiveReport step();

  long long iteration() const { return iteration_; }
  model::Model<float>& model() { return model_; }
  const model::Model<float>& model() const { return model_; }
  const objective::GecoState& geco() const { return geco_; }
  const TrainConfig& config() const { return cfg_; }

  model::Checkpoint checkpoint() const;
  void restore(const model::Checkpoint& ckpt);

 private:
  const env::SequenceBatch* data_;
  TrainConfig cfg_;
  model::Model<float> model_;
  AdamState<float> adam_;
  objective::GecoState geco_;
  long long iteration_ = 0;
};

struct TrainResult {
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  std::vector<objective::ObjectiveReport> history;
};

// Writes <out_dir>/model.ckpt (refreshed every checkpoint_every iterations
// and at the end) and <out_dir>/train_log.csv with one row per iteration.
// With a resume checkpoint, training continues from its iteration and the
// log is extended.
TrainResult train(const env::SequenceBatch& data, const model::ModelConfig& mcfg, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir, const model::Checkpoint* resume = nullptr,
                  const std::function<void(long long, const objective::ObjectiveReport&)>& progress = {});

// Model rebuilt from a checkpoint's config echo and parameters.
model::Model<float> load_model(const model::Checkpoint& ckpt);

}  // namespace dvbf::train
