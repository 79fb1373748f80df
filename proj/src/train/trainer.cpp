#include "dvbf/train/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "dvbf/errors.hpp"
#include "dvbf/model/batch.hpp"

namespace dvbf::train {

void TrainConfig::validate() const {
  if (iterations <= 0) throw ContractError("train: iterations must be positive");
  if (!(learning_rate > 0)) throw ContractError("train: learning_rate must be positive");
  if (batch_size == 0) throw ContractError("train: batch_size must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0)) {
    throw ContractError("train: adam betas must lie in [0, 1) and eps be positive");
  }
  if (!(grad_clip > 0)) throw ContractError("train: grad_clip must be positive");
  if (checkpoint_every < 0) throw ContractError("train: checkpoint_every must be non-negative");
  if (window == 1) throw ContractError("train: window must be 0 or at least 2");
  objective.validate();
}

void TrainConfig::store(KeyValues& kv, const std::string& p) const {
  kv.set(p + "batch_size", std::to_string(batch_size));
  kv.set(p + "iterations", std::to_string(iterations));
  kv.set(p + "window", std::to_string(window));
  kv.set(p + "learning_rate", learning_rate);
  kv.set(p + "beta1", beta1);
  kv.set(p + "beta2", beta2);
  kv.set(p + "eps", eps);
  kv.set(p + "grad_clip", grad_clip);
  kv.set(p + "seed", std::to_string(seed));
  kv.set(p + "checkpoint_every", std::to_string(checkpoint_every));
  objective.store(kv);
}

TrainConfig TrainConfig::load(const KeyValues& kv, const std::string& p) {
  TrainConfig c;
  const auto integer = [&](const char* key, auto& field) {
    if (kv.has(p + key)) {
      const long long v = kv.get_int(p + key);
      if (v < 0) throw ContractError("key '" + p + key + "' must be non-negative");
      field = static_cast<std::remove_reference_t<decltype(field)>>(v);
    }
  };
  const auto num = [&](const char* key, double& field) {
    if (kv.has(p + key)) field = kv.get_double(p + key);
  };
  integer("batch_size", c.batch_size);
  integer("iterations", c.iterations);
  integer("window", c.window);
  num("learning_rate", c.learning_rate);
  num("beta1", c.beta1);
  num("beta2", c.beta2);
  num("eps", c.eps);
  num("grad_clip", c.grad_clip);
  integer("seed", c.seed);
  integer("checkpoint_every", c.checkpoint_every);
  c.objective = objective::ObjectiveConfig::load(kv);
  c.validate();
  return c;
}

std::vector<std::string> TrainConfig::keys() {
  KeyValues kv;
  TrainConfig{}.store(kv, "");
  std::vector<std::string> out;
  for (const auto& [k, v] : kv.entries())
    if (k.rfind("objective.", 0) != 0) out.push_back(k);
  return out;
}

Trainer::Trainer(const env::SequenceBatch& data, const model::ModelConfig& mcfg, const TrainConfig& cfg)
    : data_(&data), cfg_(cfg), model_(mcfg), adam_(make_adam_state(model_.params())) {
  cfg_.validate();
  data.validate();
  if (data.frame_size() != mcfg.obs_dim() || data.control_dim != mcfg.control_dim) {
    throw ContractError("train: dataset frames/controls do not match the model configuration");
  }
  if (data.steps < 2) throw ContractError("train: sequences need at least two steps");
  if (cfg_.window > data.steps) throw ContractError("train: window longer than the sequences");
  geco_.lambda = cfg_.objective.geco_lambda0;
}

objective::ObjectiveReport Trainer::step() {
  using Tape = diff::Tape<float>;
  const long long it = iteration_ + 1;
  std::mt19937_64 rng(env::derive_seed(cfg_.seed, static_cast<std::uint64_t>(it)));

  // Distinct sequences when the dataset is large enough (partial Fisher-Yates).
  std::vector<std::size_t> order(data_->n_seqs);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> picks;
  for (std::size_t i = 0; i < cfg_.batch_size; ++i) {
    const std::size_t k = i % order.size();
    if (k == 0 && i > 0) std::iota(order.begin(), order.end(), std::size_t{0});
    std::uniform_int_distribution<std::size_t> pick(k, order.size() - 1);
    std::swap(order[k], order[pick(rng)]);
    picks.push_back(order[k]);
  }
  const std::size_t window = cfg_.window == 0 ? data_->steps : cfg_.window;
  std::uniform_int_distribution<std::size_t> start(0, data_->steps - window);
  const std::size_t t0 = start(rng);
  const auto seq = model::gather<float>(*data_, picks, t0, window);

  const auto& params = model_.params();
  params.zero_grad();
  const auto culprit = [&params]() -> std::string {
    for (const auto& e : params.entries())
      if (!diff::all_finite(e.tensor)) return "parameter " + e.name;
    return "loss";
  };
  objective::ObjectiveReport report;
  {
    Tape tape;
    Tape::Scope scope(tape);
    objective::Objective<float> obj;
    try {
      const auto filtered = model_.filter(seq, &rng);
      obj = objective::compute_objective(model_, filtered, seq, it, cfg_.objective, geco_);
    } catch (const DomainError& e) {
      // NaN variances fail the positivity checks before the loss exists.
      const std::string who = culprit();
      if (who == "loss") throw;
      throw NumericError("non-finite " + who + " at iteration " + std::to_string(it) + " (" + e.what() + ")");
    }
    report = obj.report;
    if (!diff::all_finite(obj.loss)) {
      throw NumericError("non-finite " + culprit() + " at iteration " + std::to_string(it) + " (nll " +
                         format_double(report.recon_nll) + ", kl " + format_double(report.kl_raw) + ")");
    }
    tape.backward(obj.loss);
  }
  for (const auto& e : params.entries()) {
    for (float g : e.tensor.grads()) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient of " + e.name + " at iteration " + std::to_string(it));
      }
    }
  }
  clip_grad_norm(params, cfg_.grad_clip);
  adam_step(params, adam_, AdamConfig{cfg_.learning_rate, cfg_.beta1, cfg_.beta2, cfg_.eps});
  iteration_ = it;
  return report;
}

model::Checkpoint Trainer::checkpoint() const {
  model::Checkpoint ckpt;
  model_.config().store(ckpt.config);
  cfg_.store(ckpt.config);
  ckpt.config.set("state.iteration", std::to_string(iteration_));
  ckpt.config.set("state.adam_step", std::to_string(adam_.step));
  ckpt.config.set("state.geco_lambda", geco_.lambda);
  ckpt.config.set("state.geco_ema", geco_.constraint_ema);
  model::store_params(ckpt, model_.params());
  const auto& entries = model_.params().entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    ckpt.put({"adam.m." + entries[p].name, entries[p].tensor.shape(), adam_.m[p]});
    ckpt.put({"adam.v." + entries[p].name, entries[p].tensor.shape(), adam_.v[p]});
  }
  return ckpt;
}

void Trainer::restore(const model::Checkpoint& ckpt) {
  model::load_params(ckpt, model_.params());
  const auto& entries = model_.params().entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    const auto* m = ckpt.find("adam.m." + entries[p].name);
    const auto* v = ckpt.find("adam.v." + entries[p].name);
    if (m == nullptr || v == nullptr || m->data.size() != adam_.m[p].size() || v->data.size() != adam_.v[p].size()) {
      throw IoError("checkpoint: missing optimizer state for '" + entries[p].name + "'");
    }
    adam_.m[p] = m->data;
    adam_.v[p] = v->data;
  }
  iteration_ = ckpt.config.get_int("state.iteration");
  adam_.step = ckpt.config.get_int("state.adam_step");
  geco_.lambda = ckpt.config.get_double("state.geco_lambda");
  geco_.constraint_ema = ckpt.config.get_double("state.geco_ema");
}

TrainResult train(const env::SequenceBatch& data, const model::ModelConfig& mcfg, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir, const model::Checkpoint* resume,
                  const std::function<void(long long, const objective::ObjectiveReport&)>& progress) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  Trainer trainer(data, mcfg, cfg);
  if (resume != nullptr) trainer.restore(*resume);

  TrainResult result;
  result.checkpoint = out_dir / "model.ckpt";
  result.log = out_dir / "train_log.csv";
  std::ofstream log(result.log, resume != nullptr ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write " + result.log.string());
  if (resume == nullptr) log << objective::csv_header() << '\n';

  while (trainer.iteration() < cfg.iterations) {
    const auto report = trainer.step();
    const long long it = trainer.iteration();
    result.history.push_back(report);
    log << objective::csv_row(it, report) << '\n';
    if (progress) progress(it, report);
    if (cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0 && it < cfg.iterations) {
      log.flush();
      model::write_checkpoint(trainer.checkpoint(), result.checkpoint);
    }
  }
  log.flush();
  if (!log) throw IoError("failed writing " + result.log.string());
  model::write_checkpoint(trainer.checkpoint(), result.checkpoint);
  return result;
}

model::Model<float> load_model(const model::Checkpoint& ckpt) {
  model::Model<float> m(model::ModelConfig::load(ckpt.config));
  model::load_params(ckpt, m.params());
  return m;
}

}  // namespace dvbf::train
