#include "dvbf/model/config.hpp"

#include <sstream>

#include "dvbf/errors.hpp"

namespace dvbf::model {

std::string to_string(TransitionKind kind) {
  switch (kind) {
    case TransitionKind::kMlp: return "mlp";
    case TransitionKind::kLocallyLinear: return "locally-linear";
    case TransitionKind::kSlds: return "slds";
  }
  return "?";
}

TransitionKind parse_transition(const std::string& name) {
  if (name == "mlp") return TransitionKind::kMlp;
  if (name == "locally-linear") return TransitionKind::kLocallyLinear;
  if (name == "slds") return TransitionKind::kSlds;
  throw ContractError("unknown transition '" + name + "' (expected mlp, locally-linear or slds)");
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size()) throw ContractError("'" + s + "' is not a comma-separated size list");
    out.push_back(v);
  }
  return out;
}

void ModelConfig::validate() const {
  if (channels == 0 || height == 0 || width == 0) throw ContractError("model: empty observation shape");
  if (latent_dim == 0 || control_dim == 0) throw ContractError("model: latent_dim and control_dim must be positive");
  if (encoder_filters.empty() || decoder_filters.empty()) throw ContractError("model: need conv layers");
  if (decoder_filters.back() != channels) {
    throw ContractError("model: last decoder filter count must equal the channel count");
  }
  const std::size_t up = std::size_t{1} << decoder_filters.size();
  if (height % up != 0 || width % up != 0) {
    throw ContractError("model: image side must be divisible by 2^(decoder layers)");
  }
  if (decoder_bottleneck % ((height / up) * (width / up)) != 0) {
    throw ContractError("model: decoder bottleneck does not reshape to the first transposed conv grid");
  }
  if (transition == TransitionKind::kSlds && slds_bases < 2) throw ContractError("model: SLDS needs K >= 2");
  if (joint_posterior && shared_mean) throw ContractError("model: joint posterior has no transition to share");
  if (!(variance_floor > 0)) throw ContractError("model: variance_floor must be positive");
}

void ModelConfig::store(KeyValues& kv, const std::string& p) const {
  kv.set(p + "channels", std::to_string(channels));
  kv.set(p + "height", std::to_string(height));
  kv.set(p + "width", std::to_string(width));
  kv.set(p + "latent_dim", std::to_string(latent_dim));
  kv.set(p + "control_dim", std::to_string(control_dim));
  kv.set(p + "encoder_filters", join_sizes(encoder_filters));
  kv.set(p + "encoder_hidden", std::to_string(encoder_hidden));
  kv.set(p + "decoder_hidden", std::to_string(decoder_hidden));
  kv.set(p + "decoder_bottleneck", std::to_string(decoder_bottleneck));
  kv.set(p + "decoder_filters", join_sizes(decoder_filters));
  kv.set(p + "transition", to_string(transition));
  kv.set(p + "transition_hidden", std::to_string(transition_hidden));
  kv.set(p + "hyper_hidden", std::to_string(hyper_hidden));
  kv.set(p + "slds_bases", std::to_string(slds_bases));
  kv.set(p + "shared_mean", shared_mean ? "true" : "false");
  kv.set(p + "joint_posterior", joint_posterior ? "true" : "false");
  kv.set(p + "variance_floor", variance_floor);
  kv.set(p + "initial_logvar", initial_logvar);
  kv.set(p + "init_seed", std::to_string(init_seed));
}

std::vector<std::string> ModelConfig::keys() {
  KeyValues kv;
  ModelConfig{}.store(kv, "");
  std::vector<std::string> out;
  for (const auto& [k, v] : kv.entries()) out.push_back(k);
  return out;
}

ModelConfig ModelConfig::load(const KeyValues& kv, const std::string& p) {
  ModelConfig c;
  const auto size = [&](const char* key, std::size_t& field) {
    if (kv.has(p + key)) {
      const long long v = kv.get_int(p + key);
      if (v < 0) throw ContractError("key '" + p + key + "' must be non-negative");
      field = static_cast<std::size_t>(v);
    }
  };
  const auto flag = [&](const char* key, bool& field) {
    if (kv.has(p + key)) field = kv.get_bool(p + key);
  };
  size("channels", c.channels);
  size("height", c.height);
  size("width", c.width);
  size("latent_dim", c.latent_dim);
  size("control_dim", c.control_dim);
  if (kv.has(p + "encoder_filters")) c.encoder_filters = parse_sizes(kv.get(p + "encoder_filters"));
  size("encoder_hidden", c.encoder_hidden);
  size("decoder_hidden", c.decoder_hidden);
  size("decoder_bottleneck", c.decoder_bottleneck);
  if (kv.has(p + "decoder_filters")) c.decoder_filters = parse_sizes(kv.get(p + "decoder_filters"));
  if (kv.has(p + "transition")) c.transition = parse_transition(kv.get(p + "transition"));
  size("transition_hidden", c.transition_hidden);
  size("hyper_hidden", c.hyper_hidden);
  size("slds_bases", c.slds_bases);
  flag("shared_mean", c.shared_mean);
  flag("joint_posterior", c.joint_posterior);
  if (kv.has(p + "variance_floor")) c.variance_floor = kv.get_double(p + "variance_floor");
  if (kv.has(p + "initial_logvar")) c.initial_logvar = kv.get_double(p + "initial_logvar");
  if (kv.has(p + "init_seed")) c.init_seed = static_cast<std::uint64_t>(kv.get_int(p + "init_seed"));
  c.validate();
  return c;
}

ModelConfig preset(const std::string& name, const std::string& env, std::size_t image_size) {
  ModelConfig c;
  if (env == "pendulum") {
    c.control_dim = 1;
  } else if (env == "ball") {
    c.control_dim = 2;
  } else {
    throw ContractError("unknown environment '" + env + "'");
  }
  c.height = c.width = image_size;
  // One stride-2 layer per halving down to a 1x1 grid; widths follow the
  // 16x16 (4 layers) and 64x64 (6 layers) tables.
  std::size_t layers = 0;
  while ((std::size_t{1} << layers) < image_size) ++layers;
  if ((std::size_t{1} << layers) != image_size) throw ContractError("preset: image size must be a power of two");
  if (layers == 4) {
    c.encoder_filters = {4, 8, 16, 64};
    c.decoder_bottleneck = 64;
    c.decoder_filters = {16, 8, 4, 1};
  } else {
    c.encoder_filters.clear();
    c.decoder_filters.clear();
    for (std::size_t i = 0; i < layers; ++i) c.encoder_filters.push_back(std::size_t{4} << i);
    c.decoder_bottleneck = c.encoder_filters.back();
    for (std::size_t i = layers; i-- > 0;) c.decoder_filters.push_back(i == 0 ? 1 : std::size_t{4} << (i - 1));
  }

  if (name == "dvbf-non-shared") {
    c.transition = TransitionKind::kMlp;
  } else if (name == "dvbf-slds") {
    c.transition = TransitionKind::kSlds;
    c.shared_mean = true;
  } else if (name == "deep-kalman-filter") {
    c.transition = TransitionKind::kLocallyLinear;
    c.joint_posterior = true;
  } else {
    throw ContractError("unknown model preset '" + name +
                        "' (expected dvbf-non-shared, dvbf-slds or deep-kalman-filter)");
  }
  c.validate();
  return c;
}

}  // namespace dvbf::model
