#include "dvbf/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dvbf/binary_io.hpp"
#include "dvbf/diff/tape.hpp"
#include "dvbf/errors.hpp"
#include "dvbf/model/batch.hpp"
#include "dvbf/objective/objective.hpp"
#include "dvbf/train/trainer.hpp"

namespace dvbf::eval {

namespace {

constexpr std::size_t kChunk = 64;

std::vector<std::size_t> chunk_indices(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
  return idx;
}

double pearson_abs(std::span<const double> a, std::size_t a_stride, std::size_t a_col, std::span<const double> b,
                   std::size_t b_stride, std::size_t b_col, std::size_t n) {
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i * a_stride + a_col];
    mb += b[i * b_stride + b_col];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i * a_stride + a_col] - ma;
    const double db = b[i * b_stride + b_col] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::min(1.0, std::abs(sab) / std::sqrt(saa * sbb));
}

}  // namespace

std::vector<Correlation> latent_correlation(std::span<const double> latents, std::size_t latent_dim,
                                            std::span<const double> truths, std::size_t truth_dim) {
  if (latent_dim == 0 || truth_dim == 0) throw ContractError("latent_correlation: empty dimension");
  if (latents.size() % latent_dim != 0 || truths.size() % truth_dim != 0 ||
      latents.size() / latent_dim != truths.size() / truth_dim) {
    throw DimensionError("latent_correlation: latents and truths disagree on the sample count");
  }
  const std::size_t n = latents.size() / latent_dim;
  if (n < 2) throw ContractError("latent_correlation: need at least 2 samples, got " + std::to_string(n));
  std::vector<Correlation> out(truth_dim);
  for (std::size_t c = 0; c < truth_dim; ++c) {
    for (std::size_t d = 0; d < latent_dim; ++d) {
      const double r = pearson_abs(latents, latent_dim, d, truths, truth_dim, c, n);
      if (r > out[c].r) out[c] = {r, d};
    }
  }
  return out;
}

template <typename T>
std::vector<double> filtered_means(const model::Model<T>& m, const env::SequenceBatch& data) {
  typename diff::Tape<T>::NoGrad no_grad;
  const std::size_t nz = m.config().latent_dim, steps = data.steps;
  std::vector<double> out(std::size_t{data.n_seqs} * steps * nz);
  for (std::size_t begin = 0; begin < data.n_seqs; begin += kChunk) {
    const std::size_t end = std::min<std::size_t>(data.n_seqs, begin + kChunk);
    const auto seq = model::gather<T>(data, chunk_indices(begin, end), 0, steps);
    const auto f = m.filter(seq, nullptr);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto& mean = f.posteriors[t].mean;
      for (std::size_t b = 0; b < end - begin; ++b)
        for (std::size_t d = 0; d < nz; ++d)
          out[((begin + b) * steps + t) * nz + d] = static_cast<double>(mean[b * nz + d]);
    }
  }
  return out;
}

template <typename T>
std::vector<MseEntry> nstep_mse(const model::Model<T>& m, const env::SequenceBatch& data,
                                const std::vector<std::size_t>& horizons) {
  if (horizons.empty()) throw ContractError("nstep_mse: no horizons");
  const std::size_t steps = data.steps, obs = data.frame_size();
  std::size_t max_h = 0;
  for (std::size_t h : horizons) {
    if (h == 0 || h >= steps) {
      throw ContractError("nstep_mse: horizon " + std::to_string(h) + " must lie in [1, " + std::to_string(steps) +
                          ")");
    }
    max_h = std::max(max_h, h);
  }
  typename diff::Tape<T>::NoGrad no_grad;
  std::vector<double> sq(horizons.size(), 0.0);
  for (std::size_t begin = 0; begin < data.n_seqs; begin += kChunk) {
    const std::size_t end = std::min<std::size_t>(data.n_seqs, begin + kChunk);
    const std::size_t b = end - begin;
    const auto seq = model::gather<T>(data, chunk_indices(begin, end), 0, steps);
    const auto f = m.filter(seq, nullptr);
    for (std::size_t t = 0; t + 1 < steps; ++t) {
      diff::Tensor<T> z = f.posteriors[t].mean;
      for (std::size_t h = 1; h <= max_h && t + h < steps; ++h) {
        z = m.prior_transition(z, seq.control(t + h - 1)).mean;
        if (t + h < max_h) continue;
        const auto it = std::find(horizons.begin(), horizons.end(), h);
        if (it == horizons.end()) continue;
        const auto decoded = m.decode(z);
        const auto target = seq.frame(t + h);
        double acc = 0.0;
        for (std::size_t i = 0; i < b * obs; ++i) {
          const double d = static_cast<double>(decoded[i]) - static_cast<double>(target[i]);
          acc += d * d;
        }
        sq[static_cast<std::size_t>(it - horizons.begin())] += acc;
      }
    }
  }
  const double count = static_cast<double>(data.n_seqs) * static_cast<double>(steps - max_h) * static_cast<double>(obs);
  std::vector<MseEntry> out;
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    const double px = sq[i] / count;
    out.push_back({horizons[i], px, px * static_cast<double>(obs)});
  }
  return out;
}

PixelStats pixel_stats(const env::SequenceBatch& data, std::size_t first) {
  if (first >= data.steps) throw ContractError("pixel_stats: no frames after the first index");
  const std::size_t obs = data.frame_size();
  PixelStats s;
  s.mean_image.assign(obs, 0.0);
  const double n = static_cast<double>(data.n_seqs) * static_cast<double>(data.steps - first);
  for (std::size_t q = 0; q < data.n_seqs; ++q)
    for (std::size_t t = first; t < data.steps; ++t) {
      const auto f = data.frame(q, t);
      for (std::size_t i = 0; i < obs; ++i) s.mean_image[i] += f[i];
    }
  for (double& v : s.mean_image) v /= n;
  double acc = 0.0;
  for (std::size_t q = 0; q < data.n_seqs; ++q)
    for (std::size_t t = first; t < data.steps; ++t) {
      const auto f = data.frame(q, t);
      for (std::size_t i = 0; i < obs; ++i) {
        const double d = f[i] - s.mean_image[i];
        acc += d * d;
      }
    }
  s.variance = acc / (n * static_cast<double>(obs));
  return s;
}

template <typename T>
GrayImage strip_image(const model::Model<T>& m, const env::SequenceBatch& data, std::size_t seq) {
  if (seq >= data.n_seqs) throw ContractError("strip_image: sequence index out of range");
  if (data.channels != 1) throw ContractError("strip_image: only single-channel frames are supported");
  typename diff::Tape<T>::NoGrad no_grad;
  const std::size_t steps = data.steps, h = data.height, w = data.width;
  const auto tensors = model::gather<T>(data, {seq}, 0, steps);
  const auto f = m.filter(tensors, nullptr);
  diff::Tensor<T> controls = steps > 1 ? tensors.controls : diff::Tensor<T>({1, data.control_dim});
  const auto generated = m.generate(f.posteriors[0].mean, controls, steps, nullptr);
  const std::size_t cols = (steps + 1) / 2;
  GrayImage img(cols * w, 3 * h);
  const auto put = [&](std::size_t row, std::size_t col, std::span<const T> px) {
    std::vector<float> tile(px.begin(), px.end());
    img.paste(tile, w, h, row * h, col * w);
  };
  for (std::size_t c = 0; c < cols; ++c) {
    const std::size_t t = 2 * c;
    put(0, c, generated[t].values());
    const auto recon = m.decode(f.posteriors[t].mean);
    put(1, c, recon.values());
    const auto orig = data.frame(seq, t);
    std::vector<T> original(orig.begin(), orig.end());
    put(2, c, original);
  }
  return img;
}

std::string infer_env(std::size_t state_dim) {
  if (state_dim == 2) return "pendulum";
  if (state_dim == 4) return "ball";
  return "";
}

std::vector<std::string> state_channels(const std::string& env_name, std::size_t state_dim) {
  if (env_name == "pendulum" && state_dim == 2) return {"angle", "velocity"};
  if (env_name == "ball" && state_dim == 4) return {"x", "y", "vx", "vy"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < state_dim; ++i) out.push_back("state" + std::to_string(i));
  return out;
}

const Correlation& MetricsRecord::channel(const std::string& name) const {
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (channels[i] == name) return corr.at(i);
  throw ContractError("metrics: no correlation channel '" + name + "'");
}

KeyValues MetricsRecord::to_keyvalues() const {
  KeyValues kv;
  kv.set("metric.elbo", elbo);
  kv.set("metric.kl", kl);
  kv.set("metric.nll", nll);
  std::string names;
  for (std::size_t i = 0; i < channels.size(); ++i) names += (i ? "," : "") + channels[i];
  kv.set("metric.corr.channels", names);
  for (std::size_t i = 0; i < channels.size(); ++i) {
    kv.set("metric.corr." + channels[i] + ".r", corr.at(i).r);
    kv.set("metric.corr." + channels[i] + ".latent", static_cast<double>(corr.at(i).latent));
  }
  if (has_angle_trig) {
    kv.set("metric.corr.angle_trig.r", angle_trig.r);
    kv.set("metric.corr.angle_trig.latent", static_cast<double>(angle_trig.latent));
  }
  std::string hs;
  for (std::size_t i = 0; i < mse.size(); ++i) hs += (i ? "," : "") + std::to_string(mse[i].horizon);
  kv.set("metric.mse.horizons", hs);
  for (const auto& e : mse) {
    kv.set("metric.mse." + std::to_string(e.horizon) + ".pixel", e.per_pixel);
    kv.set("metric.mse." + std::to_string(e.horizon) + ".image", e.per_image);
  }
  for (const auto& [k, v] : meta.entries()) kv.set("meta." + k, v);
  return kv;
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size() && !s.empty()) {
    const std::size_t comma = s.find(',', start);
    out.push_back(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

MetricsRecord MetricsRecord::from_keyvalues(const KeyValues& kv) {
  MetricsRecord r;
  r.elbo = kv.get_double("metric.elbo");
  r.kl = kv.get_double("metric.kl");
  r.nll = kv.get_double("metric.nll");
  r.channels = split_list(kv.get("metric.corr.channels"));
  for (const auto& c : r.channels) {
    r.corr.push_back({kv.get_double("metric.corr." + c + ".r"),
                      static_cast<std::size_t>(kv.get_int("metric.corr." + c + ".latent"))});
  }
  if (kv.has("metric.corr.angle_trig.r")) {
    r.has_angle_trig = true;
    r.angle_trig = {kv.get_double("metric.corr.angle_trig.r"),
                    static_cast<std::size_t>(kv.get_int("metric.corr.angle_trig.latent"))};
  }
  for (const auto& h : split_list(kv.get("metric.mse.horizons"))) {
    r.mse.push_back({static_cast<std::size_t>(std::stoul(h)), kv.get_double("metric.mse." + h + ".pixel"),
                     kv.get_double("metric.mse." + h + ".image")});
  }
  for (const auto& [k, v] : kv.entries())
    if (k.rfind("meta.", 0) == 0) r.meta.set(k.substr(5), v);
  return r;
}

MetricsRecord evaluate(const model::Model<float>& m, const env::SequenceBatch& heldout, const EvalConfig& cfg) {
  if (heldout.n_seqs == 0 || heldout.steps < 2) throw ContractError("evaluate: need sequences of at least 2 steps");
  const std::string env_name = cfg.env_name.empty() ? infer_env(heldout.state_dim) : cfg.env_name;
  MetricsRecord r;

  {
    diff::Tape<float>::NoGrad no_grad;
    std::mt19937_64 rng(cfg.seed);
    double nll = 0.0, kl = 0.0;
    for (std::size_t begin = 0; begin < heldout.n_seqs; begin += kChunk) {
      const std::size_t end = std::min<std::size_t>(heldout.n_seqs, begin + kChunk);
      const auto seq = model::gather<float>(heldout, chunk_indices(begin, end), 0, heldout.steps);
      const auto f = m.filter(seq, &rng);
      const auto t = objective::terms(m, f, seq);
      const double w = static_cast<double>(end - begin);
      nll += w * t.nll.item();
      kl += w * t.kl.item();
    }
    r.nll = nll / heldout.n_seqs;
    r.kl = kl / heldout.n_seqs;
    r.elbo = -(r.nll + r.kl);
  }

  const auto latents = filtered_means(m, heldout);
  const std::size_t nz = m.config().latent_dim, sd = heldout.state_dim;
  std::vector<double> truths(heldout.states.begin(), heldout.states.end());
  r.channels = state_channels(env_name, sd);
  r.corr = latent_correlation(latents, nz, truths, sd);
  if (env_name == "pendulum" && sd == 2) {
    const std::size_t n = truths.size() / sd;
    std::vector<double> trig(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      trig[2 * i] = std::sin(truths[i * sd]);
      trig[2 * i + 1] = std::cos(truths[i * sd]);
    }
    const auto c = latent_correlation(latents, nz, trig, 2);
    r.has_angle_trig = true;
    r.angle_trig = c[0].r >= c[1].r ? c[0] : c[1];
  }
  r.mse = nstep_mse(m, heldout, cfg.horizons);
  r.meta.set("env", env_name);
  r.meta.set("sequences", static_cast<double>(heldout.n_seqs));
  r.meta.set("steps", static_cast<double>(heldout.steps));
  r.meta.set("transition", model::to_string(m.config().transition));
  return r;
}

EvalOutputs evaluate_files(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                           const std::filesystem::path& out_dir, const EvalConfig& cfg) {
  const auto ckpt = model::read_checkpoint(checkpoint);
  const auto m = train::load_model(ckpt);
  const auto data = env::read_sequences(dataset);
  const auto heldout = env::split_holdout(data).second;
  EvalOutputs out;
  out.record = evaluate(m, heldout, cfg);
  out.record.meta.set("checkpoint", checkpoint.string());
  out.record.meta.set("dataset", dataset.string());
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  out.metrics = out_dir / "metrics.txt";
  out.strips = out_dir / "strips.pgm";
  const std::string text = out.record.to_keyvalues().emit();
  io::write_file(out.metrics, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  write_pgm(strip_image(m, heldout, 0), out.strips);
  return out;
}

template std::vector<double> filtered_means(const model::Model<float>&, const env::SequenceBatch&);
template std::vector<double> filtered_means(const model::Model<double>&, const env::SequenceBatch&);
template std::vector<MseEntry> nstep_mse(const model::Model<float>&, const env::SequenceBatch&,
                                         const std::vector<std::size_t>&);
template std::vector<MseEntry> nstep_mse(const model::Model<double>&, const env::SequenceBatch&,
                                         const std::vector<std::size_t>&);
template GrayImage strip_image(const model::Model<float>&, const env::SequenceBatch&, std::size_t);
template GrayImage strip_image(const model::Model<double>&, const env::SequenceBatch&, std::size_t);

}  // namespace dvbf::eval
