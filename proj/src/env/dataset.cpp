#include "dvbf/env/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "dvbf/binary_io.hpp"
#include "dvbf/errors.hpp"

namespace dvbf::env {

std::span<const float> SequenceBatch::frame(std::size_t seq, std::size_t t) const {
  return std::span<const float>(observations).subspan((seq * steps + t) * frame_size(), frame_size());
}

std::span<const float> SequenceBatch::control(std::size_t seq, std::size_t t) const {
  return std::span<const float>(controls).subspan((seq * (steps - 1) + t) * control_dim, control_dim);
}

std::span<const float> SequenceBatch::state(std::size_t seq, std::size_t t) const {
  return std::span<const float>(states).subspan((seq * steps + t) * state_dim, state_dim);
}

SequenceBatch SequenceBatch::subset(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > n_seqs) throw ContractError("subset: invalid sequence range");
  SequenceBatch out = *this;
  out.n_seqs = static_cast<std::uint32_t>(end - begin);
  const auto take = [&](const std::vector<float>& src, std::size_t per_seq) {
    return std::vector<float>(src.begin() + static_cast<std::ptrdiff_t>(begin * per_seq),
                              src.begin() + static_cast<std::ptrdiff_t>(end * per_seq));
  };
  out.observations = take(observations, std::size_t{steps} * frame_size());
  out.controls = take(controls, std::size_t{steps - 1} * control_dim);
  out.states = take(states, std::size_t{steps} * state_dim);
  return out;
}

void SequenceBatch::validate() const {
  if (steps < 2) throw ContractError("sequence container: T must be at least 2");
  const std::size_t n = n_seqs;
  if (observations.size() != n * steps * frame_size() ||
      controls.size() != n * (steps - 1) * control_dim || states.size() != n * steps * state_dim) {
    throw ContractError("sequence container: array lengths disagree with header");
  }
}

std::vector<std::uint8_t> encode_sequences(const SequenceBatch& b) {
  b.validate();
  io::ByteWriter w;
  w.bytes(std::string_view(kSequenceMagic, 8));
  for (std::uint32_t v : {b.n_seqs, b.steps, b.channels, b.height, b.width, b.control_dim, b.state_dim}) w.u32(v);
  w.f32s(b.observations);
  w.f32s(b.controls);
  w.f32s(b.states);
  return w.take();
}

SequenceBatch decode_sequences(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "sequence container");
  if (r.bytes(8) != std::string_view(kSequenceMagic, 8)) throw IoError("sequence container: bad magic");
  SequenceBatch b;
  b.n_seqs = r.u32();
  b.steps = r.u32();
  b.channels = r.u32();
  b.height = r.u32();
  b.width = r.u32();
  b.control_dim = r.u32();
  b.state_dim = r.u32();
  if (b.steps < 2) throw IoError("sequence container: T must be at least 2");
  const std::size_t n = b.n_seqs;
  const std::size_t expected =
      4 * (n * b.steps * b.frame_size() + n * (b.steps - 1) * b.control_dim + n * b.steps * b.state_dim);
  if (r.remaining() != expected) {
    throw IoError("sequence container: payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
                  std::to_string(expected));
  }
  b.observations.resize(n * b.steps * b.frame_size());
  b.controls.resize(n * (b.steps - 1) * b.control_dim);
  b.states.resize(n * b.steps * b.state_dim);
  r.f32s(b.observations);
  r.f32s(b.controls);
  r.f32s(b.states);
  return b;
}

void write_sequences(const SequenceBatch& batch, const std::filesystem::path& path) {
  io::write_file(path, encode_sequences(batch));
}

SequenceBatch read_sequences(const std::filesystem::path& path) {
  return decode_sequences(io::read_file(path));
}

ControlSampler uniform_controls(double bound) {
  return [bound](std::mt19937_64& rng, std::span<double> u) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : u) v = dist(rng);
  };
}

SequenceBatch generate_dataset(const Environment& env, const ControlSampler& policy, std::size_t n_seqs,
                               std::size_t steps, std::uint64_t seed) {
  if (steps < 2) throw ContractError("generate_dataset: T must be at least 2");
  if (n_seqs == 0) throw ContractError("generate_dataset: need at least one sequence");
  SequenceBatch b;
  b.n_seqs = static_cast<std::uint32_t>(n_seqs);
  b.steps = static_cast<std::uint32_t>(steps);
  b.channels = 1;
  b.height = b.width = static_cast<std::uint32_t>(env.image_size());
  b.control_dim = static_cast<std::uint32_t>(env.control_dim());
  b.state_dim = static_cast<std::uint32_t>(env.state_dim());
  b.observations.resize(n_seqs * steps * b.frame_size());
  b.controls.resize(n_seqs * (steps - 1) * b.control_dim);
  b.states.resize(n_seqs * steps * b.state_dim);

  const auto count = static_cast<std::ptrdiff_t>(n_seqs);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < count; ++s) {
    const auto seq = static_cast<std::size_t>(s);
    std::mt19937_64 rng(derive_seed(seed, seq));
    std::vector<double> state = env.initial_state(rng);
    std::vector<double> u(b.control_dim);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto img = env.render(state);
      std::copy(img.begin(), img.end(), b.observations.begin() + static_cast<std::ptrdiff_t>((seq * steps + t) * b.frame_size()));
      for (std::size_t k = 0; k < b.state_dim; ++k) b.states[(seq * steps + t) * b.state_dim + k] = static_cast<float>(state[k]);
      if (t + 1 == steps) break;
      policy(rng, u);
      // The container stores float32; step with the stored value so replays match.
      for (std::size_t k = 0; k < b.control_dim; ++k) {
        const float stored = static_cast<float>(std::clamp(u[k], -env.control_bound(), env.control_bound()));
        u[k] = std::clamp(static_cast<double>(stored), -env.control_bound(), env.control_bound());
        b.controls[(seq * (steps - 1) + t) * b.control_dim + k] = stored;
      }
      state = env.step(state, u);
    }
  }
  return b;
}

std::pair<SequenceBatch, SequenceBatch> split_holdout(const SequenceBatch& all, double fraction) {
  if (all.n_seqs < 2) throw ContractError("split_holdout: need at least two sequences");
  auto held = static_cast<std::size_t>(std::ceil(fraction * all.n_seqs));
  held = std::clamp<std::size_t>(held, 1, all.n_seqs - 1);
  const std::size_t cut = all.n_seqs - held;
  return {all.subset(0, cut), all.subset(cut, all.n_seqs)};
}

}  // namespace dvbf::env
