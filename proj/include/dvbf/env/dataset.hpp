#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "dvbf/env/environment.hpp"

namespace dvbf::env {

// In-memory form of a DVBFSEQ1 file: observations [n][T][c][h][w],
// controls [n][T-1][control_dim], states [n][T][state_dim].
struct SequenceBatch {
  std::uint32_t n_seqs = 0;
  std::uint32_t steps = 0;
  std::uint32_t channels = 1;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t control_dim = 0;
  std::uint32_t state_dim = 0;
  std::vector<float> observations;
  std::vector<float> controls;
  std::vector<float> states;

  std::size_t frame_size() const { return std::size_t{channels} * height * width; }
  std::span<const float> frame(std::size_t seq, std::size_t t) const;
  std::span<const float> control(std::size_t seq, std::size_t t) const;
  std::span<const float> state(std::size_t seq, std::size_t t) const;

  // Sequences [begin, end) as a new batch.
  SequenceBatch subset(std::size_t begin, std::size_t end) const;

  // Throws ContractError when array lengths disagree with the header.
  void validate() const;
};

inline constexpr char kSequenceMagic[] = "DVBFSEQ1";
inline constexpr std::size_t kSequenceHeaderBytes = 8 + 7 * 4;

std::vector<std::uint8_t> encode_sequences(const SequenceBatch& batch);
SequenceBatch decode_sequences(std::span<const std::uint8_t> bytes);

void write_sequences(const SequenceBatch& batch, const std::filesystem::path& path);
SequenceBatch read_sequences(const std::filesystem::path& path);

// Fills one control vector.
using ControlSampler = std::function<void(std::mt19937_64&, std::span<double>)>;

ControlSampler uniform_controls(double bound);

// Sequence i uses its own generator seeded from derive_seed(seed, i), so the
// output does not depend on how sequences are scheduled.
SequenceBatch generate_dataset(const Environment& env, const ControlSampler& policy, std::size_t n_seqs,
                               std::size_t steps, std::uint64_t seed);

// Held-out split: the last `fraction` of sequences (at least one).
std::pair<SequenceBatch, SequenceBatch> split_holdout(const SequenceBatch& all, double fraction = 0.1);

}  // namespace dvbf::env
