#pragma once

// DVBFCKP1 container: magic, u32-length-prefixed UTF-8 config echo, then
// named float32 blobs (u32 name length, name, u32 rank, u32 extents, data)
// until end of file.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dvbf/keyvalue.hpp"
#include "dvbf/model/params.hpp"

namespace dvbf::model {

inline constexpr char kCheckpointMagic[] = "DVBFCKP1";

struct Blob {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

struct Checkpoint {
  KeyValues config;
  std::vector<Blob> blobs;

  const Blob* find(const std::string& name) const;
  void put(Blob blob);
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
// Throws IoError on bad magic or truncation.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Stores every parameter under prefix + name.
template <typename T>
void store_params(Checkpoint& ckpt, const ParamSet<T>& params, const std::string& prefix = "");
// Copies values into existing tensors; throws IoError on missing names or
// shape mismatches.
template <typename T>
void load_params(const Checkpoint& ckpt, const ParamSet<T>& params, const std::string& prefix = "");

}  // namespace dvbf::model
