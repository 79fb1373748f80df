#include "dvbf/model/checkpoint.hpp"

#include "dvbf/binary_io.hpp"
#include "dvbf/errors.hpp"

namespace dvbf::model {

const Blob* Checkpoint::find(const std::string& name) const {
  for (const auto& b : blobs)
    if (b.name == name) return &b;
  return nullptr;
}

void Checkpoint::put(Blob blob) {
  for (auto& b : blobs) {
    if (b.name == blob.name) {
      b = std::move(blob);
      return;
    }
  }
  blobs.push_back(std::move(blob));
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  io::ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, 8));
  const std::string text = ckpt.config.emit();
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  for (const auto& b : ckpt.blobs) {
    w.u32(static_cast<std::uint32_t>(b.name.size()));
    w.bytes(b.name);
    w.u32(static_cast<std::uint32_t>(b.shape.size()));
    for (auto e : b.shape) w.u32(static_cast<std::uint32_t>(e));
    w.f32s(b.data);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "checkpoint");
  if (r.remaining() < 8 || r.bytes(8) != std::string_view(kCheckpointMagic, 8)) {
    throw IoError("checkpoint: bad magic (expected DVBFCKP1)");
  }
  Checkpoint ckpt;
  const auto text_len = r.u32();
  try {
    ckpt.config = KeyValues::parse(r.bytes(text_len));
  } catch (const ContractError& e) {
    throw IoError(std::string("checkpoint: malformed config echo: ") + e.what());
  }
  while (r.remaining() > 0) {
    Blob b;
    b.name = r.bytes(r.u32());
    const auto rank = r.u32();
    if (rank == 0 || rank > 8) throw IoError("checkpoint: blob '" + b.name + "' has rank " + std::to_string(rank));
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      b.shape.push_back(r.u32());
      n *= b.shape.back();
    }
    if (n * 4 > r.remaining()) throw IoError("checkpoint: blob '" + b.name + "' is truncated");
    b.data.resize(n);
    r.f32s(b.data);
    ckpt.blobs.push_back(std::move(b));
  }
  return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

template <typename T>
void store_params(Checkpoint& ckpt, const ParamSet<T>& params, const std::string& prefix) {
  for (const auto& e : params.entries()) {
    Blob b{prefix + e.name, e.tensor.shape(), {}};
    b.data.assign(e.tensor.values().begin(), e.tensor.values().end());
    ckpt.put(std::move(b));
  }
}

template <typename T>
void load_params(const Checkpoint& ckpt, const ParamSet<T>& params, const std::string& prefix) {
  for (const auto& e : params.entries()) {
    const Blob* b = ckpt.find(prefix + e.name);
    if (b == nullptr) throw IoError("checkpoint: missing parameter '" + prefix + e.name + "'");
    if (b->shape != e.tensor.shape()) {
      throw IoError("checkpoint: parameter '" + e.name + "' has shape " + diff::to_string(b->shape) +
                    ", model expects " + diff::to_string(e.tensor.shape()));
    }
    auto dst = Tensor<T>(e.tensor);
    for (std::size_t i = 0; i < b->data.size(); ++i) dst[i] = static_cast<T>(b->data[i]);
  }
}

template void store_params(Checkpoint&, const ParamSet<float>&, const std::string&);
template void store_params(Checkpoint&, const ParamSet<double>&, const std::string&);
template void load_params(const Checkpoint&, const ParamSet<float>&, const std::string&);
template void load_params(const Checkpoint&, const ParamSet<double>&, const std::string&);

}  // namespace dvbf::model
