#include "dvbf/model/batch.hpp"

#include <algorithm>

#include "dvbf/errors.hpp"

namespace dvbf::model {

template <typename T>
SequenceTensors<T> gather(const env::SequenceBatch& data, const std::vector<std::size_t>& seqs, std::size_t t0,
                          std::size_t steps) {
  if (seqs.empty() || steps == 0 || t0 + steps > data.steps) {
    throw ContractError("gather: window [" + std::to_string(t0) + ", " + std::to_string(t0 + steps) +
                        ") of " + std::to_string(seqs.size()) + " sequences is outside " +
                        std::to_string(data.steps) + " steps");
  }
  const std::size_t b = seqs.size(), obs = data.frame_size(), nu = data.control_dim;
  SequenceTensors<T> out;
  out.batch = b;
  out.steps = steps;
  out.frames = Tensor<T>({steps * b, obs});
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < b; ++i) {
      if (seqs[i] >= data.n_seqs) throw ContractError("gather: sequence index out of range");
      const auto f = data.frame(seqs[i], t0 + t);
      std::copy(f.begin(), f.end(), out.frames.data() + (t * b + i) * obs);
    }
  if (steps > 1) {
    out.controls = Tensor<T>({(steps - 1) * b, nu});
    for (std::size_t t = 0; t + 1 < steps; ++t)
      for (std::size_t i = 0; i < b; ++i) {
        const auto u = data.control(seqs[i], t0 + t);
        std::copy(u.begin(), u.end(), out.controls.data() + (t * b + i) * nu);
      }
  }
  return out;
}

template SequenceTensors<float> gather(const env::SequenceBatch&, const std::vector<std::size_t>&, std::size_t,
                                       std::size_t);
template SequenceTensors<double> gather(const env::SequenceBatch&, const std::vector<std::size_t>&, std::size_t,
                                        std::size_t);

}  // namespace dvbf::model
