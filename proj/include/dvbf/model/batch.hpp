#pragma once

#include <vector>

#include "dvbf/env/dataset.hpp"
#include "dvbf/model/model.hpp"

namespace dvbf::model {

// Time-major tensors for the listed sequences, steps [t0, t0 + steps).
template <typename T>
SequenceTensors<T> gather(const env::SequenceBatch& data, const std::vector<std::size_t>& seqs, std::size_t t0,
                          std::size_t steps);

template <typename T>
SequenceTensors<T> gather_all(const env::SequenceBatch& data) {
  std::vector<std::size_t> seqs(data.n_seqs);
  for (std::size_t i = 0; i < seqs.size(); ++i) seqs[i] = i;
  return gather<T>(data, seqs, 0, data.steps);
}

}  // namespace dvbf::model
