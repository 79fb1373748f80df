#pragma once

#include <vector>

#include "dvbf/model/params.hpp"

namespace dvbf::train {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;  // one per parameter, same order as the ParamSet
  long long step = 0;
};

template <typename T>
AdamState<T> make_adam_state(const model::ParamSet<T>& params);

// Bias-corrected Adam update from the accumulated grads.
template <typename T>
void adam_step(const model::ParamSet<T>& params, AdamState<T>& state, const AdamConfig& cfg);

template <typename T>
double global_grad_norm(const model::ParamSet<T>& params);

// Rescales all grads so that their global norm is at most max_norm.
// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(const model::ParamSet<T>& params, double max_norm);

}  // namespace dvbf::train
