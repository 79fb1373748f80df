#include "dvbf/train/optim.hpp"

#include <cmath>

#include "dvbf/errors.hpp"

namespace dvbf::train {

template <typename T>
AdamState<T> make_adam_state(const model::ParamSet<T>& params) {
  AdamState<T> s;
  for (const auto& e : params.entries()) {
    s.m.emplace_back(e.tensor.numel(), T{0});
    s.v.emplace_back(e.tensor.numel(), T{0});
  }
  return s;
}

template <typename T>
void adam_step(const model::ParamSet<T>& params, AdamState<T>& state, const AdamConfig& cfg) {
  if (state.m.size() != params.size()) throw ContractError("adam_step: state does not match the parameter set");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T lr = static_cast<T>(cfg.learning_rate), eps = static_cast<T>(cfg.eps);
  const T ic1 = static_cast<T>(1.0 / c1), ic2 = static_cast<T>(1.0 / c2);
  const auto& entries = params.entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    auto w = entries[p].tensor;
    const auto g = w.grads();
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::size_t i = 0; i < m.size(); ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * g[i];
      v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
      w[i] -= lr * (m[i] * ic1) / (std::sqrt(v[i] * ic2) + eps);
    }
  }
}

template <typename T>
double global_grad_norm(const model::ParamSet<T>& params) {
  double acc = 0.0;
  for (const auto& e : params.entries())
    for (T g : e.tensor.grads()) acc += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(acc);
}

template <typename T>
double clip_grad_norm(const model::ParamSet<T>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm) {
    const T factor = static_cast<T>(max_norm / norm);
    for (const auto& e : params.entries())
      for (T& g : e.tensor.grads()) g *= factor;
  }
  return norm;
}

#define DVBF_INSTANTIATE_OPTIM(T)                                                        \
  template AdamState<T> make_adam_state(const model::ParamSet<T>&);                      \
  template void adam_step(const model::ParamSet<T>&, AdamState<T>&, const AdamConfig&);  \
  template double global_grad_norm(const model::ParamSet<T>&);                           \
  template double clip_grad_norm(const model::ParamSet<T>&, double);

DVBF_INSTANTIATE_OPTIM(float)
DVBF_INSTANTIATE_OPTIM(double)

}  // namespace dvbf::train
