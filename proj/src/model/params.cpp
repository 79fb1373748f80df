#include "dvbf/model/params.hpp"

#include <cmath>

#include "dvbf/errors.hpp"

namespace dvbf::model {

template <typename T>
Tensor<T> ParamSet<T>::add(const std::string& name, Tensor<T> tensor) {
  if (has(name)) throw ContractError("duplicate parameter '" + name + "'");
  tensor.set_requires_grad(true);
  entries_.push_back({name, tensor});
  return tensor;
}

template <typename T>
bool ParamSet<T>::has(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

template <typename T>
const Tensor<T>& ParamSet<T>::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw ContractError("no parameter named '" + name + "'");
}

template <typename T>
std::size_t ParamSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

template <typename T>
std::vector<typename ParamSet<T>::Entry> ParamSet<T>::group(const std::string& prefix) const {
  std::vector<Entry> out;
  for (const auto& e : entries_)
    if (e.name.compare(0, prefix.size(), prefix) == 0) out.push_back(e);
  return out;
}

template <typename T>
void ParamSet<T>::zero_grad() const {
  for (const auto& e : entries_) e.tensor.zero_grad();
}

namespace {

template <typename T>
Tensor<T> uniform(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace

template <typename T>
Dense<T> make_dense(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
                    std::mt19937_64& rng, double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(in + out));
  Dense<T> d;
  d.w = params.add(name + ".w", uniform<T>({in, out}, bound, rng));
  d.b = params.add(name + ".b", Tensor<T>(Shape{out}));
  return d;
}

template <typename T>
Conv<T> make_conv(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
                  std::size_t stride, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in * 9));
  Conv<T> c;
  c.kernels = params.add(name + ".kernel", uniform<T>({out, in, 3, 3}, bound, rng));
  c.b = params.add(name + ".b", Tensor<T>(Shape{out}));
  c.stride = stride;
  return c;
}

template <typename T>
ConvT<T> make_conv_transpose(ParamSet<T>& params, const std::string& name, std::size_t in,
                             std::size_t out, std::size_t stride, std::mt19937_64& rng) {
  // Each output pixel sees about in * 9 / stride^2 taps.
  const double fan_in = static_cast<double>(in * 9) / static_cast<double>(stride * stride);
  const double bound = std::sqrt(6.0 / std::max(fan_in, 1.0));
  ConvT<T> c;
  c.kernels = params.add(name + ".kernel", uniform<T>({in, out, 3, 3}, bound, rng));
  c.b = params.add(name + ".b", Tensor<T>(Shape{out}));
  c.stride = stride;
  return c;
}

#define DVBF_INSTANTIATE_PARAMS(T)                                                                   \
  template class ParamSet<T>;                                                                        \
  template Dense<T> make_dense(ParamSet<T>&, const std::string&, std::size_t, std::size_t,           \
                               std::mt19937_64&, double);                                            \
  template Conv<T> make_conv(ParamSet<T>&, const std::string&, std::size_t, std::size_t, std::size_t, \
                             std::mt19937_64&);                                                      \
  template ConvT<T> make_conv_transpose(ParamSet<T>&, const std::string&, std::size_t, std::size_t,  \
                                        std::size_t, std::mt19937_64&);

DVBF_INSTANTIATE_PARAMS(float)
DVBF_INSTANTIATE_PARAMS(double)

}  // namespace dvbf::model
