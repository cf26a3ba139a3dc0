#include "xtbench/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace xtb {

AdamState AdamState::init(const std::vector<Tensor>& params, double lr) {
  AdamState s;
  s.lr = lr;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Tensor& p : params) {
    s.m.emplace_back(p.shape(), 0.0);
    s.v.emplace_back(p.shape(), 0.0);
  }
  return s;
}

void adam_update(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                 AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_update: parameter/gradient count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t t = 0; t < params.size(); ++t) {
    Tensor& p = params[t];
    const Tensor& g = grads[t];
    if (!p.same_shape(g))
      throw std::invalid_argument("adam_update: shape mismatch " + p.shape_str() + " vs " +
                                  g.shape_str());
    Tensor& m = state.m[t];
    Tensor& v = state.v[t];
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace xtb
