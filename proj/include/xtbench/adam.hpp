#pragma once

#include <vector>

#include "xtbench/tensor.hpp"

namespace xtb {

// Adam with bias correction, no weight decay.
struct AdamState {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static AdamState init(const std::vector<Tensor>& params, double lr);
};

void adam_update(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                 AdamState& state);

}  // namespace xtb
