#ifndef GTFD_OPTIM_HPP
#define GTFD_OPTIM_HPP

#include <map>
#include <string>

#include "gtfd/nn.hpp"

namespace gtfd {

struct AdamHyper {
  double alpha = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

struct AdamState {
  int64_t step = 0;
  AdamHyper hyper;
  // first/second moments per parameter, created lazily as zeros
  std::map<std::string, std::pair<Tensor, Tensor>> moments;
};

// Bias-corrected Adam update, in place on the store's masters.
void adam_step(ParamStore& params, const std::map<std::string, Tensor>& grads, AdamState& state);

}  // namespace gtfd

#endif
