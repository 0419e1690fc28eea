#include "gtfd/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace gtfd {

void adam_step(ParamStore& params, const std::map<std::string, Tensor>& grads, AdamState& state) {
  state.step += 1;
  const AdamHyper& h = state.hyper;
  double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (auto& [name, param] : params.entries) {
    auto git = grads.find(name);
    if (git == grads.end()) throw std::runtime_error("adam_step: missing gradient for " + name);
    const Tensor& g = git->second;
    if (g.shape() != param.shape())
      throw std::runtime_error("adam_step: gradient shape mismatch for " + name);
    auto mit = state.moments.find(name);
    if (mit == state.moments.end())
      mit = state.moments
                .emplace(name, std::make_pair(Tensor::zeros(param.shape()), Tensor::zeros(param.shape())))
                .first;
    auto pd = param.data();
    auto gd = g.data();
    auto md = mit->second.first.data();
    auto vd = mit->second.second.data();
    for (size_t i = 0; i < pd.size(); ++i) {
      md[i] = h.beta1 * md[i] + (1.0 - h.beta1) * gd[i];
      vd[i] = h.beta2 * vd[i] + (1.0 - h.beta2) * gd[i] * gd[i];
      double mhat = md[i] / c1;
      double vhat = vd[i] / c2;
      pd[i] -= h.alpha * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

}  // namespace gtfd
