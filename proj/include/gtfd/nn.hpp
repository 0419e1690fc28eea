#ifndef GTFD_NN_HPP
#define GTFD_NN_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gtfd/tensor.hpp"

namespace gtfd {

enum class Arch { Critic, Generator1d, UNet, DenseMLP, ScalarLinear };

// Architecture description. Channel widths are configurable; the defaults
// follow the builder functions below.
struct NetworkSpec {
  Arch arch = Arch::Critic;
  int64_t dim = 1;  // critic convolution dimensionality: 1 or 2
  int64_t in_channels = 1;
  std::vector<int64_t> spatial;  // {L} or {H,W}
  int64_t base_width = 16;       // critic: channels after the input conv
  int64_t n_blocks = 5;          // critic: ResBlock count
  std::vector<int64_t> widths = {16, 32, 64};  // generator widths per block/level
  int64_t bottleneck = 64;                     // 1d generator dense width
  std::vector<int64_t> mlp_widths;             // DenseMLP hidden widths
  double leaky_slope = 0.2;
  double ln_eps = 1e-5;

  Shape input_shape(int64_t batch) const;
};

// Named parameter tensors (64-bit masters) plus the seed they came from.
struct ParamStore {
  std::map<std::string, Tensor> entries;
  uint64_t rng_seed = 0;
};

// Tracked views of a store's parameters on a tape, as leaves (trainable)
// or constants (frozen).
using ParamMap = std::map<std::string, Tensor>;

// Input conv to base_width channels, n_blocks ResBlocks with subsample +
// channel doubling, final dense linear layer to one scalar per sample.
NetworkSpec build_critic(int64_t dim, int64_t in_channels, std::vector<int64_t> spatial,
                         int64_t base_width = 16, int64_t n_blocks = 5);

// Conv autoencoder: 3 conv blocks down, two dense relu layers at the
// bottleneck, 3 upsampling conv blocks, final kernel-1 linear conv.
NetworkSpec build_generator_1d(int64_t signal_len, std::vector<int64_t> widths = {16, 32, 64},
                               int64_t bottleneck = 64);

// 3-level UNet with skip concatenations and a final kernel-1 linear conv.
NetworkSpec build_generator_unet(int64_t channels, std::vector<int64_t> spatial,
                                 std::vector<int64_t> widths = {16, 32, 64});

// Scalar-output dense net with leakyrelu hidden layers (toy critic).
NetworkSpec build_dense_mlp(int64_t in_features, std::vector<int64_t> hidden);

// G(y) = a * y with a single scalar parameter.
NetworkSpec build_scalar_linear(Shape input_shape);

// He-uniform fan-in initialization; layernorm gains 1, biases 0.
ParamStore init_params(const NetworkSpec& spec, uint64_t seed);

void for_each_param(const NetworkSpec& spec,
                    const std::function<void(const std::string&, const Shape&, int64_t fan_in)>& fn);

ParamMap attach(Tape& tape, const ParamStore& store, bool trainable);

Tensor forward(const NetworkSpec& spec, const ParamMap& params, const Tensor& batch);

// Convenience: untracked forward using the store's masters directly.
Tensor forward_detached(const NetworkSpec& spec, const ParamStore& store, const Tensor& batch);

}  // namespace gtfd

#endif
