#include "gtfd/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "gtfd/data.hpp"

namespace gtfd {

namespace {

int64_t prod(const std::vector<int64_t>& v) {
  int64_t p = 1;
  for (int64_t d : v) p *= d;
  return p;
}

Shape ln_shape(int64_t channels, const std::vector<int64_t>& spatial) {
  Shape s{channels};
  s.insert(s.end(), spatial.begin(), spatial.end());
  return s;
}

Shape conv_w_shape(int64_t dim, int64_t cout, int64_t cin, int64_t k) {
  return dim == 1 ? Shape{cout, cin, k} : Shape{cout, cin, k, k};
}

std::vector<int64_t> halved(std::vector<int64_t> s) {
  for (int64_t& d : s) d /= 2;
  return s;
}

}  // namespace

Shape NetworkSpec::input_shape(int64_t batch) const {
  switch (arch) {
    case Arch::DenseMLP:
      return {batch, in_channels};
    case Arch::ScalarLinear: {
      Shape s{batch};
      s.insert(s.end(), spatial.begin(), spatial.end());
      return s;
    }
    default: {
      Shape s{batch, in_channels};
      s.insert(s.end(), spatial.begin(), spatial.end());
      return s;
    }
  }
}

NetworkSpec build_critic(int64_t dim, int64_t in_channels, std::vector<int64_t> spatial,
                         int64_t base_width, int64_t n_blocks) {
  if (dim != 1 && dim != 2) throw std::runtime_error("build_critic: dim must be 1 or 2");
  if (static_cast<int64_t>(spatial.size()) != dim)
    throw std::runtime_error("build_critic: spatial rank does not match dim");
  int64_t div = int64_t{1} << n_blocks;
  for (int64_t s : spatial)
    if (s % div != 0)
      throw std::runtime_error("build_critic: spatial extent " + std::to_string(s) +
                               " not divisible by " + std::to_string(div));
  NetworkSpec spec;
  spec.arch = Arch::Critic;
  spec.dim = dim;
  spec.in_channels = in_channels;
  spec.spatial = std::move(spatial);
  spec.base_width = base_width;
  spec.n_blocks = n_blocks;
  return spec;
}

NetworkSpec build_generator_1d(int64_t signal_len, std::vector<int64_t> widths,
                               int64_t bottleneck) {
  if (signal_len < 8) throw std::runtime_error("build_generator_1d: signal_len must be >= 8");
  if (signal_len % 8 != 0)
    throw std::runtime_error("build_generator_1d: signal_len must be divisible by 8");
  if (widths.size() != 3) throw std::runtime_error("build_generator_1d: need 3 encoder widths");
  NetworkSpec spec;
  spec.arch = Arch::Generator1d;
  spec.dim = 1;
  spec.in_channels = 1;
  spec.spatial = {signal_len};
  spec.widths = std::move(widths);
  spec.bottleneck = bottleneck;
  return spec;
}

NetworkSpec build_generator_unet(int64_t channels, std::vector<int64_t> spatial,
                                 std::vector<int64_t> widths) {
  if (spatial.size() != 2) throw std::runtime_error("build_generator_unet: need [H,W]");
  for (int64_t s : spatial)
    if (s % 8 != 0)
      throw std::runtime_error("build_generator_unet: spatial extent " + std::to_string(s) +
                               " not divisible by 8");
  if (widths.size() != 3) throw std::runtime_error("build_generator_unet: need 3 level widths");
  NetworkSpec spec;
  spec.arch = Arch::UNet;
  spec.dim = 2;
  spec.in_channels = channels;
  spec.spatial = std::move(spatial);
  spec.widths = std::move(widths);
  return spec;
}

NetworkSpec build_dense_mlp(int64_t in_features, std::vector<int64_t> hidden) {
  NetworkSpec spec;
  spec.arch = Arch::DenseMLP;
  spec.in_channels = in_features;
  spec.mlp_widths = std::move(hidden);
  return spec;
}

NetworkSpec build_scalar_linear(Shape input_shape) {
  NetworkSpec spec;
  spec.arch = Arch::ScalarLinear;
  spec.spatial = std::move(input_shape);
  return spec;
}

void for_each_param(const NetworkSpec& spec,
                    const std::function<void(const std::string&, const Shape&, int64_t)>& fn) {
  int64_t k = 3;
  int64_t kd = spec.dim == 1 ? k : k * k;
  switch (spec.arch) {
    case Arch::Critic: {
      fn("in.w", conv_w_shape(spec.dim, spec.base_width, spec.in_channels, k),
         spec.in_channels * kd);
      fn("in.b", {spec.base_width}, spec.in_channels * kd);
      int64_t c = spec.base_width;
      std::vector<int64_t> sp = spec.spatial;
      for (int64_t i = 1; i <= spec.n_blocks; ++i) {
        std::string p = "block" + std::to_string(i) + ".";
        fn(p + "conv1.w", conv_w_shape(spec.dim, c, c, k), c * kd);
        fn(p + "conv1.b", {c}, c * kd);
        fn(p + "ln1.g", ln_shape(c, sp), 1);
        fn(p + "ln1.b", ln_shape(c, sp), 1);
        fn(p + "conv2.w", conv_w_shape(spec.dim, c, c, k), c * kd);
        fn(p + "conv2.b", {c}, c * kd);
        fn(p + "ln2.g", ln_shape(c, sp), 1);
        fn(p + "ln2.b", ln_shape(c, sp), 1);
        sp = halved(sp);
        c *= 2;
      }
      int64_t feat = c * prod(sp);
      fn("out.w", {1, feat}, feat);
      fn("out.b", {1}, feat);
      break;
    }
    case Arch::Generator1d: {
      int64_t len = spec.spatial[0];
      int64_t cin = 1;
      for (int i = 0; i < 3; ++i) {
        std::string p = "enc" + std::to_string(i + 1) + ".";
        int64_t c = spec.widths[static_cast<size_t>(i)];
        fn(p + "conv.w", {c, cin, k}, cin * k);
        fn(p + "conv.b", {c}, cin * k);
        fn(p + "ln.g", {c, len}, 1);
        fn(p + "ln.b", {c, len}, 1);
        cin = c;
        len /= 2;
      }
      int64_t flat = spec.widths[2] * len;
      fn("dense1.w", {spec.bottleneck, flat}, flat);
      fn("dense1.b", {spec.bottleneck}, flat);
      fn("dense2.w", {flat, spec.bottleneck}, spec.bottleneck);
      fn("dense2.b", {flat}, spec.bottleneck);
      int64_t dec_in[3] = {spec.widths[2], spec.widths[1], spec.widths[0]};
      int64_t dec_out[3] = {spec.widths[1], spec.widths[0], spec.widths[0]};
      for (int i = 0; i < 3; ++i) {
        std::string p = "dec" + std::to_string(i + 1) + ".";
        len *= 2;
        fn(p + "conv.w", {dec_out[i], dec_in[i], k}, dec_in[i] * k);
        fn(p + "conv.b", {dec_out[i]}, dec_in[i] * k);
        fn(p + "ln.g", {dec_out[i], len}, 1);
        fn(p + "ln.b", {dec_out[i], len}, 1);
      }
      fn("final.w", {1, spec.widths[0], 1}, spec.widths[0]);
      fn("final.b", {1}, spec.widths[0]);
      break;
    }
    case Arch::UNet: {
      std::vector<int64_t> sp = spec.spatial;
      int64_t cin = spec.in_channels;
      for (int i = 0; i < 3; ++i) {
        int64_t c = spec.widths[static_cast<size_t>(i)];
        std::string p = "enc" + std::to_string(i) + ".";
        fn(p + "conv1.w", {c, cin, k, k}, cin * k * k);
        fn(p + "conv1.b", {c}, cin * k * k);
        fn(p + "ln1.g", ln_shape(c, sp), 1);
        fn(p + "ln1.b", ln_shape(c, sp), 1);
        fn(p + "conv2.w", {c, c, k, k}, c * k * k);
        fn(p + "conv2.b", {c}, c * k * k);
        fn(p + "ln2.g", ln_shape(c, sp), 1);
        fn(p + "ln2.b", ln_shape(c, sp), 1);
        cin = c;
        sp = halved(sp);
      }
      int64_t cb = spec.widths[2];
      fn("bottom.conv1.w", {cb, cb, k, k}, cb * k * k);
      fn("bottom.conv1.b", {cb}, cb * k * k);
      fn("bottom.ln1.g", ln_shape(cb, sp), 1);
      fn("bottom.ln1.b", ln_shape(cb, sp), 1);
      fn("bottom.conv2.w", {cb, cb, k, k}, cb * k * k);
      fn("bottom.conv2.b", {cb}, cb * k * k);
      fn("bottom.ln2.g", ln_shape(cb, sp), 1);
      fn("bottom.ln2.b", ln_shape(cb, sp), 1);
      int64_t cur = cb;
      for (int i = 2; i >= 0; --i) {
        sp = spec.spatial;
        for (int j = 0; j < i; ++j) sp = halved(sp);
        int64_t c = spec.widths[static_cast<size_t>(i)];
        int64_t in_c = cur + c;  // skip concat doubles the input channels
        std::string p = "dec" + std::to_string(i) + ".";
        fn(p + "conv1.w", {c, in_c, k, k}, in_c * k * k);
        fn(p + "conv1.b", {c}, in_c * k * k);
        fn(p + "ln1.g", ln_shape(c, sp), 1);
        fn(p + "ln1.b", ln_shape(c, sp), 1);
        fn(p + "conv2.w", {c, c, k, k}, c * k * k);
        fn(p + "conv2.b", {c}, c * k * k);
        fn(p + "ln2.g", ln_shape(c, sp), 1);
        fn(p + "ln2.b", ln_shape(c, sp), 1);
        cur = c;
      }
      fn("final.w", {spec.in_channels, spec.widths[0], 1, 1}, spec.widths[0]);
      fn("final.b", {spec.in_channels}, spec.widths[0]);
      break;
    }
    case Arch::DenseMLP: {
      int64_t cin = spec.in_channels;
      for (size_t i = 0; i < spec.mlp_widths.size(); ++i) {
        int64_t c = spec.mlp_widths[i];
        std::string p = "l" + std::to_string(i + 1) + ".";
        fn(p + "w", {c, cin}, cin);
        fn(p + "b", {c}, cin);
        cin = c;
      }
      fn("out.w", {1, cin}, cin);
      fn("out.b", {1}, cin);
      break;
    }
    case Arch::ScalarLinear:
      fn("a", {1}, 1);
      break;
  }
}

ParamStore init_params(const NetworkSpec& spec, uint64_t seed) {
  ParamStore store;
  store.rng_seed = seed;
  Rng rng(seed);
  for_each_param(spec, [&](const std::string& name, const Shape& shape, int64_t fan_in) {
    Tensor t;
    bool is_bias = name.ends_with(".b") || name.ends_with("ln1.b") || name.ends_with("ln2.b");
    if (name.ends_with(".g")) {
      t = Tensor::full(shape, 1.0);
    } else if (is_bias) {
      t = Tensor::zeros(shape);
    } else if (name == "a") {
      t = Tensor::scalar(0.5);
    } else {
      double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      t = Tensor::zeros(shape);
      for (double& v : t.data()) v = rng.uniform(-limit, limit);
    }
    store.entries.emplace(name, std::move(t));
  });
  return store;
}

ParamMap attach(Tape& tape, const ParamStore& store, bool trainable) {
  ParamMap map;
  for (const auto& [name, value] : store.entries)
    map.emplace(name, trainable ? tape.leaf(value) : tape.constant(value));
  return map;
}

namespace {

const Tensor& p(const ParamMap& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw std::runtime_error("forward: missing parameter " + name);
  return it->second;
}

Tensor conv(int64_t dim, const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = dim == 1 ? ops::conv1d(x, w) : ops::conv2d(x, w);
  return ops::add_channel_bias(y, b);
}

Tensor conv_ln(int64_t dim, const ParamMap& params, const std::string& prefix, const Tensor& x,
               const std::string& cname, const std::string& lname, double eps) {
  Tensor y = conv(dim, x, p(params, prefix + cname + ".w"), p(params, prefix + cname + ".b"));
  return ops::layernorm(y, p(params, prefix + lname + ".g"), p(params, prefix + lname + ".b"), eps);
}

Tensor critic_forward(const NetworkSpec& spec, const ParamMap& params, const Tensor& x) {
  Tensor h = conv(spec.dim, x, p(params, "in.w"), p(params, "in.b"));
  for (int64_t i = 1; i <= spec.n_blocks; ++i) {
    std::string pre = "block" + std::to_string(i) + ".";
    Tensor t = conv_ln(spec.dim, params, pre, h, "conv1", "ln1", spec.ln_eps);
    t = ops::leakyrelu(t, spec.leaky_slope);
    t = conv_ln(spec.dim, params, pre, t, "conv2", "ln2", spec.ln_eps);
    h = ops::add(t, h);  // residual before subsampling
    h = ops::subsample2(h);
    h = ops::channel_concat(h, h);  // self-concatenation doubles channels
  }
  int64_t n = h.shape()[0];
  h = ops::reshape(h, {n, h.size() / n});
  return ops::dense(h, p(params, "out.w"), p(params, "out.b"));
}

Tensor generator1d_forward(const NetworkSpec& spec, const ParamMap& params, const Tensor& x) {
  Tensor h = x;
  for (int i = 1; i <= 3; ++i) {
    std::string pre = "enc" + std::to_string(i) + ".";
    h = conv_ln(1, params, pre, h, "conv", "ln", spec.ln_eps);
    h = ops::relu(h);
    h = ops::subsample2(h);
  }
  int64_t n = h.shape()[0];
  Shape conv_shape = h.shape();
  h = ops::reshape(h, {n, h.size() / n});
  h = ops::relu(ops::dense(h, p(params, "dense1.w"), p(params, "dense1.b")));
  h = ops::relu(ops::dense(h, p(params, "dense2.w"), p(params, "dense2.b")));
  h = ops::reshape(h, conv_shape);
  for (int i = 1; i <= 3; ++i) {
    std::string pre = "dec" + std::to_string(i) + ".";
    h = ops::upsample2(h);
    h = conv_ln(1, params, pre, h, "conv", "ln", spec.ln_eps);
    h = ops::relu(h);
  }
  return conv(1, h, p(params, "final.w"), p(params, "final.b"));
}

Tensor unet_forward(const NetworkSpec& spec, const ParamMap& params, const Tensor& x) {
  Tensor h = x;
  std::vector<Tensor> skips;
  for (int i = 0; i < 3; ++i) {
    std::string pre = "enc" + std::to_string(i) + ".";
    h = ops::relu(conv_ln(2, params, pre, h, "conv1", "ln1", spec.ln_eps));
    h = ops::relu(conv_ln(2, params, pre, h, "conv2", "ln2", spec.ln_eps));
    skips.push_back(h);
    h = ops::subsample2(h);
  }
  h = ops::relu(conv_ln(2, params, "bottom.", h, "conv1", "ln1", spec.ln_eps));
  h = ops::relu(conv_ln(2, params, "bottom.", h, "conv2", "ln2", spec.ln_eps));
  for (int i = 2; i >= 0; --i) {
    std::string pre = "dec" + std::to_string(i) + ".";
    h = ops::upsample2(h);
    h = ops::channel_concat(h, skips[static_cast<size_t>(i)]);
    h = ops::relu(conv_ln(2, params, pre, h, "conv1", "ln1", spec.ln_eps));
    h = ops::relu(conv_ln(2, params, pre, h, "conv2", "ln2", spec.ln_eps));
  }
  return conv(2, h, p(params, "final.w"), p(params, "final.b"));
}

Tensor mlp_forward(const NetworkSpec& spec, const ParamMap& params, const Tensor& x) {
  Tensor h = x;
  for (size_t i = 0; i < spec.mlp_widths.size(); ++i) {
    std::string pre = "l" + std::to_string(i + 1) + ".";
    h = ops::leakyrelu(ops::dense(h, p(params, pre + "w"), p(params, pre + "b")), spec.leaky_slope);
  }
  return ops::dense(h, p(params, "out.w"), p(params, "out.b"));
}

}  // namespace

Tensor forward(const NetworkSpec& spec, const ParamMap& params, const Tensor& batch) {
  Shape expect = spec.input_shape(batch.shape().empty() ? 1 : batch.shape()[0]);
  if (batch.shape() != expect)
    throw std::runtime_error("forward: batch shape " + shape_str(batch.shape()) +
                             " does not match spec input " + shape_str(expect));
  switch (spec.arch) {
    case Arch::Critic: return critic_forward(spec, params, batch);
    case Arch::Generator1d: return generator1d_forward(spec, params, batch);
    case Arch::UNet: return unet_forward(spec, params, batch);
    case Arch::DenseMLP: return mlp_forward(spec, params, batch);
    case Arch::ScalarLinear:
      return ops::mul(batch, ops::bcast_full(p(params, "a"), batch.shape()));
  }
  throw std::runtime_error("forward: bad arch");
}

Tensor forward_detached(const NetworkSpec& spec, const ParamStore& store, const Tensor& batch) {
  ParamMap map;
  for (const auto& [name, value] : store.entries) map.emplace(name, value);
  return forward(spec, map, batch.detached()).detached();
}

}  // namespace gtfd
