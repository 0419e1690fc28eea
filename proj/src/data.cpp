#include "gtfd/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace gtfd {

double Rng::normal() {
  // cos branch only; one normal consumes exactly two uniforms
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::substream(uint64_t stream_id) const {
  Rng mix(state_ ^ (0x6a09e667f3bcc909ULL + stream_id * 0x3c6ef372fe94f82bULL));
  mix.next_u64();
  return Rng(mix.next_u64());
}

Tensor sample_sine_batch(Rng& rng, int64_t k, int64_t len, double nu_max) {
  if (k < 1) throw std::runtime_error("sample_sine_batch: k must be >= 1");
  Tensor out = Tensor::zeros({k, 1, len});
  auto d = out.data();
  for (int64_t i = 0; i < k; ++i) {
    double nu = rng.uniform(0.0, nu_max);
    for (int64_t j = 0; j < len; ++j) {
      double t = static_cast<double>(j) / static_cast<double>(len - 1);
      d[static_cast<size_t>(i * len + j)] = std::sin(2.0 * std::numbers::pi * nu * t);
    }
  }
  return out;
}

namespace {

void add_localized(std::span<double> channel, int64_t h, int64_t w, const NoiseModel& m,
                   Rng& rng) {
  double ch = rng.uniform(0.0, static_cast<double>(h));
  double cw = rng.uniform(0.0, static_cast<double>(w));
  for (int64_t p = 0; p < m.n_points; ++p) {
    double ph = ch + m.pos_std * rng.normal();
    double pw = cw + m.pos_std * rng.normal();
    int64_t r = std::llround(ph);
    int64_t c = std::llround(pw);
    r = std::min(h - 1, std::max<int64_t>(0, r));  // project back into the image
    c = std::min(w - 1, std::max<int64_t>(0, c));
    channel[static_cast<size_t>(r * w + c)] += m.amp_std * rng.normal();  // repeats accumulate
  }
}

}  // namespace

Tensor sample_noise(const NoiseModel& model, const Shape& shape, Rng& rng) {
  switch (model.variant) {
    case NoiseModel::Variant::gaussian: {
      Tensor out = Tensor::zeros(shape);
      for (double& v : out.data()) v = model.sigma * rng.normal();
      return out;
    }
    case NoiseModel::Variant::localized: {
      if (shape.size() != 4)
        throw std::runtime_error("sample_noise: localized noise needs [N,C,H,W], got " +
                                 shape_str(shape));
      int64_t h = shape[shape.size() - 2], w = shape[shape.size() - 1];
      int64_t channels = numel(shape) / (h * w);
      Tensor out = Tensor::zeros(shape);
      auto d = out.data();
      for (int64_t c = 0; c < channels; ++c)
        add_localized(d.subspan(static_cast<size_t>(c * h * w), static_cast<size_t>(h * w)), h, w,
                      model, rng);
      return out;
    }
    case NoiseModel::Variant::mixed: {
      if (shape.size() != 4)
        throw std::runtime_error("sample_noise: mixed noise needs [N,C,H,W], got " +
                                 shape_str(shape));
      int64_t batch = shape[0];
      int64_t per = numel(shape) / batch;
      Tensor out = Tensor::zeros(shape);
      auto d = out.data();
      for (int64_t b = 0; b < batch; ++b) {
        double sigma = rng.uniform(0.0, model.sigma_max);  // one sigma per sample
        for (int64_t j = 0; j < per; ++j) d[static_cast<size_t>(b * per + j)] = sigma * rng.normal();
      }
      NoiseModel loc = model;
      loc.variant = NoiseModel::Variant::localized;
      Tensor field = sample_noise(loc, shape, rng);
      auto fd = field.data();
      for (size_t i = 0; i < d.size(); ++i) d[i] += fd[i];
      return out;
    }
    case NoiseModel::Variant::empirical: {
      if (model.samples.empty()) throw std::runtime_error("sample_noise: empty empirical pool");
      Shape one = model.samples[0].shape();
      int64_t per = numel(one);
      if (numel(shape) % per != 0)
        throw std::runtime_error("sample_noise: shape " + shape_str(shape) +
                                 " is not a batch of empirical samples " + shape_str(one));
      int64_t k = numel(shape) / per;
      Tensor out = Tensor::zeros(shape);
      auto d = out.data();
      for (int64_t i = 0; i < k; ++i) {
        const Tensor& s = model.samples[static_cast<size_t>(
            rng.uniform_int(static_cast<int64_t>(model.samples.size())))];
        auto sd = s.data();
        for (int64_t j = 0; j < per; ++j) d[static_cast<size_t>(i * per + j)] = sd[static_cast<size_t>(j)];
      }
      return out;
    }
  }
  throw std::runtime_error("sample_noise: bad variant");
}

Tensor make_noisy(const Tensor& y, const Tensor& eta, ResidualMode mode) {
  if (y.shape() != eta.shape())
    throw std::runtime_error("make_noisy: shape mismatch " + shape_str(y.shape()) + " vs " +
                             shape_str(eta.shape()));
  return mode == ResidualMode::additive ? ops::add(y, eta) : ops::mul(y, eta);
}

Tensor sample_rect_images(Rng& rng, int64_t k, int64_t size, int64_t channels, int64_t n_rects) {
  Tensor out = Tensor::zeros({k, channels, size, size});
  auto d = out.data();
  for (int64_t i = 0; i < k; ++i) {
    double bg = rng.uniform(0.0, 0.3);
    for (int64_t c = 0; c < channels; ++c)
      for (int64_t j = 0; j < size * size; ++j)
        d[static_cast<size_t>(((i * channels + c) * size * size) + j)] = bg;
    for (int64_t r = 0; r < n_rects; ++r) {
      int64_t h0 = rng.uniform_int(size), w0 = rng.uniform_int(size);
      int64_t h1 = h0 + 2 + rng.uniform_int(size / 2);
      int64_t w1 = w0 + 2 + rng.uniform_int(size / 2);
      h1 = std::min(h1, size);
      w1 = std::min(w1, size);
      double v = rng.uniform(0.4, 1.0);
      for (int64_t c = 0; c < channels; ++c)
        for (int64_t rr = h0; rr < h1; ++rr)
          for (int64_t cc = w0; cc < w1; ++cc)
            d[static_cast<size_t>((i * channels + c) * size * size + rr * size + cc)] = v;
    }
  }
  return out;
}

std::vector<Tensor> load_stl10(const std::string& path, int64_t max_images, int64_t crop) {
  constexpr int64_t kSide = 96;
  constexpr int64_t kRecord = kSide * kSide * 3;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_stl10: cannot open " + path);
  in.seekg(0, std::ios::end);
  int64_t bytes = in.tellg();
  in.seekg(0);
  if (bytes % kRecord != 0)
    throw std::runtime_error("load_stl10: file length " + std::to_string(bytes) +
                             " is not a multiple of record size " + std::to_string(kRecord) +
                             "; trailing bytes at offset " + std::to_string(bytes - bytes % kRecord));
  int64_t count = bytes / kRecord;
  if (max_images >= 0) count = std::min(count, max_images);
  if (crop > kSide) throw std::runtime_error("load_stl10: crop larger than 96");
  int64_t side = crop > 0 ? crop : kSide;
  int64_t off = (kSide - side) / 2;

  std::vector<Tensor> images;
  images.reserve(static_cast<size_t>(count));
  std::vector<unsigned char> buf(static_cast<size_t>(kRecord));
  for (int64_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()), kRecord);
    if (!in)
      throw std::runtime_error("load_stl10: truncated read at offset " + std::to_string(i * kRecord));
    Tensor img = Tensor::zeros({3, side, side});
    auto d = img.data();
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t r = 0; r < side; ++r)
        for (int64_t col = 0; col < side; ++col) {
          // source is column-major within each channel
          unsigned char byte = buf[static_cast<size_t>(c * kSide * kSide + (col + off) * kSide + (r + off))];
          d[static_cast<size_t>(c * side * side + r * side + col)] = static_cast<double>(byte) / 255.0;
        }
    images.push_back(std::move(img));
  }
  return images;
}

}  // namespace gtfd
