#ifndef GTFD_DATA_HPP
#define GTFD_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "gtfd/tensor.hpp"

namespace gtfd {

// Deterministic cross-platform random stream (splitmix64 underneath,
// Box-Muller for normals). Library distributions are avoided on purpose:
// their draw sequences differ between standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  int64_t uniform_int(int64_t n) { return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n)); }

  // Independent stream derived from (state, stream_id).
  Rng substream(uint64_t stream_id) const;

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s; }

  static constexpr const char* kAlgorithm = "splitmix64/box-muller";

 private:
  uint64_t state_;
};

enum class ResidualMode { additive, multiplicative };

struct NoiseModel {
  enum class Variant { gaussian, localized, mixed, empirical };
  Variant variant = Variant::gaussian;
  double sigma = 1.0;       // gaussian
  double sigma_max = 0.2;   // mixed: sigma ~ U[0, sigma_max] per sample
  int64_t n_points = 500;   // localized
  double pos_std = 5.0;
  double amp_std = 0.5;
  std::vector<Tensor> samples;  // empirical pool, drawn uniformly
};

// [k,1,len] equidistant samples of sin(2*pi*nu*t) on [0,1], nu ~ U[0,5].
Tensor sample_sine_batch(Rng& rng, int64_t k, int64_t len = 128, double nu_max = 5.0);

// Noise tensor of the given shape. Localized/mixed need [N,C,H,W].
Tensor sample_noise(const NoiseModel& model, const Shape& shape, Rng& rng);

// additive: y + eta; multiplicative: y .* eta.
Tensor make_noisy(const Tensor& y, const Tensor& eta, ResidualMode mode);

// Random axis-aligned constant rectangles on a constant background,
// values in [0,1]; piecewise-constant test images for the TV pipeline.
Tensor sample_rect_images(Rng& rng, int64_t k, int64_t size, int64_t channels = 1,
                          int64_t n_rects = 3);

// STL-10 binary format: records of 96*96*3 bytes, channel-major,
// column-major within channel. Returns [3,96,96] images in [0,1], or
// center crops of extent `crop` when crop > 0.
std::vector<Tensor> load_stl10(const std::string& path, int64_t max_images = -1,
                               int64_t crop = 0);

}  // namespace gtfd

#endif
