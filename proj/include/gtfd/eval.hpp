#ifndef GTFD_EVAL_HPP
#define GTFD_EVAL_HPP

#include <vector>

#include "gtfd/data.hpp"
#include "gtfd/nn.hpp"

namespace gtfd {

struct EvalReport {
  std::vector<double> psnr_denoised;  // per sample, G(ydelta) vs y
  std::vector<double> psnr_noisy;     // per sample, ydelta vs y
  double mean_denoised = 0;
  double std_denoised = 0;
  double mean_noisy = 0;
  double peak = 1.0;
  int64_t count = 0;
};

inline constexpr double kPsnrCap = 100.0;  // returned when MSE == 0

// 10*log10(peak^2 / MSE), capped at kPsnrCap.
double psnr(const Tensor& reference, const Tensor& estimate, double peak);

// Draws n clean samples, composes measurements, denoises with G and
// reports PSNR of both the denoised output and the noisy input.
EvalReport evaluate(const NetworkSpec& gen, const ParamStore& params,
                    const std::function<Tensor(Rng&, int64_t)>& clean_source,
                    const NoiseModel& noise, int64_t n, ResidualMode mode, double peak, Rng& rng,
                    int64_t batch = 16);

}  // namespace gtfd

#endif
