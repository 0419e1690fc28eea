#include "gtfd/eval.hpp"

#include <cmath>
#include <stdexcept>

namespace gtfd {

double psnr(const Tensor& reference, const Tensor& estimate, double peak) {
  if (reference.shape() != estimate.shape())
    throw std::runtime_error("psnr: shape mismatch " + shape_str(reference.shape()) + " vs " +
                             shape_str(estimate.shape()));
  if (peak <= 0) throw std::runtime_error("psnr: peak must be positive");
  auto rd = reference.data();
  auto ed = estimate.data();
  double mse = 0;
  for (size_t i = 0; i < rd.size(); ++i) {
    double d = rd[i] - ed[i];
    mse += d * d;
  }
  mse /= static_cast<double>(rd.size());
  if (mse == 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

EvalReport evaluate(const NetworkSpec& gen, const ParamStore& params,
                    const std::function<Tensor(Rng&, int64_t)>& clean_source,
                    const NoiseModel& noise, int64_t n, ResidualMode mode, double peak, Rng& rng,
                    int64_t batch) {
  if (n < 1) throw std::runtime_error("evaluate: n must be >= 1");
  EvalReport report;
  report.peak = peak;
  for (int64_t done = 0; done < n; done += batch) {
    int64_t k = std::min(batch, n - done);
    Tensor y = clean_source(rng, k);
    Tensor eta = sample_noise(noise, y.shape(), rng);
    Tensor yd = make_noisy(y, eta, mode);
    Tensor out = forward_detached(gen, params, yd);
    int64_t per = y.size() / k;
    for (int64_t i = 0; i < k; ++i) {
      auto slice = [&](const Tensor& t) {
        auto d = t.data();
        return Tensor({per}, std::vector<double>(d.begin() + i * per, d.begin() + (i + 1) * per));
      };
      Tensor yi = slice(y);
      report.psnr_denoised.push_back(psnr(yi, slice(out), peak));
      report.psnr_noisy.push_back(psnr(yi, slice(yd), peak));
    }
  }
  report.count = static_cast<int64_t>(report.psnr_denoised.size());
  double s = 0, s2 = 0, sn = 0;
  for (double v : report.psnr_denoised) {
    s += v;
    s2 += v * v;
  }
  for (double v : report.psnr_noisy) sn += v;
  double cnt = static_cast<double>(report.count);
  report.mean_denoised = s / cnt;
  report.std_denoised = std::sqrt(std::max(0.0, s2 / cnt - report.mean_denoised * report.mean_denoised));
  report.mean_noisy = sn / cnt;
  return report;
}

}  // namespace gtfd
