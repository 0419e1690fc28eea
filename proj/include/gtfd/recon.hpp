#ifndef GTFD_RECON_HPP
#define GTFD_RECON_HPP

#include <functional>

#include "gtfd/tensor.hpp"

namespace gtfd::recon {

// Uniform 3x3 blur with circular boundary: linear, self-adjoint,
// mass-preserving. Applies per channel to [H,W] or [C,H,W].
Tensor blur_apply(const Tensor& x);

struct TvOptions {
  double lambda = 1e-3;
  int64_t iters = 2000;
  double tol = 1e-8;      // relative objective decrease stopping criterion
  double eps_tv = 1e-3;   // Huber smoothing width
  bool use_blur = true;   // A = 3x3 blur; false: A = identity
};

// Minimizes 0.5*||A x - b||^2 + lambda * TV_huber(x) by fixed-step
// gradient descent with step 1/(1 + 8*lambda/eps_tv). Anisotropic TV,
// circular finite differences.
Tensor tv_reconstruct(const Tensor& b, const TvOptions& opt);

double tv_objective(const Tensor& x, const Tensor& b, const TvOptions& opt);

struct LineSearchResult {
  double lambda = 0;
  double psnr = 0;
};

// Evaluates lambda0 * factor^j for j in [-steps, steps] and returns the
// PSNR-argmax against the clean reference (evaluation-only tool).
LineSearchResult lambda_line_search(const std::function<Tensor(double lambda)>& pipeline,
                                    double lambda0, double factor, int64_t steps,
                                    const Tensor& reference, double peak = 1.0);

}  // namespace gtfd::recon

#endif
