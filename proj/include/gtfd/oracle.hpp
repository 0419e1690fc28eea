#ifndef GTFD_ORACLE_HPP
#define GTFD_ORACLE_HPP

#include <cstdint>
#include <vector>

namespace gtfd::oracle {

// Sorted 1D samples; an empirical measure on the line.
struct Empirical1D {
  std::vector<double> values;  // non-decreasing
  static Empirical1D from_samples(std::vector<double> samples);
};

// Exact W1 between two equally sized empirical measures:
// mean absolute difference of the sorted samples.
double w1_empirical(const Empirical1D& a, const Empirical1D& b);

// W1 between N(m1,s1^2) and N(m2,s2^2), computed by quantile quadrature
// (adaptive Simpson, abs tol 1e-8). For m1 == m2 this equals
// |s1 - s2| * sqrt(2/pi); that identity is a test, not an assumption.
double w1_gaussian(double m1, double s1, double m2, double s2);

struct LinearFactors {
  double g1;   // 1/sqrt(1+sigma^2), from the renoising constraint alone
  double g2;   // 1 - sigma/sqrt(1+sigma^2), from the residual constraint alone
  double map;  // 1/(1+sigma^2), linear MAP shrinkage
};

LinearFactors linear_factors(double sigma);

enum class LinearObjective { obs1, obs2 };

// Brute-force argmin over a grid of scalar factors a of the W1 objective
// implied by G(y) = a*y in the linear Gaussian case.
double linear_argmin(LinearObjective objective, double sigma, double grid_lo = 1e-3,
                     double grid_hi = 1.5, double grid_step = 1e-3);

// Half-L1 distance between the discrete convolution of the histograms of
// y and eta and the histogram of ydelta, on a shared uniform bin grid.
double convolution_identity_check(const std::vector<double>& y_samples,
                                  const std::vector<double>& eta_samples,
                                  const std::vector<double>& ydelta_samples, int64_t bins = 64);

}  // namespace gtfd::oracle

#endif
