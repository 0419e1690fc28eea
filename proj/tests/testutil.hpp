#ifndef GTFD_TESTS_TESTUTIL_HPP
#define GTFD_TESTS_TESTUTIL_HPP

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gtfd/tensor.hpp"

namespace testutil {

// Scalar-valued function of leaf tensors, rebuilt per evaluation.
using ScalarFn =
    std::function<gtfd::Tensor(gtfd::Tape&, const std::vector<gtfd::Tensor>&)>;

inline double eval_scalar(const ScalarFn& f, const std::vector<gtfd::Tensor>& vals) {
  gtfd::Tape tape;
  std::vector<gtfd::Tensor> leaves;
  leaves.reserve(vals.size());
  for (const auto& v : vals) leaves.push_back(tape.leaf(v));
  return f(tape, leaves).item();
}

inline std::vector<gtfd::Tensor> analytic_grads(const ScalarFn& f,
                                                const std::vector<gtfd::Tensor>& vals) {
  gtfd::Tape tape;
  std::vector<gtfd::Tensor> leaves;
  leaves.reserve(vals.size());
  for (const auto& v : vals) leaves.push_back(tape.leaf(v));
  gtfd::Tensor out = f(tape, leaves);
  return tape.backward(out, leaves, false);
}

// Central finite differences, one entry at a time.
inline std::vector<gtfd::Tensor> fd_grads(const ScalarFn& f, const std::vector<gtfd::Tensor>& vals,
                                          double h = 1e-5) {
  std::vector<gtfd::Tensor> grads;
  for (size_t i = 0; i < vals.size(); ++i) {
    gtfd::Tensor g = gtfd::Tensor::zeros(vals[i].shape());
    for (int64_t j = 0; j < vals[i].size(); ++j) {
      std::vector<gtfd::Tensor> pert;
      for (const auto& v : vals) pert.push_back(v.clone());
      pert[i].data()[static_cast<size_t>(j)] += h;
      double fp = eval_scalar(f, pert);
      pert[i].data()[static_cast<size_t>(j)] -= 2 * h;
      double fm = eval_scalar(f, pert);
      g.data()[static_cast<size_t>(j)] = (fp - fm) / (2 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

// max over entries of |a-b| / max(|a|,|b|,floor)
inline double max_rel_err(const std::vector<gtfd::Tensor>& a, const std::vector<gtfd::Tensor>& b,
                          double floor = 1e-6) {
  double worst = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    auto ad = a[i].data();
    auto bd = b[i].data();
    for (size_t j = 0; j < ad.size(); ++j) {
      double denom = std::max({std::fabs(ad[j]), std::fabs(bd[j]), floor});
      worst = std::max(worst, std::fabs(ad[j] - bd[j]) / denom);
    }
  }
  return worst;
}

inline gtfd::Tensor random_tensor(gtfd::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                                  double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  gtfd::Tensor t = gtfd::Tensor::zeros(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// Push values away from activation kinks so finite differences stay clean.
inline void avoid_kinks(gtfd::Tensor& t, double margin = 5e-3) {
  for (double& v : t.data()) {
    if (std::fabs(v) < margin) v = v >= 0 ? margin : -margin;
  }
}

}  // namespace testutil

#endif
