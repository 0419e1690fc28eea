#include "gtfd/recon.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gtfd/eval.hpp"

namespace gtfd::recon {

namespace {

struct ImageView {
  int64_t channels;
  int64_t h;
  int64_t w;
};

ImageView image_view(const Tensor& x) {
  if (x.shape().size() == 2) return {1, x.shape()[0], x.shape()[1]};
  if (x.shape().size() == 3) return {x.shape()[0], x.shape()[1], x.shape()[2]};
  if (x.shape().size() == 4) return {x.shape()[0] * x.shape()[1], x.shape()[2], x.shape()[3]};
  throw std::runtime_error("recon: expected [H,W], [C,H,W] or [N,C,H,W], got " +
                           shape_str(x.shape()));
}

inline int64_t wrap(int64_t i, int64_t n) { return i < 0 ? i + n : (i >= n ? i - n : i); }

void blur_channel(const double* src, double* dst, int64_t h, int64_t w) {
  for (int64_t r = 0; r < h; ++r)
    for (int64_t c = 0; c < w; ++c) {
      double s = 0;
      for (int64_t dr = -1; dr <= 1; ++dr)
        for (int64_t dc = -1; dc <= 1; ++dc) s += src[wrap(r + dr, h) * w + wrap(c + dc, w)];
      dst[r * w + c] = s / 9.0;
    }
}

double huber(double t, double eps) {
  double a = std::fabs(t);
  return a <= eps ? t * t / (2 * eps) : a - eps / 2;
}

double huber_grad(double t, double eps) { return std::clamp(t / eps, -1.0, 1.0); }

}  // namespace

Tensor blur_apply(const Tensor& x) {
  ImageView v = image_view(x);
  Tensor y = Tensor::zeros(x.shape());
  for (int64_t c = 0; c < v.channels; ++c)
    blur_channel(x.data().data() + c * v.h * v.w, y.data().data() + c * v.h * v.w, v.h, v.w);
  return y;
}

double tv_objective(const Tensor& x, const Tensor& b, const TvOptions& opt) {
  ImageView v = image_view(x);
  Tensor ax = opt.use_blur ? blur_apply(x) : x.clone();
  auto axd = ax.data();
  auto bd = b.data();
  double fid = 0;
  for (size_t i = 0; i < axd.size(); ++i) {
    double d = axd[i] - bd[i];
    fid += d * d;
  }
  double tv = 0;
  auto xd = x.data();
  for (int64_t c = 0; c < v.channels; ++c) {
    const double* img = xd.data() + c * v.h * v.w;
    for (int64_t r = 0; r < v.h; ++r)
      for (int64_t cc = 0; cc < v.w; ++cc) {
        tv += huber(img[wrap(r + 1, v.h) * v.w + cc] - img[r * v.w + cc], opt.eps_tv);
        tv += huber(img[r * v.w + wrap(cc + 1, v.w)] - img[r * v.w + cc], opt.eps_tv);
      }
  }
  return 0.5 * fid + opt.lambda * tv;
}

Tensor tv_reconstruct(const Tensor& b, const TvOptions& opt) {
  if (opt.lambda < 0) throw std::runtime_error("tv_reconstruct: lambda must be >= 0");
  ImageView v = image_view(b);
  Tensor x = b.clone();
  double step = 1.0 / (1.0 + 8.0 * opt.lambda / opt.eps_tv);
  double obj = tv_objective(x, b, opt);
  int64_t rises = 0;
  Tensor grad = Tensor::zeros(b.shape());
  for (int64_t it = 0; it < opt.iters; ++it) {
    // gradient of the fidelity term: A^T (A x - b); A is self-adjoint
    Tensor ax = opt.use_blur ? blur_apply(x) : x.clone();
    auto axd = ax.data();
    auto bd = b.data();
    for (size_t i = 0; i < axd.size(); ++i) axd[i] -= bd[i];
    Tensor fid_grad = opt.use_blur ? blur_apply(ax) : std::move(ax);

    auto gd = grad.data();
    auto fg = fid_grad.data();
    auto xd = x.data();
    std::fill(gd.begin(), gd.end(), 0.0);
    for (int64_t c = 0; c < v.channels; ++c) {
      double* g = gd.data() + c * v.h * v.w;
      const double* img = xd.data() + c * v.h * v.w;
      for (int64_t r = 0; r < v.h; ++r)
        for (int64_t cc = 0; cc < v.w; ++cc) {
          double dv = huber_grad(img[wrap(r + 1, v.h) * v.w + cc] - img[r * v.w + cc], opt.eps_tv);
          double dh = huber_grad(img[r * v.w + wrap(cc + 1, v.w)] - img[r * v.w + cc], opt.eps_tv);
          g[r * v.w + cc] -= opt.lambda * (dv + dh);
          g[wrap(r + 1, v.h) * v.w + cc] += opt.lambda * dv;
          g[r * v.w + wrap(cc + 1, v.w)] += opt.lambda * dh;
        }
    }
    for (size_t i = 0; i < gd.size(); ++i) xd[i] -= step * (fg[i] + gd[i]);

    double next = tv_objective(x, b, opt);
    if (next > obj) {
      if (++rises >= 10) throw std::runtime_error("tv_reconstruct: objective increased 10 times");
    } else {
      rises = 0;
      if (obj - next < opt.tol * std::max(1.0, std::fabs(obj))) {
        obj = next;
        break;
      }
    }
    obj = next;
  }
  return x;
}

LineSearchResult lambda_line_search(const std::function<Tensor(double)>& pipeline, double lambda0,
                                    double factor, int64_t steps, const Tensor& reference,
                                    double peak) {
  if (lambda0 <= 0 || factor <= 1 || steps < 3)
    throw std::runtime_error("lambda_line_search: need lambda0 > 0, factor > 1, steps >= 3");
  LineSearchResult best{0, -1};
  for (int64_t j = -steps; j <= steps; ++j) {
    double lam = lambda0 * std::pow(factor, static_cast<double>(j));
    double p = psnr(reference, pipeline(lam), peak);
    if (p > best.psnr) best = {lam, p};
  }
  return best;
}

}  // namespace gtfd::recon
