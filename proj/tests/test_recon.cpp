#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gtfd/data.hpp"
#include "gtfd/eval.hpp"
#include "gtfd/recon.hpp"

using namespace gtfd;

TEST_CASE("blur of an impulse stamps a 1/9 box") {
  Tensor x = Tensor::zeros({8, 8});
  x.data()[3 * 8 + 4] = 9.0;
  Tensor y = recon::blur_apply(x);
  for (int64_t r = 0; r < 8; ++r)
    for (int64_t c = 0; c < 8; ++c) {
      bool in_box = std::abs(r - 3) <= 1 && std::abs(c - 4) <= 1;
      CHECK(y.data()[r * 8 + c] == doctest::Approx(in_box ? 1.0 : 0.0));
    }
}

TEST_CASE("blur preserves the mean and handles wrap-around") {
  Rng rng(1);
  Tensor x = Tensor::zeros({1, 8, 8});
  for (double& v : x.data()) v = rng.uniform();
  Tensor y = recon::blur_apply(x);
  double sx = 0, sy = 0;
  for (int64_t i = 0; i < x.size(); ++i) {
    sx += x.data()[i];
    sy += y.data()[i];
  }
  CHECK(sy == doctest::Approx(sx).epsilon(1e-12));
  // corner impulse wraps to the opposite edges
  Tensor corner = Tensor::zeros({4, 4});
  corner.data()[0] = 9.0;
  Tensor b = recon::blur_apply(corner);
  CHECK(b.data()[3 * 4 + 3] == doctest::Approx(1.0));
}

TEST_CASE("blur is self-adjoint to 1e-10") {
  Rng rng(2);
  Tensor x = Tensor::zeros({1, 16, 16});
  Tensor z = Tensor::zeros({1, 16, 16});
  for (double& v : x.data()) v = rng.normal();
  for (double& v : z.data()) v = rng.normal();
  Tensor ax = recon::blur_apply(x);
  Tensor az = recon::blur_apply(z);
  double lhs = 0, rhs = 0;
  for (int64_t i = 0; i < x.size(); ++i) {
    lhs += ax.data()[i] * z.data()[i];
    rhs += x.data()[i] * az.data()[i];
  }
  CHECK(std::fabs(lhs - rhs) < 1e-10);
}

TEST_CASE("lambda zero with identity operator returns the data") {
  Rng rng(3);
  Tensor b = Tensor::zeros({16, 16});
  for (double& v : b.data()) v = rng.uniform();
  recon::TvOptions opt;
  opt.lambda = 0.0;
  opt.use_blur = false;
  Tensor x = recon::tv_reconstruct(b, opt);
  for (int64_t i = 0; i < b.size(); ++i)
    CHECK(x.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-7));
}

TEST_CASE("large lambda flattens toward a constant") {
  Rng rng(4);
  Tensor b = sample_rect_images(rng, 1, 16);
  recon::TvOptions opt;
  opt.lambda = 100.0;
  opt.iters = 40000;
  opt.use_blur = false;
  Tensor x = recon::tv_reconstruct(b, opt);
  double lo = 1e9, hi = -1e9;
  for (double v : x.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double blo = 1e9, bhi = -1e9;
  for (double v : b.data()) {
    blo = std::min(blo, v);
    bhi = std::max(bhi, v);
  }
  CHECK(hi - lo < 0.2 * (bhi - blo));
}

TEST_CASE("objective decreases along the descent") {
  Rng rng(5);
  Tensor clean = sample_rect_images(rng, 1, 16);
  NoiseModel nm;
  nm.sigma = 0.1;
  Tensor b = make_noisy(recon::blur_apply(clean), sample_noise(nm, clean.shape(), rng),
                        ResidualMode::additive);
  recon::TvOptions opt;
  opt.lambda = 5e-3;
  opt.iters = 50;
  opt.tol = 0.0;  // run all iterations
  Tensor x = recon::tv_reconstruct(b, opt);
  CHECK(recon::tv_objective(x, b, opt) < recon::tv_objective(b.clone(), b, opt));
}

TEST_CASE("deblurring a rect image beats doing nothing") {
  Rng rng(6);
  Tensor clean = sample_rect_images(rng, 1, 16);
  Tensor b = recon::blur_apply(clean);  // noiseless blur
  recon::TvOptions opt;
  opt.lambda = 1e-4;
  opt.iters = 5000;
  Tensor x = recon::tv_reconstruct(b, opt);
  CHECK(psnr(clean, x, 1.0) > psnr(clean, b, 1.0));
}

TEST_CASE("line search: grid arithmetic, determinism, local optimality") {
  Rng rng(7);
  Tensor clean = sample_rect_images(rng, 1, 16);
  NoiseModel nm;
  nm.sigma = 0.05;
  Tensor b = make_noisy(recon::blur_apply(clean), sample_noise(nm, clean.shape(), rng),
                        ResidualMode::additive);
  std::vector<double> grid;
  auto pipeline = [&](double lam) {
    grid.push_back(lam);
    recon::TvOptions o;
    o.lambda = lam;
    o.iters = 400;
    return recon::tv_reconstruct(b, o);
  };
  auto r1 = recon::lambda_line_search(pipeline, 1e-3, 2.0, 5, clean, 1.0);
  // factor 2, steps 5, lambda0 1e-3 spans [3.1e-5, 3.2e-2]
  CHECK(grid.size() == 11);
  CHECK(grid.front() == doctest::Approx(3.125e-5));
  CHECK(grid.back() == doctest::Approx(3.2e-2));
  auto r2 = recon::lambda_line_search(pipeline, 1e-3, 2.0, 5, clean, 1.0);
  CHECK(r1.lambda == r2.lambda);
  CHECK(r1.psnr == r2.psnr);
  // the returned lambda is a local max over the evaluated grid
  recon::TvOptions o;
  o.iters = 400;
  auto score = [&](double lam) {
    recon::TvOptions oo = o;
    oo.lambda = lam;
    return psnr(clean, recon::tv_reconstruct(b, oo), 1.0);
  };
  CHECK(r1.psnr + 1e-12 >= score(r1.lambda * 2.0));
  CHECK(r1.psnr + 1e-12 >= score(r1.lambda / 2.0));
  CHECK_THROWS(recon::lambda_line_search(pipeline, 0.0, 2.0, 5, clean, 1.0));
  CHECK_THROWS(recon::lambda_line_search(pipeline, 1e-3, 1.0, 5, clean, 1.0));
  CHECK_THROWS(recon::lambda_line_search(pipeline, 1e-3, 2.0, 2, clean, 1.0));
}
