#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "gtfd/data.hpp"
#include "gtfd/eval.hpp"

using namespace gtfd;

TEST_CASE("sine batch: frequency zero gives the zero signal") {
  Rng rng(1);
  Tensor b = sample_sine_batch(rng, 4, 128, /*nu_max=*/0.0);
  for (double v : b.data()) CHECK(v == 0.0);
}

TEST_CASE("sine batch values and grid") {
  Rng rng(2);
  Tensor b = sample_sine_batch(rng, 16, 128);
  CHECK(b.shape() == Shape{16, 1, 128});
  for (double v : b.data()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  // every row must be sin(2*pi*nu*t_j) on the t_j = j/127 grid for some
  // nu in [0,5]; recover nu by grid scan and verify the whole row
  for (int64_t i = 0; i < 4; ++i) {
    const double* row = b.data().data() + i * 128;
    double best_nu = 0, best_err = 1e9;
    for (int64_t g = 0; g <= 50000; ++g) {
      double nu = 5.0 * static_cast<double>(g) / 50000.0;
      double err = 0;
      for (int64_t j = 0; j < 128; j += 7) {
        double t = static_cast<double>(j) / 127.0;
        err = std::max(err, std::fabs(row[j] - std::sin(2.0 * std::numbers::pi * nu * t)));
      }
      if (err < best_err) {
        best_err = err;
        best_nu = nu;
      }
    }
    double err = 0;
    for (int64_t j = 0; j < 128; ++j) {
      double t = static_cast<double>(j) / 127.0;
      err = std::max(err, std::fabs(row[j] - std::sin(2.0 * std::numbers::pi * best_nu * t)));
    }
    CHECK(err < 1e-2);
  }
}

TEST_CASE("gaussian noise: sigma zero is exactly zero") {
  Rng rng(4);
  NoiseModel m;
  m.sigma = 0.0;
  Tensor n = sample_noise(m, {4, 1, 32}, rng);
  for (double v : n.data()) CHECK(v == 0.0);
}

TEST_CASE("gaussian noise: empirical std near sigma") {
  Rng rng(5);
  NoiseModel m;
  m.sigma = 1.0;
  Tensor n = sample_noise(m, {1, 1, 100000}, rng);
  double s2 = 0;
  for (double v : n.data()) s2 += v * v;
  double sd = std::sqrt(s2 / static_cast<double>(n.size()));
  CHECK(sd > 0.99);
  CHECK(sd < 1.01);
}

TEST_CASE("localized noise: zero points means zero field, hits stay in bounds") {
  Rng rng(6);
  NoiseModel m;
  m.variant = NoiseModel::Variant::localized;
  m.n_points = 0;
  Tensor z = sample_noise(m, {2, 1, 16, 16}, rng);
  for (double v : z.data()) CHECK(v == 0.0);

  m.n_points = 500;
  m.pos_std = 5.0;
  m.amp_std = 0.5;
  Tensor n = sample_noise(m, {2, 1, 16, 16}, rng);  // in-bounds by shape
  int64_t nonzero = 0;
  for (double v : n.data()) nonzero += v != 0.0;
  CHECK(nonzero > 0);
  CHECK(nonzero <= 2 * 500);  // at most n_points pixels per channel
  CHECK_THROWS(sample_noise(m, {2, 1, 32}, rng));  // needs 2d spatial
}

TEST_CASE("mixed noise uses one sigma per sample") {
  Rng rng(7);
  NoiseModel m;
  m.variant = NoiseModel::Variant::mixed;
  m.sigma_max = 0.2;
  m.n_points = 0;  // isolate the gaussian part
  Tensor n = sample_noise(m, {64, 1, 16, 16}, rng);
  // per-sample stds should spread over [0, 0.2], not concentrate
  double lo = 1e9, hi = 0;
  for (int64_t i = 0; i < 64; ++i) {
    double s2 = 0;
    for (int64_t j = 0; j < 256; ++j) {
      double v = n.data()[i * 256 + j];
      s2 += v * v;
    }
    double sd = std::sqrt(s2 / 256.0);
    lo = std::min(lo, sd);
    hi = std::max(hi, sd);
  }
  CHECK(lo < 0.05);
  CHECK(hi > 0.12);
  CHECK(hi < 0.25);
}

TEST_CASE("make_noisy identities") {
  Tensor y({2, 2}, {1, -2, 3, 0.5});
  Tensor zero = Tensor::zeros({2, 2});
  Tensor ones = Tensor::full({2, 2}, 1.0);
  Tensor a = make_noisy(y, zero, ResidualMode::additive);
  Tensor m = make_noisy(y, ones, ResidualMode::multiplicative);
  for (int64_t i = 0; i < y.size(); ++i) {
    CHECK(a.data()[i] == y.data()[i]);
    CHECK(m.data()[i] == y.data()[i]);
  }
}

TEST_CASE("noisy sine baseline sits at 6.1 dB") {
  Rng rng(8);
  NoiseModel m;  // N(0,1)
  int64_t n = 512;
  double total = 0;
  for (int64_t i = 0; i < n; ++i) {
    Tensor y = sample_sine_batch(rng, 1, 128);
    Tensor yd = make_noisy(y, sample_noise(m, y.shape(), rng), ResidualMode::additive);
    total += psnr(y, yd, 2.0);
  }
  double mean = total / static_cast<double>(n);
  CHECK(mean > 6.1 - 0.3);
  CHECK(mean < 6.1 + 0.3);
}

TEST_CASE("identical seeds give identical batches") {
  Rng a(9), b(9);
  Tensor x = sample_sine_batch(a, 4, 64);
  Tensor y = sample_sine_batch(b, 4, 64);
  for (int64_t i = 0; i < x.size(); ++i) CHECK(x.data()[i] == y.data()[i]);
  NoiseModel m;
  Tensor nx = sample_noise(m, {4, 1, 64}, a);
  Tensor ny = sample_noise(m, {4, 1, 64}, b);
  for (int64_t i = 0; i < nx.size(); ++i) CHECK(nx.data()[i] == ny.data()[i]);
}

TEST_CASE("substreams decorrelate from the parent") {
  Rng a(10);
  Rng s = a.substream(1);
  CHECK(a.next_u64() != s.next_u64());
}

TEST_CASE("rect images are piecewise constant in [0,1]") {
  Rng rng(11);
  Tensor imgs = sample_rect_images(rng, 4, 16);
  CHECK(imgs.shape() == Shape{4, 1, 16, 16});
  for (double v : imgs.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // piecewise constancy: few distinct values per image
  for (int64_t i = 0; i < 4; ++i) {
    std::vector<double> vals(imgs.data().begin() + i * 256, imgs.data().begin() + (i + 1) * 256);
    std::sort(vals.begin(), vals.end());
    int64_t distinct = 1;
    for (size_t j = 1; j < vals.size(); ++j) distinct += vals[j] != vals[j - 1];
    CHECK(distinct <= 8);
  }
}

TEST_CASE("stl10 reader: scaling, layout and truncation") {
  const char* path = "stl10_test.bin";
  const int64_t rec = 96 * 96 * 3;
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    std::vector<unsigned char> zero(static_cast<size_t>(rec), 0);
    f.write(reinterpret_cast<const char*>(zero.data()), rec);
    std::vector<unsigned char> ones(static_cast<size_t>(rec), 255);
    f.write(reinterpret_cast<const char*>(ones.data()), rec);
  }
  std::vector<Tensor> imgs = load_stl10(path);
  REQUIRE(imgs.size() == 2);
  CHECK(imgs[0].shape() == Shape{3, 96, 96});
  for (double v : imgs[0].data()) CHECK(v == 0.0);
  for (double v : imgs[1].data()) CHECK(v == 1.0);

  std::vector<Tensor> cropped = load_stl10(path, -1, 32);
  CHECK(cropped[0].shape() == Shape{3, 32, 32});

  {
    std::ofstream f(path, std::ios::binary | std::ios::app);
    f.put(7);  // stray byte -> length no longer a record multiple
  }
  CHECK_THROWS(load_stl10(path));
  std::remove(path);
}
