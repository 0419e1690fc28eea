#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gtfd/tensor.hpp"
#include "testutil.hpp"

using namespace gtfd;
using testutil::ScalarFn;

TEST_CASE("conv1d identity kernel") {
  Tensor x({1, 1, 4}, {1, 2, 3, 4});
  Tensor w({1, 1, 3}, {0, 1, 0});
  Tensor y = ops::conv1d(x, w);
  CHECK(y.shape() == Shape{1, 1, 4});
  for (int i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("conv1d box kernel matches windowed sums") {
  Tensor x({1, 1, 4}, {1, 2, 3, 4});
  Tensor w({1, 1, 3}, {1, 1, 1});
  Tensor y = ops::conv1d(x, w);
  std::vector<double> expect = {3, 6, 9, 7};  // zero-padded window sums
  for (int i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(expect[i]));
}

TEST_CASE("layernorm of a constant vector is zero") {
  Tensor x = Tensor::full({1, 1, 8}, 3.7);
  Tensor gain = Tensor::full({1, 8}, 1.0);
  Tensor bias = Tensor::zeros({1, 8});
  Tensor y = ops::layernorm(x, gain, bias);
  for (double v : y.data()) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("conv errors name the op") {
  Tensor x({1, 2, 4}, std::vector<double>(8, 0.0));
  Tensor w({1, 3, 3}, std::vector<double>(9, 0.0));
  CHECK_THROWS_WITH_AS(ops::conv1d(x, w), doctest::Contains("conv1d"), std::runtime_error);
}

TEST_CASE("backward of sum of squares") {
  Tape tape;
  Tensor x = tape.leaf(Tensor({2}, {1, -2}));
  Tensor s = ops::sum(ops::mul(x, x));
  auto g = tape.backward(s, std::vector<Tensor>{x});
  CHECK(g[0].data()[0] == doctest::Approx(2.0));
  CHECK(g[0].data()[1] == doctest::Approx(-4.0));
}

TEST_CASE("relu gradient is zero in the inactive region") {
  Tape tape;
  Tensor x = tape.leaf(Tensor::scalar(-1.0));
  Tensor y = ops::sum(ops::relu(x));
  auto g = tape.backward(y, std::vector<Tensor>{x});
  CHECK(g[0].data()[0] == doctest::Approx(0.0));
}

TEST_CASE("backward rejects non-scalar outputs") {
  Tape tape;
  Tensor x = tape.leaf(Tensor({2}, {1, 2}));
  CHECK_THROWS_AS((void)tape.backward(x, std::vector<Tensor>{x}), std::runtime_error);
}

TEST_CASE("unreachable wrt tensors get zero gradients") {
  Tape tape;
  Tensor x = tape.leaf(Tensor::scalar(1.0));
  Tensor z = tape.leaf(Tensor::scalar(5.0));
  Tensor y = ops::sum(ops::mul(x, x));
  auto g = tape.backward(y, std::vector<Tensor>{z});
  CHECK(g[0].data()[0] == doctest::Approx(0.0));
}

TEST_CASE("second order: d/dw of (d/dx[w*x] - 1)^2") {
  Tape tape;
  Tensor w = tape.leaf(Tensor::scalar(3.0));
  Tensor x = tape.leaf(Tensor::scalar(0.7));
  Tensor y = ops::mul(w, x);
  auto gx = tape.backward(y, std::vector<Tensor>{x}, true);
  Tensor p = ops::mul(ops::add_const(gx[0], -1.0), ops::add_const(gx[0], -1.0));
  auto gw = tape.backward(ops::sum(p), std::vector<Tensor>{w});
  CHECK(gw[0].data()[0] == doctest::Approx(4.0));  // 2(w-1)
}

TEST_CASE("finite-difference gradient checks across op kinds") {
  std::mt19937_64 rng(42);
  auto check = [&](const char* name, const ScalarFn& f, std::vector<Tensor> vals) {
    INFO(name);
    auto ga = testutil::analytic_grads(f, vals);
    auto gf = testutil::fd_grads(f, vals);
    CHECK(testutil::max_rel_err(ga, gf) < 1e-4);
  };

  // elementwise / arithmetic chain
  check(
      "arith",
      [](Tape&, const std::vector<Tensor>& in) {
        Tensor t = ops::add(ops::mul(in[0], in[1]), ops::neg(ops::scale(in[0], 0.3)));
        return ops::mean(ops::sub(t, in[1]));
      },
      {testutil::random_tensor({3, 7}, rng), testutil::random_tensor({3, 7}, rng)});

  // activations away from kinks
  {
    Tensor a = testutil::random_tensor({4, 9}, rng);
    testutil::avoid_kinks(a);
    check(
        "relu/leaky",
        [](Tape&, const std::vector<Tensor>& in) {
          return ops::sum(ops::add(ops::relu(in[0]), ops::leakyrelu(in[0], 0.2)));
        },
        {a});
  }

  {
    Tensor a = testutil::random_tensor({2, 6}, rng, 0.5, 2.0);
    check(
        "reciprocal/sqrt",
        [](Tape&, const std::vector<Tensor>& in) {
          return ops::sum(ops::mul(ops::reciprocal(in[0]), ops::sqrt_eps(in[0], 1e-5)));
        },
        {a});
  }

  {
    Tensor a = testutil::random_tensor({2, 5}, rng);
    for (double& v : a.data())
      if (std::fabs(std::fabs(v) - 0.5) < 5e-3) v += 1e-2;  // keep away from the clamp edge
    check(
        "clamp_abs_min",
        [](Tape&, const std::vector<Tensor>& in) {
          return ops::sum(ops::clamp_abs_min(in[0], 0.5));
        },
        {a});
  }

  check(
      "reductions/broadcasts",
      [](Tape&, const std::vector<Tensor>& in) {
        Tensor per = ops::psum(in[0]);
        Tensor back = ops::bcast_batch(per, in[0].shape());
        Tensor m = ops::bcast_full(ops::mean(in[0]), in[0].shape());
        return ops::sum(ops::mul(back, m));
      },
      {testutil::random_tensor({3, 4, 2}, rng)});

  check(
      "feat broadcast",
      [](Tape&, const std::vector<Tensor>& in) {
        Tensor b = ops::bcast_feat(in[1], in[0].shape()[0]);
        return ops::sum(ops::mul(in[0], b));
      },
      {testutil::random_tensor({3, 5}, rng), testutil::random_tensor({5}, rng)});

  check(
      "dense",
      [](Tape&, const std::vector<Tensor>& in) {
        return ops::mean(ops::dense(in[0], in[1], in[2]));
      },
      {testutil::random_tensor({3, 4}, rng), testutil::random_tensor({5, 4}, rng),
       testutil::random_tensor({5}, rng)});

  check(
      "matmul/transpose/colsum",
      [](Tape&, const std::vector<Tensor>& in) {
        Tensor y = ops::matmul(in[0], ops::transpose(in[1]));
        return ops::sum(ops::mul(ops::broadcast_row(ops::colsum(y), 3), y));
      },
      {testutil::random_tensor({3, 4}, rng), testutil::random_tensor({6, 4}, rng)});

  check(
      "conv1d",
      [](Tape&, const std::vector<Tensor>& in) {
        return ops::mean(ops::add_channel_bias(ops::conv1d(in[0], in[1]), in[2]));
      },
      {testutil::random_tensor({2, 2, 6}, rng), testutil::random_tensor({3, 2, 3}, rng),
       testutil::random_tensor({3}, rng)});

  check(
      "conv2d",
      [](Tape&, const std::vector<Tensor>& in) {
        return ops::mean(ops::conv2d(in[0], in[1]));
      },
      {testutil::random_tensor({1, 2, 4, 4}, rng), testutil::random_tensor({2, 2, 3, 3}, rng)});

  check(
      "layernorm",
      [](Tape&, const std::vector<Tensor>& in) {
        return ops::mean(ops::layernorm(in[0], in[1], in[2]));
      },
      {testutil::random_tensor({2, 3, 4}, rng), testutil::random_tensor({3, 4}, rng),
       testutil::random_tensor({3, 4}, rng)});

  check(
      "concat/slice/pool",
      [](Tape&, const std::vector<Tensor>& in) {
        Tensor c = ops::channel_concat(in[0], in[0]);
        Tensor s = ops::channel_slice(c, 1, 3);
        return ops::sum(ops::subsample2(ops::upsample2(s)));
      },
      {testutil::random_tensor({2, 2, 4}, rng)});

  check(
      "subsample2 2d + reshape",
      [](Tape&, const std::vector<Tensor>& in) {
        Tensor p = ops::subsample2(in[0]);
        return ops::sum(ops::mul(ops::reshape(p, {2, 2}), ops::reshape(p, {2, 2})));
      },
      {testutil::random_tensor({2, 1, 2, 4}, rng)});

  check(
      "l2norm",
      [](Tape&, const std::vector<Tensor>& in) { return ops::sum(ops::l2norm(in[0])); },
      {testutil::random_tensor({3, 6}, rng)});
}

TEST_CASE("second-order penalty gradient matches finite differences") {
  // p(theta) = relu(||grad_x C_theta(x)|| - 1)^2 for a tiny dense critic
  std::mt19937_64 rng(7);
  Tensor w1 = testutil::random_tensor({5, 4}, rng);
  Tensor b1 = testutil::random_tensor({5}, rng);
  Tensor w2 = testutil::random_tensor({1, 5}, rng);
  Tensor b2 = testutil::random_tensor({1}, rng);
  Tensor x = testutil::random_tensor({2, 4}, rng);
  for (double& v : w2.data()) v *= 3.0;  // push the gradient norm above 1

  ScalarFn penalty = [&x](Tape& tape, const std::vector<Tensor>& th) {
    Tensor xin = tape.leaf(x);
    Tensor h = ops::leakyrelu(ops::dense(xin, th[0], th[1]), 0.2);
    Tensor out = ops::dense(h, th[2], th[3]);
    auto gx = tape.backward(ops::sum(out), std::vector<Tensor>{xin}, true);
    Tensor r = ops::relu(ops::add_const(ops::l2norm(gx[0]), -1.0));
    return ops::mean(ops::mul(r, r));
  };

  std::vector<Tensor> theta = {w1, b1, w2, b2};
  auto ga = testutil::analytic_grads(penalty, theta);
  auto gf = testutil::fd_grads(penalty, theta, 1e-5);
  CHECK(testutil::max_rel_err(ga, gf) < 1e-3);
}

TEST_CASE("tape replay determinism") {
  auto run = [] {
    std::mt19937_64 rng(123);
    Tape tape;
    Tensor x = tape.leaf(testutil::random_tensor({2, 3, 8}, rng));
    Tensor w = tape.leaf(testutil::random_tensor({4, 3, 3}, rng));
    Tensor y = ops::mean(ops::layernorm(ops::conv1d(x, w), Tensor::full({4, 8}, 1.0),
                                        Tensor::zeros({4, 8})));
    auto g = tape.backward(y, std::vector<Tensor>{x, w});
    std::vector<double> out(g[0].data().begin(), g[0].data().end());
    out.insert(out.end(), g[1].data().begin(), g[1].data().end());
    out.push_back(y.item());
    return out;
  };
  auto a = run();
  auto b = run();
  CHECK(a == b);  // bit-identical
}
