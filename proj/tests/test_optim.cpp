#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gtfd/data.hpp"
#include "gtfd/optim.hpp"

using namespace gtfd;

namespace {

ParamStore scalar_store(double x) {
  ParamStore s;
  s.entries.emplace("x", Tensor::scalar(x));
  return s;
}

}  // namespace

TEST_CASE("wgan-gp defaults") {
  AdamHyper h;
  CHECK(h.alpha == 2e-4);
  CHECK(h.beta1 == 0.5);
  CHECK(h.beta2 == 0.9);
  CHECK(h.eps == 1e-8);
}

TEST_CASE("zero gradients leave parameters unchanged but advance the step") {
  ParamStore s = scalar_store(1.5);
  AdamState st;
  adam_step(s, {{"x", Tensor::scalar(0.0)}}, st);
  CHECK(s.entries.at("x").item() == 1.5);
  CHECK(st.step == 1);
}

TEST_CASE("first step moves by almost exactly alpha") {
  // m-hat = g, v-hat = g^2, so delta = -alpha * g/(|g|+eps)
  ParamStore s = scalar_store(0.0);
  AdamState st;
  adam_step(s, {{"x", Tensor::scalar(1.0)}}, st);
  CHECK(std::fabs(s.entries.at("x").item() + 2e-4) < 1e-7);
}

TEST_CASE("missing gradient key is an error") {
  ParamStore s = scalar_store(0.0);
  AdamState st;
  CHECK_THROWS(adam_step(s, {}, st));
}

TEST_CASE("per-coordinate step size is bounded") {
  // |m_t| <= (1-b1) sum b1^(t-i) |g_i| and sqrt(v_t) >= sqrt(1-b2)
  // b2^((t-i)/2) |g_i| give |m/sqrt(v)| <= (1-b1)/(sqrt(1-b2)(1-b1/sqrt(b2)));
  // the bias-correction ratio is <= 1, so the step is bounded by alpha
  // times that constant (~3.34 for (.5,.9)), not by alpha itself
  AdamHyper h;
  double bound =
      h.alpha * (1.0 - h.beta1) / (std::sqrt(1.0 - h.beta2) * (1.0 - h.beta1 / std::sqrt(h.beta2)));
  ParamStore s = scalar_store(0.0);
  AdamState st;
  Rng rng(17);
  double prev = 0.0;
  for (int i = 0; i < 200; ++i) {
    adam_step(s, {{"x", Tensor::scalar(rng.normal() * std::pow(10.0, rng.uniform(-3, 3)))}}, st);
    double cur = s.entries.at("x").item();
    CHECK(std::fabs(cur - prev) <= bound * (1.0 + 1e-6));
    prev = cur;
  }
}

TEST_CASE("minimizes x^2 from x0=1 with the wgan-gp defaults") {
  ParamStore s = scalar_store(1.0);
  AdamState st;
  for (int i = 0; i < 5000; ++i)
    adam_step(s, {{"x", Tensor::scalar(2.0 * s.entries.at("x").item())}}, st);
  CHECK(std::fabs(s.entries.at("x").item()) < 0.05);
}

TEST_CASE("second moments stay non-negative") {
  ParamStore s = scalar_store(0.0);
  AdamState st;
  Rng rng(18);
  for (int i = 0; i < 50; ++i)
    adam_step(s, {{"x", Tensor::scalar(rng.normal())}}, st);
  for (auto& [name, mv] : st.moments)
    for (double v : mv.second.data()) CHECK(v >= 0.0);
}
