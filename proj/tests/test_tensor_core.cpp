#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support/op_oracles.hpp"
#include "support/test_util.hpp"
#include "tmsr/activation.hpp"
#include "tmsr/adam.hpp"
#include "tmsr/conv.hpp"
#include "tmsr/error.hpp"
#include "tmsr/gradcheck.hpp"
#include "tmsr/parallel.hpp"
#include "tmsr/pixel_shuffle.hpp"

using namespace tmsr;
using tmsr::test::ConvProbe;
using tmsr::test::max_abs_diff;
using tmsr::test::random_tensor;
using tmsr::test::random_vector;

namespace {

ConvParams random_conv(ConvShape s, Rng& rng) {
  ConvParams p(s);
  for (float& v : p.weights.data()) v = static_cast<float>(rng.uniform(-1, 1));
  for (float& v : p.bias) v = static_cast<float>(rng.uniform(-1, 1));
  return p;
}

const ConvShape kSupported[] = {
    {2, 3, 3, 3, false}, {3, 2, 1, 3, false}, {2, 2, 3, 1, false},
    {4, 3, 1, 1, false}, {3, 3, 3, 3, true},  {2, 2, 1, 3, true},
};

}  // namespace

TEST_CASE("conv: zero same-padding on a constant 3x3 input") {
  const float c = 2.5f;
  ConvParams p({1, 1, 3, 3});
  p.weights.fill(1.0f);
  Tensor x({1, 1, 3, 3}, c);
  Tensor y = conv2d_forward(x, p.view());
  CHECK(y.at(0, 0, 1, 1) == doctest::Approx(9 * c));
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(4 * c));
  CHECK(y.at(0, 0, 2, 2) == doctest::Approx(4 * c));
  CHECK(y.at(0, 0, 0, 1) == doctest::Approx(6 * c));
  CHECK(y.at(0, 0, 1, 0) == doctest::Approx(6 * c));
}

TEST_CASE("conv: 1x1 identity kernel") {
  Rng rng(3);
  ConvParams p({1, 1, 1, 1});
  p.weights.fill(1.0f);
  Tensor x = random_tensor({2, 1, 5, 4}, rng);
  CHECK(conv2d_forward(x, p.view()) == x);
}

TEST_CASE("conv: random 1x2x5x5, 2->3 channels matches the nested-loop oracle") {
  Rng rng(11);
  ConvParams p = random_conv({2, 3, 3, 3}, rng);
  Tensor x = random_tensor({1, 2, 5, 5}, rng);
  Tensor fast = conv2d_forward(x, p.view());
  Tensor slow = reference::conv2d_forward(x, p.view());
  CHECK(fast.shape() == Shape{1, 3, 5, 5});
  CHECK(max_abs_diff(fast.data(), slow.data()) <= 1e-5);
}

TEST_CASE("conv: optimized path equals oracle over 100 random cases") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    ConvShape s = kSupported[rng.below(std::size(kSupported))];
    const int ch = 1 + static_cast<int>(rng.below(4));
    s.in_channels = ch;
    s.out_channels = s.depthwise ? ch : 1 + static_cast<int>(rng.below(4));
    ConvParams p = random_conv(s, rng);
    Tensor x = random_tensor({1 + static_cast<int>(rng.below(3)), ch, 1 + static_cast<int>(rng.below(9)),
                              1 + static_cast<int>(rng.below(9))},
                             rng);
    Tensor fast = conv2d_forward(x, p.view());
    Tensor slow = reference::conv2d_forward(x, p.view());
    REQUIRE(fast.shape() == slow.shape());
    CHECK(max_abs_diff(fast.data(), slow.data()) <= 1e-5);

    Tensor go = random_tensor(fast.shape(), rng);
    ConvGrads gf = conv2d_backward(x, p.view(), go);
    ConvGrads gs = reference::conv2d_backward(x, p.view(), go);
    CHECK(max_abs_diff(gf.grad_input.data(), gs.grad_input.data()) <= 1e-5);
    CHECK(max_abs_diff(gf.grad_weights.data(), gs.grad_weights.data()) <= 1e-5);
    CHECK(max_abs_diff(gf.grad_bias, gs.grad_bias) <= 1e-5);
  }
}

TEST_CASE("conv: linearity of bias-free conv") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    ConvParams p = random_conv({2, 3, 3, 3}, rng);
    std::fill(p.bias.begin(), p.bias.end(), 0.0f);
    Tensor x = random_tensor({1, 2, 6, 6}, rng), y = random_tensor({1, 2, 6, 6}, rng);
    const float a = static_cast<float>(rng.uniform(-2, 2)), b = static_cast<float>(rng.uniform(-2, 2));
    Tensor mix(x.shape());
    for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = a * x.data()[i] + b * y.data()[i];
    Tensor lhs = conv2d_forward(mix, p.view());
    Tensor cx = conv2d_forward(x, p.view()), cy = conv2d_forward(y, p.view());
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      CHECK(std::fabs(lhs.data()[i] - (a * cx.data()[i] + b * cy.data()[i])) <= 1e-4);
    }
  }
}

TEST_CASE("conv: results do not depend on the thread count") {
  Rng rng(8);
  ConvParams p = random_conv({3, 4, 3, 3}, rng);
  Tensor x = random_tensor({5, 3, 12, 9}, rng);
  Tensor go = random_tensor({5, 4, 12, 9}, rng);
  const int saved = thread_count();
  set_thread_count(1);
  Tensor y1 = conv2d_forward(x, p.view());
  ConvGrads g1 = conv2d_backward(x, p.view(), go);
  set_thread_count(4);
  Tensor y4 = conv2d_forward(x, p.view());
  ConvGrads g4 = conv2d_backward(x, p.view(), go);
  set_thread_count(saved);
  CHECK(tmsr::test::bit_identical(y1.data(), y4.data()));
  CHECK(tmsr::test::bit_identical(g1.grad_input.data(), g4.grad_input.data()));
  CHECK(tmsr::test::bit_identical(g1.grad_weights.data(), g4.grad_weights.data()));
  CHECK(conv2d_forward(x, p.view()) == y1);
}

TEST_CASE("conv: shape errors name the dimension") {
  ConvParams p({2, 3, 3, 3});
  Tensor x({1, 4, 5, 5});
  try {
    conv2d_forward(x, p.view());
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ShapeMismatch);
    CHECK(std::string(e.what()).find("channels") != std::string::npos);
  }
  Tensor ok({1, 2, 5, 5});
  CHECK_THROWS_AS(conv2d_backward(ok, p.view(), Tensor({1, 3, 4, 5})), Error);
  CHECK_THROWS_AS(ConvParams({2, 3, 2, 3}), Error);
  CHECK_THROWS_AS(ConvParams({2, 3, 3, 3, true}), Error);
}

TEST_CASE("conv backward: zero grad_out gives zero gradients") {
  Rng rng(1);
  ConvParams p = random_conv({2, 2, 3, 3}, rng);
  Tensor x = random_tensor({2, 2, 4, 4}, rng);
  ConvGrads g = conv2d_backward(x, p.view(), Tensor({2, 2, 4, 4}));
  for (float v : g.grad_input.data()) CHECK(v == 0.0f);
  for (float v : g.grad_weights.data()) CHECK(v == 0.0f);
  for (float v : g.grad_bias) CHECK(v == 0.0f);
}

TEST_CASE("conv backward: 1x1 kernel scales grad_out by the weight") {
  Rng rng(2);
  ConvParams p({1, 1, 1, 1});
  p.weights.fill(-1.75f);
  Tensor x = random_tensor({1, 1, 4, 3}, rng);
  Tensor go = random_tensor({1, 1, 4, 3}, rng);
  ConvGrads g = conv2d_backward(x, p.view(), go);
  for (std::size_t i = 0; i < go.size(); ++i) CHECK(g.grad_input.data()[i] == -1.75f * go.data()[i]);
}

TEST_CASE("conv backward: finite differences on 10+ random instances") {
  Rng rng(77);
  for (int trial = 0; trial < 12; ++trial) {
    ConvShape s = kSupported[trial % std::size(kSupported)];
    ConvParams p = random_conv(s, rng);
    const Shape in_shape{2, s.in_channels, 5, 4};
    Tensor x = random_tensor(in_shape, rng);
    Tensor probe = random_tensor({2, s.out_channels, 5, 4}, rng);
    ConvGrads g = conv2d_backward(x, p.view(), probe);

    std::vector<float> flat(p.weights.data().begin(), p.weights.data().end());
    flat.insert(flat.end(), p.bias.begin(), p.bias.end());
    flat.insert(flat.end(), x.data().begin(), x.data().end());
    std::vector<float> analytic(g.grad_weights.data().begin(), g.grad_weights.data().end());
    analytic.insert(analytic.end(), g.grad_bias.begin(), g.grad_bias.end());
    analytic.insert(analytic.end(), g.grad_input.data().begin(), g.grad_input.data().end());

    auto report = gradient_check(ConvProbe{s, in_shape, probe}, flat, analytic);
    INFO(report.summary());
    CHECK(report.passed);
  }
}

TEST_CASE("prelu: both branches of the definition") {
  Tensor x({1, 1, 1, 3}, std::vector<float>{5.0f, -4.0f, 0.0f});
  std::vector<float> alpha{0.25f};
  Tensor y = prelu_forward(x, alpha);
  CHECK(y.at(0, 0, 0, 0) == 5.0f);
  CHECK(y.at(0, 0, 0, 1) == -1.0f);
  CHECK(y.at(0, 0, 0, 2) == 0.0f);
  CHECK_THROWS_AS(prelu_forward(Tensor({1, 3, 1, 1}), std::vector<float>{1, 2}), Error);
}

TEST_CASE("prelu: alpha = 0 is bit-identical to relu") {
  Rng rng(9);
  Tensor x = random_tensor({3, 4, 6, 5}, rng);
  x.data()[0] = 0.0f;
  x.data()[1] = -0.0f;
  std::vector<float> zeros(4, 0.0f);
  CHECK(tmsr::test::bit_identical(prelu_forward(x, zeros).data(), relu_forward(x).data()));
  Tensor go = random_tensor(x.shape(), rng);
  CHECK(tmsr::test::bit_identical(prelu_backward(x, zeros, go).grad_input.data(),
                                  relu_backward(x, go).data()));
}

TEST_CASE("prelu backward: closed-form cases") {
  Rng rng(4);
  Tensor go = random_tensor({2, 2, 3, 3}, rng);
  SUBCASE("all positive input: zero alpha gradient") {
    Tensor x = random_tensor({2, 2, 3, 3}, rng, 0.1, 2.0);
    auto g = prelu_backward(x, std::vector<float>{0.3f, -0.2f}, go);
    CHECK(g.grad_alpha[0] == 0.0f);
    CHECK(g.grad_alpha[1] == 0.0f);
    CHECK(g.grad_input == go);
  }
  SUBCASE("all negative input with alpha = 1 passes grad_out through") {
    Tensor x = random_tensor({2, 2, 3, 3}, rng, -2.0, -0.1);
    auto g = prelu_backward(x, std::vector<float>{1.0f}, go);
    CHECK(g.grad_input == go);
  }
  SUBCASE("x == 0 takes the alpha branch") {
    Tensor x({1, 1, 1, 1}, 0.0f);
    Tensor g1({1, 1, 1, 1}, 1.0f);
    auto g = prelu_backward(x, std::vector<float>{0.5f}, g1);
    CHECK(g.grad_input.data()[0] == 0.5f);
  }
}

TEST_CASE("prelu backward: finite differences, per-channel and shared") {
  Rng rng(31);
  for (int trial = 0; trial < 12; ++trial) {
    const bool shared = trial % 2 == 1;
    const Shape s{2, 3, 4, 4};
    Tensor x = random_tensor(s, rng);
    // Keep samples away from the kink so central differences stay on one side.
    for (float& v : x.data())
      if (std::fabs(v) < 0.05f) v = v < 0 ? -0.05f : 0.05f;
    std::vector<float> alpha = random_vector(shared ? 1 : 3, rng, -0.5, 0.5);
    Tensor probe = random_tensor(s, rng);
    auto g = prelu_backward(x, alpha, probe);

    std::vector<float> flat(alpha);
    flat.insert(flat.end(), x.data().begin(), x.data().end());
    std::vector<float> analytic(g.grad_alpha);
    analytic.insert(analytic.end(), g.grad_input.data().begin(), g.grad_input.data().end());
    const std::size_t na = alpha.size();
    auto loss = [&](std::span<const float> f) {
      Tensor xi(s, std::vector<float>(f.begin() + na, f.end()));
      Tensor y = prelu_forward(xi, f.subspan(0, na));
      double acc = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) acc += double(y.data()[i]) * probe.data()[i];
      return acc;
    };
    auto report = gradient_check(loss, flat, analytic, {.epsilon = 1e-3, .tolerance = 1e-3});
    INFO(report.summary());
    CHECK(report.passed);
  }
}

TEST_CASE("pixel_shuffle: definitional layout") {
  Tensor x({1, 4, 1, 1}, std::vector<float>{1, 2, 3, 4});
  Tensor y = pixel_shuffle(x, 2);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  CHECK(y.at(0, 0, 0, 0) == 1);
  CHECK(y.at(0, 0, 0, 1) == 2);
  CHECK(y.at(0, 0, 1, 0) == 3);
  CHECK(y.at(0, 0, 1, 1) == 4);
  CHECK_THROWS_AS(pixel_shuffle(Tensor({1, 3, 2, 2}), 2), Error);
}

TEST_CASE("pixel_shuffle: inverse round trip and constant preservation") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const int r = 1 + static_cast<int>(rng.below(3));
    Tensor x = random_tensor({1 + int(rng.below(3)), r * r * (1 + int(rng.below(3))),
                              1 + int(rng.below(5)), 1 + int(rng.below(5))},
                             rng);
    CHECK(pixel_unshuffle(pixel_shuffle(x, r), r) == x);
  }
  Tensor shuffled = pixel_shuffle(Tensor({2, 8, 3, 3}, 0.7f), 2);
  for (float v : shuffled.data()) CHECK(v == 0.7f);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  std::vector<float> p{0.5f, -1.25f, 3.0f};
  const auto before = p;
  AdamState st(p.size());
  for (int i = 0; i < 5; ++i) adam_step(p, std::vector<float>(3, 0.0f), st, {});
  CHECK(p == before);
}

TEST_CASE("adam: first step from zero state moves by lr * sign(g)") {
  const AdamConfig cfg{1e-3};
  for (float g : {0.5f, -3.0f, 1e-2f, 40.0f}) {
    std::vector<float> p{1.0f};
    AdamState st(1);
    adam_step(p, std::vector<float>{g}, st, cfg);
    // Closed form after one step: m_hat = g, v_hat = g^2.
    const double expected = 1.0 - cfg.lr * g / (std::fabs(double(g)) + cfg.eps);
    CHECK(p[0] == doctest::Approx(expected).epsilon(1e-7));
    CHECK(std::fabs((1.0 - p[0]) - cfg.lr * (g > 0 ? 1 : -1)) < 1e-7);
  }
}

TEST_CASE("adam: constant gradient drives the step size towards lr") {
  // Oracle: iterate the update rule in double alongside the implementation.
  const AdamConfig cfg{1e-2};
  const double g = 0.3;
  double m = 0, v = 0, x = 0;
  std::vector<float> p{0.0f};
  AdamState st(1);
  double last_step = 0;
  for (int t = 1; t <= 5000; ++t) {
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    const double step = cfg.lr * (m / (1 - std::pow(cfg.beta1, t))) /
                        (std::sqrt(v / (1 - std::pow(cfg.beta2, t))) + cfg.eps);
    x -= step;
    const float before = p[0];
    adam_step(p, std::vector<float>{float(g)}, st, cfg);
    last_step = double(before) - p[0];
    if (t % 1000 == 0) CHECK(std::fabs(step - cfg.lr) < 1e-6);
  }
  CHECK(std::fabs(last_step - cfg.lr) < 1e-5);
  CHECK(p[0] == doctest::Approx(x).epsilon(1e-4));
}

TEST_CASE("adam: mismatched lengths are rejected") {
  std::vector<float> p(3);
  AdamState st(2);
  CHECK_THROWS_AS(adam_step(p, std::vector<float>(3), st, {}), Error);
}

TEST_CASE("gradient_check: quadratic loss") {
  Rng rng(6);
  auto p = random_vector(20, rng);
  auto loss = [](std::span<const float> q) {
    double s = 0;
    for (float v : q) s += 0.5 * double(v) * v;
    return s;
  };
  auto report = gradient_check(loss, p, p);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("gradient_check: a corrupted component is reported") {
  Rng rng(7);
  auto p = random_vector(20, rng, 0.5, 1.5);
  auto loss = [](std::span<const float> q) {
    double s = 0;
    for (float v : q) s += 0.5 * double(v) * v;
    return s;
  };
  auto analytic = p;
  analytic[13] *= 2.0f;
  auto report = gradient_check(loss, p, analytic);
  CHECK_FALSE(report.passed);
  CHECK(report.worst_index == 13);
}

TEST_CASE("gradient_check_piecewise: kinks are stepped around, not compared") {
  // sum |x_i - 0.5|: the derivative is sign(x_i - 0.5) except at the kink.
  std::vector<double> p{0.1, 0.4999, 0.50004, 0.9, 0.5005};
  std::vector<float> analytic{-1, -1, 1, 1, 1};
  auto eval = [](std::span<const double> q) {
    Evaluation e;
    for (double v : q) {
      e.loss += std::fabs(v - 0.5);
      e.region = e.region * 2 + (v > 0.5);
    }
    return e;
  };
  auto report = gradient_check_piecewise(eval, std::span<const double>(p), analytic);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-9);
  CHECK(report.refined == 0);

  // Two kinks 1.5e-3 apart: both +-1e-3 probes leave the base region, so only a
  // reduced step fits between them. Slope there is +1 - 1 = 0; with a
  // neighbouring component carrying slope 1 for scale.
  auto twin = [](std::span<const double> q) {
    Evaluation e;
    e.loss = std::fabs(q[0] - 0.5) + std::fabs(q[0] - 0.5015) + q[1];
    e.region = (q[0] > 0.5) * 2 + (q[0] > 0.5015);
    return e;
  };
  std::vector<double> tp{0.5008, 3.0};
  auto r2 = gradient_check_piecewise(twin, std::span<const double>(tp), std::vector<float>{0, 1});
  INFO(r2.summary());
  CHECK(r2.passed);
  CHECK(r2.refined == 1);

  // The plain checker straddles the kink and reports a wrong slope.
  std::vector<float> pf(p.begin(), p.end());
  auto loss = [&](std::span<const float> q) {
    double s = 0;
    for (float v : q) s += std::fabs(double(v) - 0.5);
    return s;
  };
  CHECK_FALSE(gradient_check(loss, pf, analytic).passed);

  // On the kink itself the base point belongs to the x <= 0.5 piece, so the
  // left-hand slope is the one measured.
  std::vector<double> on{0.5};
  CHECK(gradient_check_piecewise(eval, std::span<const double>(on), std::vector<float>{-1}).passed);
  CHECK_FALSE(gradient_check_piecewise(eval, std::span<const double>(on), std::vector<float>{1}).passed);
}

TEST_CASE("gradient_check: non-deterministic closure is an error") {
  int calls = 0;
  auto loss = [&](std::span<const float>) { return double(++calls); };
  std::vector<float> p{1.0f};
  try {
    gradient_check(loss, p, p);
    FAIL("expected NonDeterministic");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonDeterministic);
  }
}
