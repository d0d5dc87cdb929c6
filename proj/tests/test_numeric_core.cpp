#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "rail/adam.hpp"
#include "rail/errors.hpp"
#include "rail/gaussian.hpp"
#include "rail/mlp.hpp"
#include "rail/oracles.hpp"
#include "rail/rng.hpp"
#include "support.hpp"

using namespace rail;
using test_support::for_all;
using test_support::random_vector;

TEST_CASE("forward of an all-zero network is zero") {
  MlpNetwork net({3, 4, 2}, Activation::kTanh);
  const auto y = net.forward(std::vector<double>{1.0, -2.0, 0.5});
  CHECK(y == std::vector<double>{0.0, 0.0});
}

TEST_CASE("single linear layer computes Wx + b") {
  MlpNetwork net({1, 1}, Activation::kTanh);
  net.weights(0)[0] = 2.0;
  net.biases(0)[0] = 1.0;
  CHECK(net.forward(std::vector<double>{3.0})[0] == 7.0);
}

TEST_CASE("two-layer tanh forward matches a straight-line reimplementation") {
  RngStream rng(11, "fwd");
  const auto net = MlpNetwork::initialized({3, 4, 2}, Activation::kTanh, rng);
  const std::vector<double> x{0.3, -1.2, 0.8};
  const auto p = net.params();
  // Layout: W0 (4x3), b0 (4), W1 (2x4), b1 (2).
  double h[4];
  for (int i = 0; i < 4; ++i) {
    double z = p[12 + i];
    for (int j = 0; j < 3; ++j) z += p[i * 3 + j] * x[j];
    h[i] = std::tanh(z);
  }
  const auto y = net.forward(x);
  for (int i = 0; i < 2; ++i) {
    double z = p[16 + 8 + i];
    for (int j = 0; j < 4; ++j) z += p[16 + i * 4 + j] * h[j];
    CHECK(y[i] == doctest::Approx(z).epsilon(1e-14));
  }
}

TEST_CASE("forward rejects wrong input length") {
  MlpNetwork net({3, 2}, Activation::kRelu);
  CHECK_THROWS_AS(net.forward(std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST_CASE("linear layer gradient: dW = x, db = 1") {
  RngStream rng(2, "lin");
  const auto net = MlpNetwork::initialized({3, 1}, Activation::kIdentity, rng);
  const std::vector<double> x{0.5, -1.5, 2.0};
  const auto g = backward(net, x, std::vector<double>{1.0});
  for (int j = 0; j < 3; ++j) CHECK(g.params[j] == x[j]);
  CHECK(g.params[3] == 1.0);
  for (int j = 0; j < 3; ++j) CHECK(g.input[j] == net.weights(0)[j]);
}

TEST_CASE("zero upstream gives zero gradients") {
  RngStream rng(3, "zero");
  const auto net = MlpNetwork::initialized({2, 5, 3}, Activation::kTanh, rng);
  const auto g = backward(net, std::vector<double>{0.1, 0.2}, std::vector<double>{0.0, 0.0, 0.0});
  for (double v : g.params) CHECK(v == 0.0);
  for (double v : g.input) CHECK(v == 0.0);
}

TEST_CASE("property: backprop agrees with central differences") {
  for_all(5, 25, "mlp-fd", [](RngStream& rng, int) {
    const Activation act = static_cast<Activation>(rng.index(3));
    const int in = 1 + static_cast<int>(rng.index(4));
    const int hid = 2 + static_cast<int>(rng.index(5));
    const int out = 1 + static_cast<int>(rng.index(3));
    auto net = MlpNetwork::initialized({in, hid, hid, out}, act, rng);
    for (int l = 0; l < net.num_layers(); ++l) {
      for (auto& b : net.biases(l)) b = rng.uniform(0.05, 0.3);
    }
    const auto x = random_vector(rng, in);
    const auto up = random_vector(rng, out);
    const auto g = backward(net, x, up);
    auto probe = net;
    auto f = [&](std::span<const double> p) {
      std::copy(p.begin(), p.end(), probe.params().begin());
      const auto y = probe.forward(x);
      double s = 0.0;
      for (int i = 0; i < out; ++i) s += y[i] * up[i];
      return s;
    };
    CHECK(relative_error(g.params, numeric_gradient(f, net.params())) < 1e-4);
  });
}

TEST_CASE("non-finite intermediate raises a numeric error naming the layer") {
  RngStream rng(4, "nan");
  auto net = MlpNetwork::initialized({2, 3, 1}, Activation::kTanh, rng);
  net.weights(1)[0] = std::numeric_limits<double>::infinity();
  try {
    backward(net, std::vector<double>{0.3, 0.4}, std::vector<double>{1.0});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("layer") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  RngStream rng(6, "ckpt");
  const auto net = MlpNetwork::initialized({4, 7, 2}, Activation::kRelu, rng);
  std::stringstream ss;
  net.save(ss);
  const auto text = ss.str();
  CHECK(text.rfind("mlp dims=4,7,2 hidden=relu\n", 0) == 0);
  CHECK(text.size() == std::string("mlp dims=4,7,2 hidden=relu\n").size() + 8 * net.num_params());
  const auto back = MlpNetwork::load(ss);
  CHECK(back == net);
}

TEST_CASE("adam: zero gradient leaves parameters and bumps the step count") {
  std::vector<double> p{1.0, -2.0};
  AdamState st(2, AdamConfig{});
  adam_step(p, std::vector<double>{0.0, 0.0}, st);
  CHECK(p == std::vector<double>{1.0, -2.0});
  CHECK(st.step_count == 1);
}

TEST_CASE("adam: first step is lr * g / (|g| + eps)") {
  const AdamConfig cfg{.learning_rate = 0.01};
  std::vector<double> p{0.0, 0.0, 0.0};
  const std::vector<double> g{3.0, -0.5, 1e-3};
  AdamState st(3, cfg);
  adam_step(p, g, st);
  for (int i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(-cfg.learning_rate * g[i] / (std::abs(g[i]) + cfg.epsilon)).epsilon(1e-12));
}

TEST_CASE("adam: matches a scalar simulation and decreases monotonically under a constant gradient") {
  const AdamConfig cfg{};
  std::vector<double> p{1.0};
  AdamState st(1, cfg);
  double m = 0.0, v = 0.0, ref = 1.0, prev = 1.0;
  for (int t = 1; t <= 100; ++t) {
    adam_step(p, std::vector<double>{0.7}, st);
    m = cfg.beta1 * m + (1 - cfg.beta1) * 0.7;
    v = cfg.beta2 * v + (1 - cfg.beta2) * 0.49;
    const double mh = m / (1 - std::pow(cfg.beta1, t));
    const double vh = v / (1 - std::pow(cfg.beta2, t));
    ref -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
    CHECK(p[0] < prev);
    CHECK(p[0] == doctest::Approx(ref).epsilon(1e-12));
    prev = p[0];
  }
}

TEST_CASE("adam: shape mismatch throws") {
  std::vector<double> p{1.0, 2.0};
  AdamState st(2, AdamConfig{});
  CHECK_THROWS_AS(adam_step(p, std::vector<double>{1.0}, st), ShapeError);
}

TEST_CASE("gaussian log-prob reference values") {
  CHECK(gaussian_log_prob(std::vector<double>{0.0}, std::vector<double>{0.0}, std::vector<double>{0.0}) ==
        doctest::Approx(-0.9189385).epsilon(1e-7));
  CHECK(gaussian_log_prob(std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 1.0}) ==
        doctest::Approx(-2.8378771).epsilon(1e-7));
  const std::vector<double> mu{0.4, -1.0}, ls{-0.3, 0.8};
  const double expected = -0.5 * ((kLog2Pi + 2 * ls[0]) + (kLog2Pi + 2 * ls[1]));
  CHECK(gaussian_log_prob(mu, ls, mu) == doctest::Approx(expected).epsilon(1e-14));
  CHECK_THROWS_AS(gaussian_log_prob(mu, ls, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("gaussian density integrates to one over a 6 sigma grid") {
  const double mu = 0.3, ls = -0.7, sd = std::exp(ls);
  const int n = 2000;
  const double h = 12.0 * sd / n;
  double total1 = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double a = mu - 6 * sd + i * h;
    total1 += ((i == 0 || i == n) ? 0.5 : 1.0) *
              std::exp(gaussian_log_prob(std::vector<double>{mu}, std::vector<double>{ls}, std::vector<double>{a}));
  }
  CHECK(total1 * h == doctest::Approx(1.0).epsilon(1e-3));

  const std::vector<double> m2{0.0, 1.0}, l2{0.2, -0.4};
  const int n2 = 300;
  const double h0 = 12.0 * std::exp(l2[0]) / n2, h1 = 12.0 * std::exp(l2[1]) / n2;
  double total2 = 0.0;
  for (int i = 0; i <= n2; ++i) {
    for (int j = 0; j <= n2; ++j) {
      const double w = ((i == 0 || i == n2) ? 0.5 : 1.0) * ((j == 0 || j == n2) ? 0.5 : 1.0);
      const std::vector<double> a{m2[0] - 6 * std::exp(l2[0]) + i * h0, m2[1] - 6 * std::exp(l2[1]) + j * h1};
      total2 += w * std::exp(gaussian_log_prob(m2, l2, a));
    }
  }
  CHECK(total2 * h0 * h1 == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("logistic is stable at extreme inputs") {
  CHECK(logistic(0.0) == 0.5);
  CHECK(logistic(-1.0) == doctest::Approx(0.2689414).epsilon(1e-7));
  CHECK(logistic(800.0) == 1.0);
  CHECK(logistic(-800.0) == 0.0);
}

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(42, "alpha"), b(42, "alpha"), c(42, "beta"), d(43, "alpha");
  bool differs_c = false, differs_d = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal(), y = b.normal(), z = c.normal(), w = d.normal();
    CHECK(x == y);
    differs_c = differs_c || x != z;
    differs_d = differs_d || x != w;
  }
  CHECK(differs_c);
  CHECK(differs_d);
  RngStream f1 = RngStream(1, 2).fork(7), f2 = RngStream(1, 2).fork(7), f3 = RngStream(1, 2).fork(8);
  CHECK(f1.uniform(0, 1) == f2.uniform(0, 1));
  CHECK(f1.uniform(0, 1) != f3.uniform(0, 1));
  CHECK(hash_name("alpha") == hash_name("alpha"));
  CHECK(hash_name("alpha") != hash_name("beta"));
}

TEST_CASE("rng index stays in range") {
  RngStream r(9, "idx");
  for (int i = 0; i < 1000; ++i) CHECK(r.index(7) < 7);
}
