#include <cmath>
#include <random>

#include "doctest.h"
#include "tabsurv/nn.hpp"

using namespace tabsurv;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.data()) v = normal(rng);
  return m;
}

}  // namespace

TEST_CASE("matmul matches naive triple loop") {
  std::mt19937_64 rng(1);
  Matrix a = random_matrix(3, 4, rng);
  Matrix b = random_matrix(4, 2, rng);
  Matrix c = matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 4; ++k) acc += a(i, k) * b(k, j);
      CHECK(c(i, j) == doctest::Approx(acc).epsilon(1e-12));
    }
  CHECK_THROWS_AS(matmul(a, a), ValidationError);
}

TEST_CASE("linear forward basics") {
  Matrix x(1, 2);
  x(0, 0) = 1.0;
  Matrix w(2, 2);
  w(0, 0) = 2.0;
  w(1, 1) = 3.0;
  Matrix bias(1, 2);
  Matrix y = linear_forward(x, w, bias);
  CHECK(y(0, 0) == 2.0);
  CHECK(y(0, 1) == 0.0);

  // identity weights, zero bias -> output equals input
  Matrix eye(2, 2);
  eye(0, 0) = eye(1, 1) = 1.0;
  Matrix y2 = linear_forward(x, eye, bias);
  CHECK(y2(0, 0) == x(0, 0));
  CHECK(y2(0, 1) == x(0, 1));
}

TEST_CASE("linear backward") {
  Matrix x(2, 2, 1.0);
  Matrix w(2, 2, 0.5);
  Matrix grad_out(2, 2, 1.0);
  Matrix gx, gw, gb;
  linear_backward(grad_out, x, w, &gx, &gw, &gb);
  CHECK(gb(0, 0) == 2.0);
  CHECK(gb(0, 1) == 2.0);

  // gradients accumulate into caller buffers (needed for shared parameters)
  Matrix gw2 = gw, gb2 = gb;
  linear_backward(grad_out, x, w, &gx, &gw2, &gb2);
  for (std::size_t i = 0; i < gw.size(); ++i) CHECK(gw2.data()[i] == 2.0 * gw.data()[i]);
  for (std::size_t i = 0; i < gb.size(); ++i) CHECK(gb2.data()[i] == 2.0 * gb.data()[i]);

  // zero upstream gradient contributes nothing
  Matrix zero(2, 2, 0.0);
  Matrix gxz, gwz, gbz;
  linear_backward(zero, x, w, &gxz, &gwz, &gbz);
  for (double v : gwz.data()) CHECK(v == 0.0);
  for (double v : gbz.data()) CHECK(v == 0.0);
}

TEST_CASE("linear backward matches finite differences") {
  std::mt19937_64 rng(7);
  Matrix x = random_matrix(2, 3, rng);
  Matrix w = random_matrix(3, 2, rng);
  Matrix bias = random_matrix(1, 2, rng);
  // scalar loss = sum of outputs
  Matrix grad_out(2, 2, 1.0);
  Matrix gx, gw, gb;
  linear_backward(grad_out, x, w, &gx, &gw, &gb);
  const double h = 1e-5;
  for (std::size_t i = 0; i < w.size(); ++i) {
    double orig = w.data()[i];
    w.data()[i] = orig + h;
    Matrix y_up = linear_forward(x, w, bias);
    double up = 0.0;
    for (double v : y_up.data()) up += v;
    w.data()[i] = orig - h;
    Matrix y_down = linear_forward(x, w, bias);
    double down = 0.0;
    for (double v : y_down.data()) down += v;
    w.data()[i] = orig;
    double fd = (up - down) / (2 * h);
    CHECK(gw.data()[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("activations") {
  Matrix x(1, 4);
  x(0, 0) = -1.0;
  x(0, 1) = 2.0;
  x(0, 2) = 0.0;
  x(0, 3) = 1.0;

  Matrix relu = activation_forward(Activation::ReLU, x);
  CHECK(relu(0, 0) == 0.0);
  CHECK(relu(0, 1) == 2.0);

  Matrix silu = activation_forward(Activation::SiLU, x);
  CHECK(silu(0, 2) == 0.0);

  Matrix selu = activation_forward(Activation::SELU, x);
  CHECK(selu(0, 3) == doctest::Approx(1.05070098).epsilon(1e-6));
  CHECK(selu(0, 0) == doctest::Approx(1.05070098 * 1.67326324 * (std::exp(-1.0) - 1.0))
                          .epsilon(1e-5));
  CHECK(selu(0, 0) == doctest::Approx(-1.11133).epsilon(1e-4));

  // ReLU derivative at 0 is 0
  Matrix g(1, 4, 1.0);
  Matrix back = activation_backward(Activation::ReLU, x, g);
  CHECK(back(0, 2) == 0.0);
  CHECK(back(0, 0) == 0.0);
  CHECK(back(0, 1) == 1.0);
}

TEST_CASE("activation backward matches finite differences") {
  std::mt19937_64 rng(3);
  for (Activation act : {Activation::ReLU, Activation::SiLU, Activation::SELU}) {
    Matrix x = random_matrix(2, 5, rng);
    Matrix ones(2, 5, 1.0);
    Matrix g = activation_backward(act, x, ones);
    const double h = 1e-6;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (std::fabs(x.data()[i]) < 1e-3) continue;  // kink neighborhood
      double orig = x.data()[i];
      x.data()[i] = orig + h;
      double up = activation_forward(act, x).data()[i];
      x.data()[i] = orig - h;
      double down = activation_forward(act, x).data()[i];
      x.data()[i] = orig;
      CHECK(g.data()[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-4));
    }
  }
}

TEST_CASE("softplus") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(softplus(50.0) == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(softplus_derivative(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  const double h = 1e-6;
  CHECK(softplus_derivative(0.0) ==
        doctest::Approx((softplus(h) - softplus(-h)) / (2 * h)).epsilon(1e-6));
  // inverse round trip
  for (double y : {0.1, 1.0, 7.5}) CHECK(softplus(softplus_inverse(y)) == doctest::Approx(y));
}

TEST_CASE("softmax") {
  Matrix logits(1, 4, 3.0);
  Matrix p = softmax(logits);
  for (std::size_t j = 0; j < 4; ++j) CHECK(p(0, j) == doctest::Approx(0.25).epsilon(1e-12));

  Matrix two(1, 2);
  two(0, 1) = std::log(3.0);
  Matrix p2 = softmax(two);
  CHECK(p2(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p2(0, 1) == doctest::Approx(0.75).epsilon(1e-12));

  Matrix big(1, 2);
  big(0, 0) = 1000.0;
  Matrix p3 = softmax(big);
  CHECK(p3(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isfinite(p3(0, 1)));

  // shift invariance
  std::mt19937_64 rng(5);
  Matrix l = random_matrix(3, 6, rng);
  Matrix shifted = l;
  for (std::size_t j = 0; j < 6; ++j) shifted(1, j) += 17.5;
  Matrix pa = softmax(l), pb = softmax(shifted);
  for (std::size_t j = 0; j < 6; ++j) CHECK(pa(1, j) == doctest::Approx(pb(1, j)).epsilon(1e-12));

  // rows sum to 1
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 6; ++j) s += pa(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("layer norm") {
  Matrix x(1, 3);
  x(0, 0) = 1;
  x(0, 1) = 2;
  x(0, 2) = 3;
  Matrix gain(1, 3, 1.0), shift(1, 3, 0.0);
  LayerNormCache cache;
  Matrix y = layer_norm_forward(x, gain, shift, cache);
  CHECK(y(0, 0) == doctest::Approx(-1.2247).epsilon(1e-3));
  CHECK(y(0, 1) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(y(0, 2) == doctest::Approx(1.2247).epsilon(1e-3));
}

TEST_CASE("layer norm backward matches finite differences") {
  std::mt19937_64 rng(11);
  Matrix x = random_matrix(3, 5, rng);
  Matrix gain = random_matrix(1, 5, rng);
  Matrix shift = random_matrix(1, 5, rng);
  LayerNormCache cache;
  layer_norm_forward(x, gain, shift, cache);
  Matrix grad_out(3, 5, 1.0);
  Matrix gx, ggain, gshift;
  layer_norm_backward(grad_out, gain, cache, &gx, &ggain, &gshift);
  auto loss = [&]() {
    LayerNormCache c;
    Matrix y = layer_norm_forward(x, gain, shift, c);
    double s = 0.0;
    for (double v : y.data()) s += v;
    return s;
  };
  const double h = 1e-5;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double orig = x.data()[i];
    x.data()[i] = orig + h;
    double up = loss();
    x.data()[i] = orig - h;
    double down = loss();
    x.data()[i] = orig;
    CHECK(gx.data()[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-4));
  }
  for (std::size_t i = 0; i < gain.size(); ++i) {
    double orig = gain.data()[i];
    gain.data()[i] = orig + h;
    double up = loss();
    gain.data()[i] = orig - h;
    double down = loss();
    gain.data()[i] = orig;
    CHECK(ggain.data()[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-4));
  }
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(2);
  Matrix x(10, 10, 1.0);
  Matrix mask;
  // rate 0 -> identity in both modes
  Matrix y = dropout_forward(x, 0.0, true, rng, mask);
  for (double v : y.data()) CHECK(v == 1.0);
  Matrix y_eval = dropout_forward(x, 0.5, false, rng, mask);
  for (double v : y_eval.data()) CHECK(v == 1.0);

  // Monte Carlo mean preservation
  double total = 0.0;
  std::size_t count = 0;
  Matrix big(100, 1000, 1.0);
  Matrix m2;
  Matrix yd = dropout_forward(big, 0.5, true, rng, m2);
  for (double v : yd.data()) {
    total += v;
    ++count;
  }
  CHECK(total / static_cast<double>(count) == doctest::Approx(1.0).epsilon(0.05));

  CHECK_THROWS_AS(dropout_forward(x, 1.0, true, rng, mask), ValidationError);
}

TEST_CASE("adam step") {
  ParameterStore ps;
  ps.create("theta", 1, 1);
  ps.at("theta").value(0, 0) = 1.0;
  ps.at("theta").grad(0, 0) = 1.0;
  AdamConfig cfg;
  cfg.lr = 0.1;
  AdamState adam(cfg);
  adam.step(ps);
  // bias-corrected m_hat = v_hat = 1 -> update ~ lr
  CHECK(ps.at("theta").value(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
  // gradients zeroed after the step
  CHECK(ps.at("theta").grad(0, 0) == 0.0);

  // second step with zero gradient still moves via momentum:
  // m2=0.09, m_hat=0.09/0.19; v2=0.000999, v_hat=0.000999/0.001999
  double m_hat = 0.9 * 0.1 / (1.0 - 0.81);
  double v_hat = 0.999 * 0.001 / (1.0 - 0.999 * 0.999);
  double expected = 0.9 - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
  adam.step(ps);
  CHECK(ps.at("theta").value(0, 0) == doctest::Approx(expected).epsilon(1e-9));

  ps.at("theta").grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(adam.step(ps), doctest::Contains("theta"), ValidationError);
}

TEST_CASE("gradient_check on quadratic loss") {
  ParameterStore ps;
  std::mt19937_64 rng(9);
  Matrix& theta = ps.create("theta", 2, 3);
  std::normal_distribution<double> normal;
  for (double& v : theta.data()) v = normal(rng);
  auto loss = [&]() {
    double s = 0.0;
    for (double v : ps.at("theta").value.data()) s += 0.5 * v * v;
    return s;
  };
  // analytic gradient is theta itself
  ps.at("theta").grad = ps.at("theta").value;
  GradCheckReport rep = gradient_check(loss, ps, 1e-5, 1e-7);
  CHECK(rep.pass);
  CHECK(rep.max_rel_error < 1e-7);

  // corrupted gradient must fail
  ps.at("theta").grad(0, 0) += 1.0;
  GradCheckReport bad = gradient_check(loss, ps, 1e-5, 1e-7);
  CHECK_FALSE(bad.pass);
}

TEST_CASE("mlp forward/backward gradient check") {
  std::mt19937_64 rng(21);
  MlpConfig cfg;
  cfg.in_dim = 4;
  cfg.hidden = 8;
  cfg.out_dim = 3;
  cfg.n_blocks = 2;
  cfg.layer_norm = true;
  Mlp mlp("net.", cfg);
  ParameterStore ps;
  mlp.init_params(ps, rng);
  Matrix x = random_matrix(5, 4, rng);

  auto loss = [&]() {
    MlpCache cache;
    std::mt19937_64 r2(0);
    Matrix out = mlp.forward(x, ps, false, r2, cache);
    double s = 0.0;
    for (double v : out.data()) s += v;
    return s;
  };
  MlpCache cache;
  std::mt19937_64 r2(0);
  Matrix out = mlp.forward(x, ps, false, r2, cache);
  ps.zero_grads();
  Matrix grad_out(out.rows(), out.cols(), 1.0);
  mlp.backward(grad_out, ps, cache);
  GradCheckReport rep = gradient_check(loss, ps, 1e-5, 1e-4, 200, 42);
  CHECK(rep.pass);
}

TEST_CASE("training determinism: identical runs give identical parameters") {
  auto run = [] {
    std::mt19937_64 rng(33);
    MlpConfig cfg;
    cfg.in_dim = 3;
    cfg.hidden = 6;
    cfg.out_dim = 2;
    Mlp mlp("m.", cfg);
    ParameterStore ps;
    mlp.init_params(ps, rng);
    AdamState adam(AdamConfig{});
    Matrix x(4, 3, 0.5);
    for (int it = 0; it < 5; ++it) {
      MlpCache cache;
      Matrix out = mlp.forward(x, ps, false, rng, cache);
      Matrix g(out.rows(), out.cols(), 1.0);
      mlp.backward(g, ps, cache);
      adam.step(ps);
    }
    return ps;
  };
  ParameterStore a = run();
  ParameterStore b = run();
  for (const auto& [name, p] : a.entries()) {
    const auto& q = b.at(name);
    for (std::size_t i = 0; i < p.value.size(); ++i)
      CHECK(p.value.data()[i] == q.value.data()[i]);
  }
}
