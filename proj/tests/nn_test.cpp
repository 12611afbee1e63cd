#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "chadkit/errors.hpp"
#include "chadkit/nn.hpp"

using namespace chadkit;
using nn::Matrix;
using nn::Vector;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

double act(double z, nn::Activation a) {
  switch (a) {
    case nn::Activation::tanh: return std::tanh(z);
    case nn::Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    default: return z;
  }
}

}  // namespace

TEST(Dense, ForwardMatchesScalarLoop) {
  Rng rng(3);
  for (auto a : {nn::Activation::identity, nn::Activation::tanh, nn::Activation::sigmoid}) {
    nn::DenseLayer layer(4, 3, a);
    layer.weights = random_matrix(3, 4, rng);
    layer.bias = random_matrix(3, 1, rng).col(0);
    const Matrix x = random_matrix(4, 5, rng);
    const Matrix y = layer.forward(x);
    for (int b = 0; b < 5; ++b) {
      for (int o = 0; o < 3; ++o) {
        double z = layer.bias(o);
        for (int i = 0; i < 4; ++i) z += layer.weights(o, i) * x(i, b);
        EXPECT_NEAR(y(o, b), act(z, a), 1e-14);
      }
    }
  }
}

TEST(Dense, GlorotBounds) {
  Rng rng(1);
  Matrix w(30, 20);
  nn::glorot_uniform(w, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  EXPECT_LE(w.cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(w.cwiseAbs().maxCoeff(), 0.8 * bound);
  EXPECT_NEAR(w.mean(), 0.0, 0.05);
}

TEST(Dropout, MaskValuesAndScale) {
  Rng rng(7);
  EXPECT_TRUE(nn::dropout_mask(3, 4, 0.0, rng).isOnes());
  const Matrix m = nn::dropout_mask(200, 200, 0.2, rng);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double v = m.data()[i];
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.25) < 1e-15);
  }
  EXPECT_NEAR(m.mean(), 1.0, 0.02);
}

TEST(Mlp, InferenceModeIgnoresDropout) {
  Rng rng(2);
  nn::Mlp mlp(5, {4, 3, 1}, nn::Activation::tanh, nn::Activation::sigmoid, 0.5);
  mlp.init(rng);
  const Matrix x = random_matrix(5, 6, rng);
  EXPECT_EQ(mlp.forward(x), mlp.forward(x));
  Rng d1(11), d2(11);
  EXPECT_EQ(mlp.forward(x, nullptr, &d1), mlp.forward(x, nullptr, &d2));
  Rng d3(12);
  EXPECT_NE(mlp.forward(x, nullptr, &d3), mlp.forward(x));
}

// Backprop through an MLP under MSE against hand-rolled central differences
// on every parameter and every input element.
TEST(Mlp, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  nn::Mlp mlp(4, {6, 3, 2}, nn::Activation::tanh, nn::Activation::sigmoid, 0.0);
  mlp.init(rng);
  for (auto& l : mlp.layers()) l.bias = random_matrix(l.out_dim(), 1, rng, 0.3).col(0);
  Matrix x = random_matrix(4, 7, rng);
  const Matrix target = random_matrix(2, 7, rng);

  nn::Mlp::Tape tape;
  const Matrix y = mlp.forward(x, &tape);
  const auto loss = nn::mse_loss(target, y);
  auto grad = mlp.make_grad();
  const Matrix dx = mlp.backward(tape, loss.grad, grad);

  auto f = [&] { return nn::mse_loss(target, mlp.forward(x)).value; };
  const double h = 1e-6;
  auto params = mlp.params();
  const auto analytic = std::as_const(grad).params();
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double saved = params[t][i];
      params[t][i] = saved + h;
      const double up = f();
      params[t][i] = saved - h;
      const double down = f();
      params[t][i] = saved;
      EXPECT_NEAR(analytic[t][i], (up - down) / (2 * h), 1e-8) << "tensor " << t << " elem " << i;
    }
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = f();
    x.data()[i] = saved - h;
    const double down = f();
    x.data()[i] = saved;
    EXPECT_NEAR(dx.data()[i], (up - down) / (2 * h), 1e-8);
  }
}

TEST(Mlp, BackwardWithDropoutUsesTapeMasks) {
  Rng rng(9);
  nn::Mlp mlp(3, {5, 1}, nn::Activation::tanh, nn::Activation::identity, 0.3);
  mlp.init(rng);
  const Matrix x = random_matrix(3, 4, rng);
  nn::Mlp::Tape tape;
  Rng drop(4);
  const Matrix y = mlp.forward(x, &tape, &drop);
  ASSERT_EQ(tape.masks.size(), 1u);
  auto grad = mlp.make_grad();
  mlp.backward(tape, Matrix::Ones(1, 4), grad);
  // d(sum y)/dW2 = sum over batch of the post-dropout hidden activations.
  const Matrix hidden = tape.outputs[0].cwiseProduct(tape.masks[0]);
  for (int j = 0; j < 5; ++j) EXPECT_NEAR(grad.layers[1].weights(0, j), hidden.row(j).sum(), 1e-12);
  (void)y;
}

TEST(Losses, MseValueAndGradient) {
  Matrix t(2, 2), p(2, 2);
  t << 1, 0, 0.5, 2;
  p << 0, 0, 1, 1;
  const auto l = nn::mse_loss(t, p);
  EXPECT_DOUBLE_EQ(l.value, (1.0 + 0.0 + 0.25 + 1.0) / 4.0);
  EXPECT_DOUBLE_EQ(l.grad(0, 0), 2.0 * (0 - 1) / 4.0);
  EXPECT_DOUBLE_EQ(l.grad(1, 1), 2.0 * (1 - 2) / 4.0);
}

TEST(Losses, BceClampsLogArguments) {
  Matrix labels(1, 2), prob(1, 2);
  labels << 1, 0;
  prob << 0.0, 1.0;
  const auto l = nn::bce_loss(labels, prob);
  EXPECT_NEAR(l.value, -std::log(1e-7), 1e-9);
  EXPECT_TRUE(l.grad.allFinite());
}

TEST(Adam, MatchesHandComputedSteps) {
  Vector w(2);
  w << 1.0, -2.0;
  nn::AdamState state({nn::as_const_span(w)});
  const std::vector<Vector> grads = {Vector::Constant(2, 0.5), (Vector(2) << -1.0, 3.0).finished()};
  double m0 = 0, v0 = 0, m1 = 0, v1 = 0;
  double w0 = 1.0, w1 = -2.0;
  const double lr = 0.1;
  for (int step = 0; step < 2; ++step) {
    const Vector g = step == 0 ? grads[0] : grads[1];
    nn::adam_step(state, {nn::as_span(w)}, {nn::as_const_span(g)}, lr);
    const double t = step + 1;
    m0 = 0.9 * m0 + 0.1 * g(0);
    v0 = 0.999 * v0 + 0.001 * g(0) * g(0);
    m1 = 0.9 * m1 + 0.1 * g(1);
    v1 = 0.999 * v1 + 0.001 * g(1) * g(1);
    w0 -= lr * (m0 / (1 - std::pow(0.9, t))) / (std::sqrt(v0 / (1 - std::pow(0.999, t))) + 1e-8);
    w1 -= lr * (m1 / (1 - std::pow(0.9, t))) / (std::sqrt(v1 / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(w(0), w0, 1e-15);
    EXPECT_NEAR(w(1), w1, 1e-15);
  }
  EXPECT_EQ(state.step_count(), 2);
  // First step moves every coordinate by ~lr regardless of gradient scale.
  Vector z = Vector::Zero(1);
  nn::AdamState s2({nn::as_const_span(z)});
  const Vector tiny = Vector::Constant(1, 1e-3);
  nn::adam_step(s2, {nn::as_span(z)}, {nn::as_const_span(tiny)}, 0.01);
  EXPECT_NEAR(z(0), -0.01, 1e-6);
}

TEST(Adam, NonFiniteGradientThrowsBeforeUpdate) {
  Vector w = Vector::Constant(3, 1.0);
  nn::AdamState state({nn::as_const_span(w)});
  Vector g = Vector::Constant(3, 0.1);
  g(2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(nn::adam_step(state, {nn::as_span(w)}, {nn::as_const_span(g)}, 0.1), NumericError);
  EXPECT_TRUE(w.isConstant(1.0));
  EXPECT_EQ(state.step_count(), 0);
}

TEST(GradCheck, DetectsWrongGradientAndRestoresParams) {
  Vector w(3);
  w << 0.3, -1.2, 2.0;
  const Vector saved = w;
  auto loss = [&] { return w.squaredNorm() + std::sin(w(0)); };
  Vector good(3);
  good << 2 * w(0) + std::cos(w(0)), 2 * w(1), 2 * w(2);
  auto r = nn::grad_check(loss, {nn::as_span(w)}, {nn::as_const_span(good)}, 20, 1e-6, 1);
  EXPECT_LT(r.max_rel_error, 1e-7);
  EXPECT_EQ(r.probes, 20u);
  EXPECT_EQ(w, saved);
  Vector bad = good;
  bad(1) *= 1.1;
  r = nn::grad_check(loss, {nn::as_span(w)}, {nn::as_const_span(bad)}, 20, 1e-6, 1);
  EXPECT_GT(r.max_rel_error, 0.05);
}

TEST(Activation, StringRoundTrip) {
  for (auto a : {nn::Activation::identity, nn::Activation::tanh, nn::Activation::sigmoid}) {
    EXPECT_EQ(nn::activation_from_string(nn::to_string(a)), a);
  }
  EXPECT_THROW(nn::activation_from_string("relu"), Error);
}
