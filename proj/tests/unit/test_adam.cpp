#include <gtest/gtest.h>

#include <cmath>

#include "dgflow/adam.hpp"
#include "dgflow/errors.hpp"

using namespace dgflow;

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  Adam adam;
  Tensor p = Tensor::vector({1.0, -2.0, 0.5});
  const Tensor g = Tensor::vector({3.0, -0.01, 1e-3});
  adam.step({&p}, {g});
  const double lr = adam.config().lr;
  EXPECT_NEAR(p[0], 1.0 - lr * 3.0 / (3.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], -2.0 + lr, 1e-9);
  const double d = 0.5 - p[2];
  EXPECT_GE(d, 0.99 * lr);
  EXPECT_LE(d, lr);
}

TEST(Adam, ClosedFormSecondStep) {
  AdamConfig c;
  c.lr = 0.1;
  Adam adam(c);
  Tensor p = Tensor::vector({0.0});
  adam.step({&p}, {Tensor::vector({1.0})});
  adam.step({&p}, {Tensor::vector({0.5})});
  const double m = 0.9 * 0.1 + 0.1 * 0.5, v = 0.999 * 0.001 + 0.001 * 0.25;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  const double first = -0.1 / (1.0 + 1e-8);
  EXPECT_NEAR(p[0], first - 0.1 * mh / (std::sqrt(vh) + 1e-8), 1e-15);
}

TEST(Adam, ZeroGradientsLeaveParametersAndDecayMoments) {
  Adam adam;
  Tensor p = Tensor::vector({1.0});
  adam.step({&p}, {Tensor::vector({2.0})});
  const double after_first = p[0];
  const double m1 = adam.first_moments()[0][0];
  adam.step({&p}, {Tensor::vector({0.0})});
  EXPECT_NEAR(adam.first_moments()[0][0], 0.9 * m1, 1e-15);
  // The decayed moment still moves the parameter; with zero moments nothing moves.
  EXPECT_NE(p[0], after_first);
  Adam fresh;
  Tensor q = Tensor::vector({1.0});
  fresh.step({&q}, {Tensor::vector({0.0})});
  EXPECT_EQ(q[0], 1.0);
}

TEST(Adam, Deterministic) {
  auto run = [] {
    Adam adam;
    Tensor p = Tensor::vector({0.3, -0.1});
    for (int i = 0; i < 50; ++i) adam.step({&p}, {Tensor::vector({std::sin(i * 1.0), std::cos(i * 0.5)})});
    return p;
  };
  EXPECT_TRUE(run().identical(run()));
}

TEST(Adam, Errors) {
  EXPECT_THROW(Adam(AdamConfig{0.0}), std::invalid_argument);
  Adam adam;
  Tensor p = Tensor::vector({1.0, 2.0});
  EXPECT_THROW(adam.step({&p}, {Tensor::vector({1.0})}), ShapeError);
  EXPECT_THROW(adam.step({&p}, {}), ShapeError);
}
