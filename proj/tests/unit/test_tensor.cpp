#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dgflow/errors.hpp"
#include "dgflow/tensor.hpp"

using namespace dgflow;

TEST(Tensor, ShapeAndAccess) {
  const Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.rank(), 2u);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.at(1, 2), 6.0);
  EXPECT_EQ(m.row(1)[0], 4.0);
  EXPECT_EQ(Tensor::scalar(2.5).item(), 2.5);
  EXPECT_EQ(m.reshaped({3, 2}).at(2, 1), 6.0);
}

TEST(Tensor, RejectsMismatchedShapeAndNonFinite) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor::vector({1.0, std::numeric_limits<double>::quiet_NaN()}), NumericalError);
  EXPECT_THROW(Tensor::vector({std::numeric_limits<double>::infinity()}), NumericalError);
  EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), ShapeError);
  EXPECT_THROW(Tensor::vector({1, 2}).item(), ShapeError);
}

TEST(Tensor, SinglePrecisionRoundsOnConstruction) {
  const Tensor t = Tensor::vector({0.1}, Precision::f32);
  EXPECT_EQ(t[0], static_cast<double>(0.1f));
  EXPECT_NE(t[0], 0.1);
  EXPECT_EQ(Tensor::vector({0.1}).with_precision(Precision::f32)[0], static_cast<double>(0.1f));
}

TEST(Tensor, Arithmetic) {
  const Tensor a = Tensor::vector({1, 2, 3}), b = Tensor::vector({4, 5, 6});
  EXPECT_EQ(dot(a, b), 32.0);
  EXPECT_EQ((a + b)[2], 9.0);
  EXPECT_EQ((b - a)[0], 3.0);
  EXPECT_EQ((2.0 * a)[1], 4.0);
  EXPECT_EQ(hadamard(a, b)[1], 10.0);
  EXPECT_EQ(max_abs_diff(a, b), 3.0);
  EXPECT_EQ(max_abs(Tensor::vector({-7, 2})), 7.0);
  EXPECT_THROW(a + Tensor::vector({1, 2}), ShapeError);
}

TEST(Tensor, IdenticalIsBitwise) {
  const Tensor a = Tensor::vector({1, 2});
  EXPECT_TRUE(a.identical(Tensor::vector({1, 2})));
  EXPECT_FALSE(a.identical(Tensor::vector({1, 2 + 1e-15})));
  EXPECT_FALSE(a.identical(a.with_precision(Precision::f32)));
  EXPECT_FALSE(a.identical(a.reshaped({1, 2})));
}

TEST(Tensor, PrecisionNames) {
  EXPECT_EQ(precision_from_string(to_string(Precision::f32)), Precision::f32);
  EXPECT_EQ(precision_from_string("double"), Precision::f64);
  EXPECT_THROW(precision_from_string("f16"), std::invalid_argument);
  EXPECT_EQ(default_secant_eps(Precision::f64), 1e-12);
}
