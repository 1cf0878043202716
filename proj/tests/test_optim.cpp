#include "glancevad/optim.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace glancevad;

TEST(Adam, ZeroGradientNoDecayIsNoop) {
    Vector p(3);
    p << 1.0, -2.0, 0.5;
    const Vector before = p;
    auto s = AdamState::zeros(3);
    adam_step(p, Vector::Zero(3), s, 1e-2, 0.0);
    EXPECT_EQ(p, before);
    EXPECT_EQ(s.m.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(s.v.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Adam, FirstStepIsLearningRate) {
    Vector p = Vector::Constant(1, 0.3);
    auto s = AdamState::zeros(1);
    const double lr = 1e-3;
    adam_step(p, Vector::Constant(1, 1.0), s, lr, 0.0);
    // m_hat = 1 and v_hat = 1 after bias correction.
    EXPECT_NEAR(p[0], 0.3 - lr / (1.0 + 1e-8), 1e-15);
    EXPECT_NEAR(s.m[0], 0.1, 1e-15);
    EXPECT_NEAR(s.v[0], 0.001, 1e-15);
}

TEST(Adam, TwoStepsByHand) {
    Vector p = Vector::Constant(1, 0.0);
    auto s = AdamState::zeros(1);
    adam_step(p, Vector::Constant(1, 2.0), s, 0.1, 0.0);
    adam_step(p, Vector::Constant(1, -1.0), s, 0.1, 0.0);
    const double m = 0.9 * 0.2 + 0.1 * -1.0;
    const double v = 0.999 * 0.004 + 0.001 * 1.0;
    const double step2 = 0.1 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
    EXPECT_NEAR(p[0], -0.1 / (1.0 + 0.5e-8) - step2, 1e-12);
}

TEST(Adam, WeightDecayShrinksTowardZero) {
    Vector p(2);
    p << 2.0, -3.0;
    auto s = AdamState::zeros(2);
    for (int i = 0; i < 5; ++i) adam_step(p, Vector::Zero(2), s, 1e-2, 0.1);
    EXPECT_LT(p[0], 2.0);
    EXPECT_GT(p[0], 0.0);
    EXPECT_GT(p[1], -3.0);
    EXPECT_LT(p[1], 0.0);
}

TEST(Adam, Errors) {
    Vector p = Vector::Zero(2);
    auto s = AdamState::zeros(2);
    EXPECT_THROW(adam_step(p, Vector::Zero(3), s, 1e-3, 0.0), ShapeError);
    Vector g = Vector::Zero(2);
    g[1] = std::nan("");
    EXPECT_THROW(adam_step(p, g, s, 1e-3, 0.0), NumericError);
}
