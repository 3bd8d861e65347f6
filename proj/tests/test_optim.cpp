#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hoso/model.hpp"
#include "hoso/optim.hpp"

using namespace hoso;
using optim::ParamRef;

namespace {

struct Tensor {
  std::vector<double> values;
  std::vector<double> grads;
  std::vector<ParamRef<double>> group() { return {{"x", values, grads}}; }
};

}  // namespace

TEST(Sgd, VanillaStepIsGradientDescent) {
  Tensor t{{1.0, -2.0}, {0.5, 0.25}};
  optim::Sgd opt({0.0, 0.0});
  opt.step(t.group(), 0.1);
  EXPECT_DOUBLE_EQ(t.values[0], 1.0 - 0.05);
  EXPECT_DOUBLE_EQ(t.values[1], -2.0 - 0.025);
}

TEST(Sgd, TwoMomentumStepsMatchUnrolledOracle) {
  Tensor t{{0.3}, {0.7}};
  optim::Sgd opt({0.9, 0.0});
  const double lr = 0.01;
  opt.step(t.group(), lr);
  opt.step(t.group(), lr);
  EXPECT_NEAR(0.3 - t.values[0], lr * (0.7 + (1.0 + 0.9) * 0.7), 1e-10);
}

TEST(Sgd, WeightDecayIsCoupledIntoVelocity) {
  Tensor t{{2.0}, {0.0}};
  optim::Sgd opt({0.9, 5e-4});
  opt.step(t.group(), 0.1);
  const double v1 = 5e-4 * 2.0;
  const double p1 = 2.0 - 0.1 * v1;
  EXPECT_NEAR(t.values[0], p1, 1e-15);
  opt.step(t.group(), 0.1);
  EXPECT_NEAR(t.values[0], p1 - 0.1 * (0.9 * v1 + 5e-4 * p1), 1e-15);
}

TEST(Sgd, ZeroLearningRateLeavesParameters) {
  Tensor t{{1.5, 2.5}, {3.0, -1.0}};
  optim::Sgd opt;
  opt.step(t.group(), 0.0);
  EXPECT_EQ(t.values, (std::vector<double>{1.5, 2.5}));
}

TEST(Sgd, NonFiniteGradientNamesTensor) {
  Tensor t{{1.0}, {std::numeric_limits<double>::infinity()}};
  optim::Sgd opt;
  try {
    opt.step(t.group(), 0.1);
    FAIL();
  } catch (const NumericsError& e) {
    EXPECT_NE(std::string(e.what()).find("x"), std::string::npos);
  }
  EXPECT_EQ(t.values[0], 1.0);
}

TEST(Sgd, GroupShapeIsFixedAfterFirstStep) {
  Tensor a{{1.0}, {1.0}}, b{{1.0}, {1.0}};
  optim::Sgd opt;
  opt.step(a.group(), 0.1);
  std::vector<ParamRef<double>> two{{"a", a.values, a.grads}, {"b", b.values, b.grads}};
  EXPECT_THROW(opt.step(two, 0.1), ShapeError);
}

TEST(Sgd, FloatStorageWithDoubleVelocity) {
  std::vector<float> p{1.0f};
  const std::vector<double> g{1e-3};
  optim::Sgd opt({0.9, 0.0});
  std::vector<ParamRef<float>> group{{"p", p, g}};
  for (int i = 0; i < 3; ++i) opt.step(group, 1.0);
  EXPECT_NEAR(opt.velocity()[0][0], 1e-3 * (1 + 0.9 + 0.81), 1e-15);
}

TEST(Groups, AdapterRatioAndJointMembership) {
  auto p = model::init_adapter<float>(8, 1, 0.0);
  model::Gradients g(p);
  const auto adapter = optim::adapter_group(p, g);
  const auto ratio = optim::ratio_group(p, g);
  const auto joint = optim::joint_group(p, g);
  ASSERT_EQ(adapter.size(), 4u);
  ASSERT_EQ(ratio.size(), 1u);
  ASSERT_EQ(joint.size(), 5u);
  EXPECT_EQ(ratio[0].values.data(), &p.alpha_logit);
  for (const auto& r : adapter) EXPECT_NE(r.values.data(), &p.alpha_logit);
  EXPECT_EQ(joint.back().values.data(), &p.alpha_logit);
}

TEST(Cosine, EndpointsAndMidpoint) {
  EXPECT_NEAR(optim::cosine_lr(0, 200, 0.002), 0.002, 1e-12);
  EXPECT_NEAR(optim::cosine_lr(100, 200, 0.002), 0.001, 1e-12);
  EXPECT_EQ(optim::cosine_lr(200, 200, 0.002), 0.0);
}

TEST(Cosine, MonotoneNonIncreasingAndMatchesFormula) {
  double prev = 1.0;
  for (std::size_t s = 0; s <= 50; ++s) {
    const double lr = optim::cosine_lr(s, 50, 1.0);
    EXPECT_LE(lr, prev);
    EXPECT_NEAR(lr, 0.5 * (1 + std::cos(std::numbers::pi * static_cast<double>(s) / 50)), 1e-15);
    prev = lr;
  }
}

TEST(Cosine, InvalidSteps) {
  EXPECT_THROW(optim::cosine_lr(0, 0, 0.1), ConfigError);
  EXPECT_THROW(optim::cosine_lr(11, 10, 0.1), ConfigError);
}

TEST(Schedule, ConstantKind) {
  const optim::Schedule s{0.1, 10, optim::ScheduleKind::Constant};
  EXPECT_EQ(s.at(0), 0.1);
  EXPECT_EQ(s.at(9), 0.1);
}
