#include <gtest/gtest.h>

#include "igt/ops.hpp"
#include "igt/optim.hpp"

using namespace igt;

namespace {

// Scalar rectified Adam written from the published algorithm, in long double.
struct ScalarRAdam {
  long double b1 = 0.9L, b2 = 0.999L, eps = 1e-8L, wd = 0;
  long double m = 0, v = 0;
  long t = 0;

  long double step(long double theta, long double g, long double lr) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    theta -= lr * wd * theta;
    const long double m_hat = m / (1 - powl(b1, t));
    const long double rho_inf = 2 / (1 - b2) - 1;
    const long double b2t = powl(b2, t);
    const long double rho = rho_inf - 2 * t * b2t / (1 - b2t);
    if (rho > 4) {
      const long double l = sqrtl((1 - b2t) / v);
      const long double r = sqrtl((rho - 4) * (rho - 2) * rho_inf / ((rho_inf - 4) * (rho_inf - 2) * rho));
      // eps added to sqrt(v_hat), matching the usual implementation.
      return theta - lr * r * m_hat / (1 / l + eps);
    }
    return theta - lr * m_hat;
  }
};

Tensor<double> quadratic_loss(const Tensor<double>& theta) { return sum(mul(theta, theta)); }

}  // namespace

TEST(RAdam, FirstStepUsesMomentumBranch) {
  // t = 1: m = 0.1 g, m_hat = g, so theta <- theta - lr * g.
  std::vector<Tensor<double>> ps{Tensor<double>::from_rows({{1.0, -3.0}}, true)};
  auto loss = quadratic_loss(ps[0]);
  backward(loss);
  RAdam<double> opt(RAdamConfig{0.9, 0.999, 1e-8, 0.0});
  opt.step(ps, 0.1);
  EXPECT_DOUBLE_EQ(ps[0](0, 0), 0.8);
  EXPECT_DOUBLE_EQ(ps[0](0, 1), -2.4);
  EXPECT_EQ(opt.step_count(), 1);
  EXPECT_DOUBLE_EQ(opt.first_moments()[0][0], 0.2);
}

TEST(RAdam, WeightDecayIsDecoupled) {
  std::vector<Tensor<double>> ps{Tensor<double>::from_rows({{2.0}}, true)};
  ps[0].zero_grad();
  RAdam<double> opt(RAdamConfig{0.9, 0.999, 1e-8, 0.5});
  opt.step(ps, 0.1);
  EXPECT_DOUBLE_EQ(ps[0](0, 0), 2.0 - 0.1 * 0.5 * 2.0);
}

TEST(RAdam, ZeroGradientWithoutDecayLeavesParametersUnchanged) {
  std::vector<Tensor<double>> ps{Tensor<double>::from_rows({{1.5, -2.5}, {0.25, 4}}, true)};
  RAdam<double> opt(RAdamConfig{0.9, 0.999, 1e-8, 0.0});
  for (int i = 0; i < 10; ++i) {
    ps[0].zero_grad();
    opt.step(ps, 1e-3);
  }
  EXPECT_EQ(ps[0].values(), (std::vector<double>{1.5, -2.5, 0.25, 4}));
}

TEST(RAdam, RectificationStartsAtTheOracleIndex) {
  const long double b2 = 0.999L, rho_inf = 2 / (1 - b2) - 1;
  long first = -1;
  for (long t = 1; t < 100 && first < 0; ++t) {
    const long double b2t = powl(b2, t);
    if (rho_inf - 2 * t * b2t / (1 - b2t) > 4) first = t;
  }
  ASSERT_GT(first, 1);
  EXPECT_FALSE(radam_rectified(first - 1, 0.999));
  EXPECT_TRUE(radam_rectified(first, 0.999));
  EXPECT_EQ(first, 5);
}

TEST(RAdam, TrajectoryMatchesIndependentImplementation) {
  const double lr = 0.05;
  std::vector<Tensor<double>> ps{Tensor<double>::from_rows({{1.0}}, true)};
  RAdam<double> opt(RAdamConfig{0.9, 0.999, 1e-8, 1e-5});
  ScalarRAdam ref;
  ref.wd = 1e-5L;
  long double theta = 1.0L;
  double prev_loss = 1.0;
  for (int i = 0; i < 10; ++i) {
    ps[0].zero_grad();
    auto loss = quadratic_loss(ps[0]);
    backward(loss);
    opt.step(ps, lr);
    theta = ref.step(theta, 2 * theta, lr);
    EXPECT_NEAR(ps[0](0, 0), static_cast<double>(theta), 1e-12) << "step " << i + 1;
    const double l = ps[0](0, 0) * ps[0](0, 0);
    EXPECT_LT(l, prev_loss) << "step " << i + 1;
    prev_loss = l;
  }
}

TEST(RAdam, NonFiniteGradientNamesTheParameter) {
  std::vector<Tensor<double>> ps{Tensor<double>::from_rows({{1.0}}, true), Tensor<double>::from_rows({{1.0}}, true)};
  ps[0].zero_grad();
  ps[1].zero_grad();
  ps[1].grad()[0] = std::nan("");
  RAdam<double> opt;
  try {
    opt.step(ps, 1e-3, {"alpha", "blocks.0.attn.wq"});
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("blocks.0.attn.wq"), std::string::npos);
  }
  EXPECT_EQ(opt.step_count(), 0);
  EXPECT_EQ(ps[0](0, 0), 1.0);
}

TEST(RAdam, ChangingParameterListIsContractError) {
  std::vector<Tensor<double>> ps{Tensor<double>::from_rows({{1.0}}, true)};
  ps[0].zero_grad();
  RAdam<double> opt;
  opt.step(ps, 1e-3);
  ps.push_back(Tensor<double>::from_rows({{1.0}}, true));
  ps[1].zero_grad();
  EXPECT_THROW(opt.step(ps, 1e-3), ContractError);
}

TEST(LrSchedule, StepDecayIsInclusiveOfDecayEpoch) {
  const LrSchedule s{1e-3, 1e-4, 20};
  EXPECT_EQ(lr_at(0, s), 1e-3);
  EXPECT_EQ(lr_at(19, s), 1e-3);
  EXPECT_EQ(lr_at(20, s), 1e-4);
  EXPECT_EQ(lr_at(49, s), 1e-4);
}
