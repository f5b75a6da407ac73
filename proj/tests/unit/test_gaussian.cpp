#include <gtest/gtest.h>

#include "ngflow/errors.hpp"
#include "ngflow/gaussian.hpp"

using namespace ngflow;

namespace {

CompletionTask small_task() {
  CompletionTask t;
  t.target = Eigen::MatrixXd::Zero(2, 2);
  t.target << 1, 2, 3, 4;
  t.mask = MaskMatrix::Constant(2, 2, false);
  t.mask(0, 0) = true;
  t.mask(1, 1) = true;
  t.noise_sigma = 2.0;
  return t;
}

}  // namespace

TEST(Gaussian, LossAndGradientOnObservedEntries) {
  const auto t = small_task();
  const Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_DOUBLE_EQ(mc_loss(t, beta), 0.5 * (1.0 + 16.0));
  Eigen::MatrixXd g(2, 2);
  g << -1, 0, 0, -4;
  EXPECT_EQ(mc_grad(t, beta), g);
  EXPECT_EQ(t.observed_count(), 2);
}

TEST(Gaussian, FisherIsScaledIdentity) {
  const auto F = fisher_gaussian(small_task());
  EXPECT_DOUBLE_EQ(F.scale, 0.25);
  const Eigen::MatrixXd m = Eigen::MatrixXd::Ones(2, 2);
  EXPECT_EQ(F.solve(F.apply(m)), m);
}

TEST(Gaussian, Validation) {
  auto t = small_task();
  t.noise_sigma = 0.0;
  EXPECT_THROW(t.validate(), ArgumentError);
  t = small_task();
  t.mask = MaskMatrix::Constant(3, 3, true);
  EXPECT_THROW(t.validate(), StructuralError);
}
