#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ngflow/errors.hpp"
#include "ngflow/logistic.hpp"
#include "oracles.hpp"

using namespace ngflow;

TEST(Stable, MatchesNaiveFormulasInSafeRange) {
  for (double x = -30.0; x <= 30.0; x += 0.37) {
    EXPECT_NEAR(stable::sigmoid(x), 1.0 / (1.0 + std::exp(-x)), 1e-15);
    EXPECT_NEAR(stable::softplus(x), std::log1p(std::exp(x)), 1e-13 * (1 + std::abs(x)));
    EXPECT_NEAR(stable::log_sigmoid(x), -std::log1p(std::exp(-x)), 1e-13 * (1 + std::abs(x)));
    const double p = 1.0 / (1.0 + std::exp(-x));
    EXPECT_NEAR(stable::sigmoid_variance(x), p * (1 - p), 1e-15);
  }
}

TEST(Stable, FiniteFarOutside) {
  for (double x : {-1000.0, -750.0, 750.0, 1000.0}) {
    EXPECT_TRUE(std::isfinite(stable::sigmoid(x)));
    EXPECT_TRUE(std::isfinite(stable::softplus(x)));
    EXPECT_TRUE(std::isfinite(stable::log_sigmoid(x)));
    EXPECT_TRUE(std::isfinite(stable::sigmoid_variance(x)));
  }
  EXPECT_DOUBLE_EQ(stable::softplus(1000.0), 1000.0);
  EXPECT_DOUBLE_EQ(stable::log_sigmoid(-1000.0), -1000.0);
  EXPECT_NEAR(stable::sigmoid_variance(50.0), std::exp(-50.0), 1e-30);
}

TEST(Dataset, ValidationAndTransforms) {
  ClassificationDataset ds{Eigen::MatrixXd(2, 2), Eigen::Vector2d(1.0, -1.0)};
  ds.X << 1, 2, 3, 4;
  EXPECT_NO_THROW(ds.validate());
  Eigen::MatrixXd xs(2, 2);
  xs << 1, 2, -3, -4;
  EXPECT_EQ(ds.signed_design(), xs);
  Eigen::Matrix2d A;
  A << 2, 0, 1, 1;
  EXPECT_TRUE(ds.transformed(A).X.isApprox(ds.X * A.transpose()));

  auto bad = ds;
  bad.y(0) = 0.5;
  EXPECT_THROW(bad.validate(), ArgumentError);
  bad = ds;
  bad.y = Eigen::Vector3d(1, 1, 1);
  EXPECT_THROW(bad.validate(), StructuralError);
}

TEST(Logistic, GradientAndFisherMatchTextbookFormulas) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto ds = oracle::separable_dataset(12, 4, rng);
    const Eigen::VectorXd beta = oracle::gaussian_matrix(4, 1, rng);
    EXPECT_LT((grad_beta(ds, beta) - oracle::naive_grad(ds, beta)).norm(), 1e-12);
    const auto F = fisher_beta(ds, beta);
    EXPECT_LT((F.true_fisher() - oracle::naive_fisher(ds, beta)).norm(), 1e-13);
    EXPECT_EQ(F.weighting, FisherWeighting::sample);
  }
}

TEST(Logistic, GradientMatchesFiniteDifferenceOfLoss) {
  std::mt19937_64 rng(4);
  const auto ds = oracle::separable_dataset(10, 3, rng);
  const Eigen::VectorXd beta = oracle::gaussian_matrix(3, 1, rng);
  const Eigen::VectorXd g = grad_beta(ds, beta);
  for (int d = 0; d < 3; ++d) {
    Eigen::VectorXd p = beta, m = beta;
    p(d) += 1e-6;
    m(d) -= 1e-6;
    EXPECT_NEAR(g(d), (loss(ds, p) - loss(ds, m)) / 2e-6, 1e-6);
  }
}

TEST(Logistic, LogitSpaceQuantities) {
  const Eigen::Vector2d s(2.0, -1.0);
  const Eigen::Vector2d y(1.0, 1.0);
  const auto st = LogitState::from_logits(s, y);
  EXPECT_EQ(st.u, s);
  const Eigen::VectorXd g = grad_logits(st, y);
  EXPECT_NEAR(g(0), -(1 - 1 / (1 + std::exp(-2.0))), 1e-15);
  const Eigen::VectorXd f = fisher_logits(st);
  EXPECT_NEAR(f(1), stable::sigmoid_variance(-1.0), 1e-16);
}

TEST(Logistic, ScaleExtractionSurvivesHugeMargins) {
  ClassificationDataset ds{Eigen::MatrixXd(3, 2), Eigen::Vector3d(1, -1, 1)};
  ds.X << 1, 0.2, -1, 0.1, 0.9, -0.3;
  const Eigen::Vector2d beta(1000.0, 0.0);
  const auto F = fisher_beta(ds, beta);
  EXPECT_TRUE(F.matrix.allFinite());
  EXPECT_GT(F.matrix.norm(), 0.0);
  EXPECT_LT(F.scale_log, -800.0);
  EXPECT_TRUE(std::isfinite(loss(ds, beta)));
}

TEST(Logistic, PopulationWeighting) {
  std::mt19937_64 rng(6);
  const auto train = oracle::separable_dataset(5, 3, rng);
  const auto pop = oracle::separable_dataset(40, 3, rng);
  const Eigen::VectorXd beta = oracle::gaussian_matrix(3, 1, rng);
  const auto F = fisher_beta(train, beta, &pop);
  EXPECT_EQ(F.weighting, FisherWeighting::population);
  EXPECT_LT((F.true_fisher() - oracle::naive_fisher(pop, beta)).norm(), 1e-13);
}
