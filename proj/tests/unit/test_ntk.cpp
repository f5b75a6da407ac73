#include <gtest/gtest.h>

#include "ngflow/errors.hpp"
#include "ngflow/ntk.hpp"
#include "oracles.hpp"

using namespace ngflow;

namespace {

ModelParams mf(int depth, int dim, std::uint64_t seed, double scale = 0.5) {
  return init(ModelSpec{ModelKind::matfac, depth, dim, scale, seed});
}

Eigen::MatrixXd onehot(int dim, Probe p) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  m(p.row, p.col) = 1.0;
  return m;
}

}  // namespace

TEST(Ntk, ModeRoundTrip) {
  for (auto m : {KernelMode::egf_ntk, KernelMode::egd_onestep, KernelMode::ngf_ntk,
                 KernelMode::ngd_onestep})
    EXPECT_EQ(kernel_mode_from_string(to_string(m)), m);
  EXPECT_THROW(kernel_mode_from_string("cntk"), ArgumentError);
}

TEST(Ntk, EuclideanSliceMatchesDenseKernel) {
  for (int depth = 1; depth <= 3; ++depth) {
    const auto params = mf(depth, 4, 10 + depth);
    const Probe probe{1, 2};
    const Eigen::MatrixXd J = oracle::kronecker_jacobian(params);
    const Eigen::VectorXd k = J * (J.transpose() * Eigen::VectorXd::Unit(16, probe.col * 4 + probe.row));
    const Eigen::MatrixXd expected = Eigen::Map<const Eigen::MatrixXd>(k.data(), 4, 4);
    const auto slice = ntk_slice(params, probe);
    EXPECT_LT((slice.response - expected).norm(), 1e-12 * expected.norm()) << "depth " << depth;
  }
}

TEST(Ntk, DepthOneIsOneHot) {
  const Probe probe{2, 3};
  EXPECT_EQ(ntk_slice(mf(1, 5, 1), probe).response, onehot(5, probe));
}

TEST(Ntk, DepthTwoSupportIsRowAndColumn) {
  const Probe probe{2, 1};
  const auto r = ntk_slice(mf(2, 5, 2), probe).response;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (i != probe.row && j != probe.col) EXPECT_EQ(r(i, j), 0.0);
  EXPECT_GT(r.row(probe.row).norm(), 0.0);
  EXPECT_GT(r.col(probe.col).norm(), 0.0);
}

TEST(Ntk, NaturalSliceIsOneHotForInvertibleFactors) {
  const Probe probe{3, 3};
  for (int depth = 1; depth <= 4; ++depth) {
    const auto slice = natural_ntk_slice(mf(depth, 7, 20 + depth), probe);
    EXPECT_LT((slice.response - onehot(7, probe)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_FALSE(slice.rank_deficient);
    EXPECT_EQ(slice.mode, KernelMode::ngf_ntk);
  }
}

TEST(Ntk, NaturalSliceReportsSingularFactors) {
  auto params = mf(2, 4, 30);
  params.layers[1].row(0).setZero();
  KernelSlice s;
  EXPECT_NO_THROW(s = natural_ntk_slice(params, Probe{0, 0}));
  EXPECT_TRUE(s.rank_deficient);
}

TEST(Ntk, OneStepSlicesApproachTheFlowKernels) {
  const Probe probe{1, 1};
  const auto params = mf(3, 4, 40);
  const auto ntk = ntk_slice(params, probe).response;
  const double e1 = (onestep_slice(params, probe, Optimizer::egd, 1e-3).response - ntk).norm();
  const double e2 = (onestep_slice(params, probe, Optimizer::egd, 5e-4).response - ntk).norm();
  EXPECT_LT(e1, 1e-2 * ntk.norm());
  EXPECT_NEAR(e2 / e1, 0.5, 0.05);
  for (auto solver : {MatfacSolver::joint, MatfacSolver::factored}) {
    const auto s = onestep_slice(params, probe, Optimizer::ngd, 1e-4, solver);
    EXPECT_EQ(s.mode, KernelMode::ngd_onestep);
    EXPECT_LT((s.response - onehot(4, probe)).norm(), 1e-2);
  }
}

TEST(Ntk, DispatchAndValidation) {
  const auto params = mf(2, 3, 50);
  EXPECT_EQ(kernel_slice(params, Probe{0, 1}, KernelMode::egf_ntk, 1e-3).response,
            ntk_slice(params, Probe{0, 1}).response);
  EXPECT_EQ(kernel_slice(params, Probe{0, 1}, KernelMode::egd_onestep, 1e-3).mode,
            KernelMode::egd_onestep);
  EXPECT_THROW(ntk_slice(params, Probe{3, 0}), ArgumentError);
  EXPECT_THROW(ntk_slice(init(ModelSpec{ModelKind::diagonal, 2, 3}), Probe{0, 0}), StructuralError);
}
