#include <random>

#include <benchmark/benchmark.h>

#include "ngflow/generators.hpp"
#include "ngflow/natgrad.hpp"
#include "ngflow/ntk.hpp"
#include "ngflow/reference.hpp"

using namespace ngflow;

namespace {

ClassificationDataset sparse_train(int dim) {
  SparseParams p;
  p.dim = dim;
  p.n_test = 10;
  p.n_population = 10;
  return gen_sparse(p, 0).train;
}

void BM_NatGradDirect(benchmark::State& state) {
  const auto ds = sparse_train(static_cast<int>(state.range(0)));
  const auto params = init(ModelSpec{ModelKind::direct_vector, 1, static_cast<int>(ds.dim()), 0.1, 1});
  const Eigen::VectorXd beta = collapse(params).vector();
  for (auto _ : state) benchmark::DoNotOptimize(natgrad_direct_logistic(ds, beta));
}
BENCHMARK(BM_NatGradDirect)->Arg(10)->Arg(50)->Arg(200);

void BM_NatGradDiagonal(benchmark::State& state) {
  const auto ds = sparse_train(50);
  const auto params =
      init(ModelSpec{ModelKind::diagonal, static_cast<int>(state.range(0)), 50, 0.5, 1});
  for (auto _ : state) benchmark::DoNotOptimize(natgrad_diagonal_logistic(ds, params));
}
BENCHMARK(BM_NatGradDiagonal)->Arg(2)->Arg(4);

Eigen::MatrixXd random_grad(int dim) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  Eigen::MatrixXd g(dim, dim);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = n(rng);
  return g;
}

void BM_MatfacFactored(benchmark::State& state) {
  const auto params = init(ModelSpec{ModelKind::matfac, static_cast<int>(state.range(0)), 20,
                                     1.0 / std::sqrt(20.0), 1});
  const Eigen::MatrixXd g = random_grad(20);
  for (auto _ : state) benchmark::DoNotOptimize(natgrad_matfac(params, g));
}
BENCHMARK(BM_MatfacFactored)->Arg(2)->Arg(3)->Arg(4);

void BM_MatfacJoint(benchmark::State& state) {
  const auto params = init(ModelSpec{ModelKind::matfac, static_cast<int>(state.range(0)), 20,
                                     1.0 / std::sqrt(20.0), 1});
  const Eigen::MatrixXd g = random_grad(20);
  for (auto _ : state) benchmark::DoNotOptimize(natgrad_matfac_joint(params, g));
}
BENCHMARK(BM_MatfacJoint)->Arg(2)->Arg(3)->Arg(4);

void BM_NtkSlice(benchmark::State& state) {
  const auto params =
      init(ModelSpec{ModelKind::matfac, static_cast<int>(state.range(0)), 11, 0.5, 0});
  for (auto _ : state) benchmark::DoNotOptimize(ntk_slice(params, Probe{5, 5}));
}
BENCHMARK(BM_NtkSlice)->Arg(2)->Arg(4);

void BM_NaturalNtkSlice(benchmark::State& state) {
  const auto params =
      init(ModelSpec{ModelKind::matfac, static_cast<int>(state.range(0)), 11, 0.5, 0});
  for (auto _ : state) benchmark::DoNotOptimize(natural_ntk_slice(params, Probe{5, 5}));
}
BENCHMARK(BM_NaturalNtkSlice)->Arg(2)->Arg(4);

void BM_MaxMarginL2(benchmark::State& state) {
  const auto ds = sparse_train(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(max_margin_l2(ds));
}
BENCHMARK(BM_MaxMarginL2)->Arg(50)->Arg(200);

void BM_MaxMarginHalf(benchmark::State& state) {
  const auto ds = gen_toy2d(Toy2dParams{}, 0);
  for (auto _ : state) benchmark::DoNotOptimize(max_margin_lp(ds, 0.5));
}
BENCHMARK(BM_MaxMarginHalf);

}  // namespace

BENCHMARK_MAIN();
