#include "ngflow/ntk.hpp"

#include "ngflow/errors.hpp"
#include "ngflow/natgrad.hpp"

namespace ngflow {

std::string_view to_string(KernelMode mode) {
  switch (mode) {
    case KernelMode::egf_ntk: return "egf_ntk";
    case KernelMode::egd_onestep: return "egd_onestep";
    case KernelMode::ngf_ntk: return "ngf_ntk";
    case KernelMode::ngd_onestep: return "ngd_onestep";
  }
  return "unknown";
}

KernelMode kernel_mode_from_string(std::string_view s) {
  for (KernelMode m : {KernelMode::egf_ntk, KernelMode::egd_onestep, KernelMode::ngf_ntk,
                       KernelMode::ngd_onestep})
    if (to_string(m) == s) return m;
  throw ArgumentError("unknown kernel mode '" + std::string(s) + "'");
}

namespace {

void check(const ModelParams& params, Probe probe) {
  params.validate();
  if (params.spec.kind != ModelKind::matfac)
    throw StructuralError("kernel slices need a matfac (or direct matrix) model");
  if (probe.row < 0 || probe.col < 0 || probe.row >= params.spec.dim ||
      probe.col >= params.spec.dim)
    throw ArgumentError("probe outside the hypothesis matrix");
}

void require_finite(const KernelSlice& s) {
  if (!s.response.allFinite()) throw NumericError("kernel response is not finite");
}

}  // namespace

KernelSlice ntk_slice(const ModelParams& params, Probe probe) {
  check(params, probe);
  const JacobianView jac = jacobian(params);
  const int dim = params.spec.dim;
  KernelSlice out;
  out.probe = probe;
  out.mode = KernelMode::egf_ntk;
  out.response = Eigen::MatrixXd::Zero(dim, dim);
  for (int l = 0; l < jac.depth(); ++l) {
    const Eigen::VectorXd p = jac.left[l] * jac.left[l].row(probe.row).transpose();
    const Eigen::RowVectorXd q = jac.right[l].col(probe.col).transpose() * jac.right[l];
    out.response += p * q;
  }
  require_finite(out);
  return out;
}

KernelSlice natural_ntk_slice(const ModelParams& params, Probe probe) {
  check(params, probe);
  const int dim = params.spec.dim;
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(dim, dim);
  onehot(probe.row, probe.col) = 1.0;
  const NatGradDirection dir = natgrad_matfac(params, onehot);
  KernelSlice out;
  out.probe = probe;
  out.mode = KernelMode::ngf_ntk;
  out.response = jacobian(params).apply_all(dir.blocks);
  out.rank_deficient = dir.rank_deficient;
  out.condition = dir.condition;
  require_finite(out);
  return out;
}

KernelSlice onestep_slice(const ModelParams& params, Probe probe, Optimizer optimizer, double eta,
                          MatfacSolver solver) {
  check(params, probe);
  const int dim = params.spec.dim;
  const Eigen::MatrixXd before = collapse(params).values;

  CompletionTask task;
  task.target = before;
  task.target(probe.row, probe.col) += 1.0;
  task.mask = MaskMatrix::Constant(dim, dim, false);
  task.mask(probe.row, probe.col) = true;

  RunConfig config;
  config.optimizer = optimizer;
  config.objective = Objective::completion;
  config.step_size = eta;
  config.max_steps = 1;
  config.record_every = 1;
  config.matfac_solver = solver;
  const Trajectory traj = run(task, params, config);

  KernelSlice out;
  out.probe = probe;
  out.mode = optimizer == Optimizer::egd ? KernelMode::egd_onestep : KernelMode::ngd_onestep;
  out.response = (traj.final_hypothesis - before) / eta;
  require_finite(out);
  return out;
}

KernelSlice kernel_slice(const ModelParams& params, Probe probe, KernelMode mode, double eta) {
  switch (mode) {
    case KernelMode::egf_ntk: return ntk_slice(params, probe);
    case KernelMode::ngf_ntk: return natural_ntk_slice(params, probe);
    case KernelMode::egd_onestep: return onestep_slice(params, probe, Optimizer::egd, eta);
    case KernelMode::ngd_onestep: return onestep_slice(params, probe, Optimizer::ngd, eta);
  }
  throw ArgumentError("unknown kernel mode");
}

}  // namespace ngflow
