#include "ngflow/natgrad.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ngflow/errors.hpp"

namespace ngflow {

namespace {

// Square-root factorization of the scale-extracted logistic system.
//
// With z_n = e^{(u_min-u_n)/2} and h_n = z_n phi(u_n), the rows h_n x~_n form
// H with H^T H = e^{u_min} N F and H^T z = -e^{u_min} grad, so
// -F^+ grad = N pinv(H) z. Every z_n lies in (0, 1], so nothing can
// overflow, and solving through H keeps the conditioning at cond(H) instead
// of cond(H)^2.
struct SqrtSystem {
  Eigen::MatrixXd H;
  Eigen::VectorXd z;
  // Row n of H x = z is h_n (x~_n . x - target_n) with h_n = e^{log_h_n};
  // kept in log form because h_n underflows once margins differ by ~1400.
  Eigen::VectorXd log_h;
  Eigen::VectorXd target;
};

SqrtSystem sqrt_system(const ClassificationDataset& ds, const Eigen::VectorXd& beta) {
  const LogitState st = LogitState::from(ds, beta);
  const double u_min = st.u.minCoeff();
  SqrtSystem sys;
  sys.z.resize(st.u.size());
  sys.log_h.resize(st.u.size());
  sys.target.resize(st.u.size());
  Eigen::VectorXd h(st.u.size());
  for (Eigen::Index n = 0; n < st.u.size(); ++n) {
    const double log_z = 0.5 * (u_min - st.u(n));
    const double log_sig = stable::log_sigmoid(st.u(n));
    sys.z(n) = std::exp(log_z);
    sys.log_h(n) = log_z + log_sig;
    sys.target(n) = std::exp(-log_sig);
    h(n) = std::exp(sys.log_h(n));
  }
  sys.H = h.asDiagonal() * ds.signed_design();
  return sys;
}

// |H^T (H x - z)| / |H^T z|: the residual of the normal equations, which are
// the scale-extracted Fisher system up to a positive constant.
double normal_residual(const SqrtSystem& sys, const Eigen::VectorXd& x) {
  const Eigen::VectorXd rhs = sys.H.transpose() * sys.z;
  const double r = (sys.H.transpose() * (sys.H * x) - rhs).norm();
  const double scale = rhs.norm();
  return scale > 0.0 ? r / scale : r;
}

// Least squares for a full-column-rank M whose rows are graded in size:
// Householder QR with rows sorted by decreasing size and column pivoting,
// which is row-wise backward stable. Norms go through stableNorm because the
// squared norm of a column of rows near 1e-160 underflows, and Eigen's own
// reflector then silently skips the column.
Eigen::VectorXd graded_lstsq(const Eigen::MatrixXd& M, const Eigen::VectorXd& z) {
  const Eigen::Index m = M.rows();
  const Eigen::Index n = M.cols();
  std::vector<Eigen::Index> order(m);
  for (Eigen::Index i = 0; i < m; ++i) order[i] = i;
  const Eigen::VectorXd size = M.rowwise().lpNorm<Eigen::Infinity>();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return size(a) > size(b); });
  Eigen::MatrixXd R(m, n);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    R.row(i) = M.row(order[i]);
    b(i) = z(order[i]);
  }

  const Eigen::Index steps = std::min(m, n);
  std::vector<Eigen::Index> cols(n);
  for (Eigen::Index j = 0; j < n; ++j) cols[j] = j;
  for (Eigen::Index k = 0; k < steps; ++k) {
    Eigen::Index best = k;
    double best_norm = -1.0;
    for (Eigen::Index j = k; j < n; ++j) {
      const double nj = R.col(j).tail(m - k).stableNorm();
      if (nj > best_norm) {
        best_norm = nj;
        best = j;
      }
    }
    R.col(k).swap(R.col(best));
    std::swap(cols[k], cols[best]);
    if (best_norm == 0.0) break;

    Eigen::VectorXd v = R.col(k).tail(m - k);
    const double alpha = v(0) > 0.0 ? -best_norm : best_norm;
    v(0) -= alpha;
    const double v_norm = v.stableNorm();
    if (v_norm == 0.0) continue;
    v /= v_norm;
    auto block = R.bottomRightCorner(m - k, n - k);
    block.noalias() -= 2.0 * v * (v.transpose() * block);
    b.tail(m - k) -= 2.0 * v * v.dot(b.tail(m - k));
  }

  Eigen::VectorXd c_perm = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = steps - 1; i >= 0; --i) {
    if (R(i, i) == 0.0) continue;
    const double acc = b(i) - R.row(i).segment(i + 1, n - i - 1).dot(c_perm.tail(n - i - 1));
    c_perm(i) = acc / R(i, i);
  }
  Eigen::VectorXd c(n);
  for (Eigen::Index j = 0; j < n; ++j) c(cols[j]) = c_perm(j);
  return c;
}

// Row space and null space of m (columns of V split at the numerical rank).
struct RowSpaces {
  Eigen::MatrixXd row;
  Eigen::MatrixXd null;
};

RowSpaces row_spaces(const Eigen::MatrixXd& m, double rtol) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < sigma.size() && sigma(rank) > 0.0 && sigma(rank) > rtol * sigma(0)) ++rank;
  const Eigen::Index n = m.cols();
  return {svd.matrixV().leftCols(rank), svd.matrixV().rightCols(n - rank)};
}

// Rows weighted this far below the heaviest remaining row cannot change the
// directions that row fixes at double precision.
constexpr double kTierLogWidth = 300.0;

// Minimum-norm minimizer of sum_n e^{2 log_h_n} (a_n . x - target_n)^2.
//
// The weights can span thousands of orders of magnitude, beyond what a
// double holds, so a relative singular value cutoff on the weighted matrix
// would drop directions the exact inverse keeps. The rank comes from the
// unweighted A. Rows are taken in tiers of comparable weight, heaviest
// first: each tier solves a graded least-squares problem on the directions
// still free and hands its null space down to the next tier. Cross-tier
// coupling is below e^{-2 kTierLogWidth}.
Eigen::VectorXd graded_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& log_h,
                             const Eigen::VectorXd& target, double rtol) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(A.cols());
  Eigen::MatrixXd free = row_spaces(A, rtol).row;
  std::vector<Eigen::Index> rows(A.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) rows[i] = i;
  std::sort(rows.begin(), rows.end(),
            [&](Eigen::Index a, Eigen::Index b) { return log_h(a) > log_h(b); });

  std::size_t next = 0;
  while (free.cols() > 0 && next < rows.size()) {
    const double top = log_h(rows[next]);
    std::size_t end = next;
    while (end < rows.size() && log_h(rows[end]) > top - kTierLogWidth) ++end;
    const auto count = static_cast<Eigen::Index>(end - next);
    Eigen::MatrixXd tier(count, A.cols());
    Eigen::VectorXd scale(count), rhs(count);
    for (Eigen::Index i = 0; i < count; ++i) {
      const Eigen::Index r = rows[next + static_cast<std::size_t>(i)];
      tier.row(i) = A.row(r);
      scale(i) = std::exp(log_h(r) - top);
      rhs(i) = target(r) - A.row(r).dot(x);
    }
    next = end;

    const Eigen::MatrixXd projected = tier * free;
    const RowSpaces spaces = row_spaces(projected, rtol);
    if (spaces.row.cols() == 0) continue;
    const Eigen::MatrixXd weighted = scale.asDiagonal() * (projected * spaces.row);
    const Eigen::VectorXd coeff = graded_lstsq(weighted, scale.cwiseProduct(rhs));
    x += free * (spaces.row * coeff);
    free = free * spaces.null;
  }
  return x;
}

// Population Fisher: the gradient comes from the training set, the Fisher from
// `population`. Returns (matrix, rhs, log multiplier) with
// F_pop^+ (-grad) = exp(log_mult) * matrix^+ rhs.
struct PopulationSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
  double log_mult = 0.0;
};

PopulationSystem population_system(const ClassificationDataset& ds, const Eigen::VectorXd& beta,
                                   const ClassificationDataset& population) {
  if (population.dim() != ds.dim())
    throw StructuralError("population and training dims differ");
  const FisherSystem fisher = fisher_beta(ds, beta, &population);
  const LogitState st = LogitState::from(ds, beta);
  const double u_min = st.u.minCoeff();
  // phi(-u) = e^{-u_min} * exp(u_min + log phi(-u))
  Eigen::VectorXd r(st.u.size());
  for (Eigen::Index n = 0; n < r.size(); ++n)
    r(n) = std::exp(u_min + stable::log_sigmoid(-st.u(n)));
  PopulationSystem sys;
  sys.matrix = fisher.matrix;
  sys.rhs = ds.signed_design().transpose() * r;
  sys.log_mult = -fisher.scale_log - u_min;
  return sys;
}

void check_inputs(const ClassificationDataset& ds, const Eigen::VectorXd& beta) {
  ds.validate();
  if (beta.size() != ds.dim()) throw StructuralError("beta length does not match dataset dim");
  if (!beta.allFinite()) throw NumericError("non-finite parameters");
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + " is not finite");
}

void check_residual(double residual, double tol, const char* what) {
  if (!(residual <= tol))
    throw SolverError(std::string(what) + ": relative residual " + std::to_string(residual) +
                          " exceeds tolerance",
                      residual);
}

}  // namespace

NatGradDirection natgrad_direct_logistic(const ClassificationDataset& ds,
                                         const Eigen::VectorXd& beta,
                                         const NatGradOptions& options) {
  check_inputs(ds, beta);
  NatGradDirection out;
  Eigen::VectorXd dir;
  if (options.population) {
    const PopulationSystem sys = population_system(ds, beta, *options.population);
    const Eigen::VectorXd v = min_norm_solve(sys.matrix, sys.rhs, options.pinv_rtol);
    out.residual = relative_residual(sys.matrix, v, sys.rhs);
    dir = std::exp(sys.log_mult) * v;
  } else {
    const SqrtSystem sys = sqrt_system(ds, beta);
    const Eigen::VectorXd v =
        graded_solve(ds.signed_design(), sys.log_h, sys.target, options.pinv_rtol);
    out.residual = normal_residual(sys, v);
    dir = static_cast<double>(ds.size()) * v;
  }
  check_residual(out.residual, options.residual_tol, "natgrad_direct_logistic");
  require_finite(dir, "natural-gradient direction");
  out.rank_deficient = spectrum(ds.X, options.pinv_rtol).rank < ds.dim();
  out.blocks = {dir};
  return out;
}

NatGradDirection natgrad_diagonal_logistic(const ClassificationDataset& ds,
                                           const ModelParams& params,
                                           const NatGradOptions& options) {
  if (params.spec.kind != ModelKind::diagonal)
    throw StructuralError("natgrad_diagonal_logistic requires a diagonal model");
  params.validate();
  const Eigen::VectorXd beta = collapse(params).vector();
  check_inputs(ds, beta);
  const JacobianView jac = jacobian(params);
  const int depth = params.spec.depth;
  const Eigen::Index dim = ds.dim();

  NatGradDirection out;

  if (options.population) {
    const PopulationSystem sys = population_system(ds, beta, *options.population);
    const double mult = std::exp(sys.log_mult);
    if (options.diagonal_solve == DiagonalSolve::joint) {
      Eigen::MatrixXd M(dim, dim * depth);
      for (int l = 0; l < depth; ++l)
        M.middleCols(l * dim, dim) = sys.matrix * jac.factors[l].asDiagonal();
      const Eigen::VectorXd v = min_norm_solve(M, sys.rhs, options.pinv_rtol);
      out.residual = relative_residual(M, v, sys.rhs);
      for (int l = 0; l < depth; ++l) out.blocks.push_back(mult * v.segment(l * dim, dim));
    } else {
      for (int l = 0; l < depth; ++l) {
        const Eigen::MatrixXd M = sys.matrix * jac.factors[l].asDiagonal();
        const Eigen::VectorXd b = sys.rhs / depth;
        const Eigen::VectorXd v = min_norm_solve(M, b, options.pinv_rtol);
        out.residual = std::max(out.residual, relative_residual(M, v, b));
        out.blocks.push_back(mult * v);
      }
    }
  } else {
    const SqrtSystem sys = sqrt_system(ds, beta);
    const Eigen::MatrixXd signed_x = ds.signed_design();
    const double n = static_cast<double>(ds.size());
    if (options.diagonal_solve == DiagonalSolve::joint) {
      // the solved system lives in parameter space: J^T F J v = -J^T grad
      SqrtSystem joint = sys;
      joint.H.resize(sys.H.rows(), dim * depth);
      Eigen::MatrixXd design(sys.H.rows(), dim * depth);
      for (int l = 0; l < depth; ++l) {
        joint.H.middleCols(l * dim, dim) = sys.H * jac.factors[l].asDiagonal();
        design.middleCols(l * dim, dim) = signed_x * jac.factors[l].asDiagonal();
      }
      const Eigen::VectorXd v = graded_solve(design, sys.log_h, sys.target, options.pinv_rtol);
      for (int l = 0; l < depth; ++l) out.blocks.push_back(n * v.segment(l * dim, dim));
      out.residual = normal_residual(joint, v);
    } else {
      SqrtSystem layer_sys = sys;
      layer_sys.z /= depth;
      for (int l = 0; l < depth; ++l) {
        layer_sys.H = sys.H * jac.factors[l].asDiagonal();
        const Eigen::VectorXd v =
            graded_solve(signed_x * jac.factors[l].asDiagonal(), sys.log_h,
                         sys.target / depth, options.pinv_rtol);
        out.residual = std::max(out.residual, normal_residual(layer_sys, v));
        out.blocks.push_back(n * v);
      }
    }
  }
  check_residual(out.residual, options.residual_tol, "natgrad_diagonal_logistic");
  for (const auto& b : out.blocks) require_finite(b, "natural-gradient direction");
  for (const auto& f : jac.factors)
    if (f.cwiseAbs().minCoeff() == 0.0) out.rank_deficient = true;
  return out;
}

NatGradDirection natgrad_matfac(const ModelParams& params, const Eigen::MatrixXd& grad_beta,
                                const NatGradOptions& options) {
  if (params.spec.kind != ModelKind::matfac)
    throw StructuralError("natgrad_matfac requires a matfac model");
  const JacobianView jac = jacobian(params);
  const int dim = params.spec.dim;
  if (grad_beta.rows() != dim || grad_beta.cols() != dim)
    throw StructuralError("gradient shape does not match model dim");
  require_finite(grad_beta, "hypothesis gradient");

  const int depth = params.spec.depth;
  NatGradDirection out;
  for (int l = 0; l < depth; ++l) {
    for (const Eigen::MatrixXd* factor : {&jac.left[l], &jac.right[l]}) {
      const SpectrumInfo info = spectrum(*factor, options.pinv_rtol);
      out.condition = std::max(out.condition, info.condition());
      if (info.rank < dim) out.rank_deficient = true;
    }
    out.blocks.push_back(pinv(jac.left[l], options.pinv_rtol) * grad_beta *
                         pinv(jac.right[l], options.pinv_rtol) / depth);
  }
  out.residual = relative_residual(Eigen::MatrixXd::Identity(dim, dim), jac.apply_all(out.blocks),
                                   grad_beta);
  return out;
}

NatGradDirection natgrad_matfac_joint(const ModelParams& params, const Eigen::MatrixXd& grad_beta,
                                      const MatfacJointOptions& options) {
  if (params.spec.kind != ModelKind::matfac)
    throw StructuralError("natgrad_matfac_joint requires a matfac model");
  const JacobianView jac = jacobian(params);
  const int dim = params.spec.dim;
  const int depth = params.spec.depth;
  if (grad_beta.rows() != dim || grad_beta.cols() != dim)
    throw StructuralError("gradient shape does not match model dim");
  require_finite(grad_beta, "hypothesis gradient");

  NatGradDirection out;
  const double g_norm = grad_beta.norm();
  if (g_norm == 0.0) {
    out.blocks.assign(depth, Eigen::MatrixXd::Zero(dim, dim));
    out.multiplier = Eigen::MatrixXd::Zero(dim, dim);
    return out;
  }

  std::vector<Eigen::MatrixXd> P(depth), Q(depth);
  Eigen::MatrixXd precond = Eigen::MatrixXd::Zero(dim, dim);
  for (int l = 0; l < depth; ++l) {
    P[l] = jac.left[l] * jac.left[l].transpose();
    Q[l] = jac.right[l].transpose() * jac.right[l];
    precond += P[l].diagonal() * Q[l].diagonal().transpose();
  }
  const double floor = precond.maxCoeff() * 1e-300;
  precond = precond.unaryExpr([floor](double v) { return v > floor ? 1.0 / v : 0.0; });

  auto apply = [&](const Eigen::MatrixXd& Z) {
    Eigen::MatrixXd out_m = P[0] * Z * Q[0];
    for (int l = 1; l < depth; ++l) out_m += P[l] * Z * Q[l];
    return out_m;
  };

  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(dim, dim);
  if (options.warm_start && options.warm_start->rows() == dim &&
      options.warm_start->cols() == dim && options.warm_start->allFinite())
    Z = *options.warm_start;

  const int max_it = options.max_iterations > 0 ? options.max_iterations : 20 * dim * dim;
  Eigen::MatrixXd R = grad_beta - apply(Z);
  Eigen::MatrixXd S = precond.cwiseProduct(R);
  Eigen::MatrixXd Pdir = S;
  double rs = (R.array() * S.array()).sum();
  int it = 0;
  while (R.norm() > options.cg_tol * g_norm && it < max_it) {
    const Eigen::MatrixXd KP = apply(Pdir);
    const double denom = (Pdir.array() * KP.array()).sum();
    if (!(denom > 0.0)) break;
    const double alpha = rs / denom;
    Z += alpha * Pdir;
    R -= alpha * KP;
    S = precond.cwiseProduct(R);
    const double rs_next = (R.array() * S.array()).sum();
    Pdir = S + (rs_next / rs) * Pdir;
    rs = rs_next;
    ++it;
  }

  out.iterations = it;
  out.multiplier = Z;
  for (int l = 0; l < depth; ++l)
    out.blocks.push_back(jac.left[l].transpose() * Z * jac.right[l].transpose());
  out.residual = (jac.apply_all(out.blocks) - grad_beta).norm() / g_norm;
  require_finite(out.multiplier, "matfac multiplier");
  check_residual(out.residual, options.residual_tol, "natgrad_matfac_joint");
  return out;
}

}  // namespace ngflow
