#pragma once

// Exact natural-gradient directions for linear, diagonal and matrix-factored
// models.
//
// Sign conventions differ by objective and follow how each is consumed:
//  * logistic ops return the descent direction theta_dot = -F^+ grad L of the
//    summed loss, so a step is theta += eta * direction;
//  * matfac ops precondition a supplied hypothesis gradient G and return the
//    blocks V_l with J V = G, so a step is W_l -= eta * V_l.

#include <vector>

#include <Eigen/Dense>

#include "ngflow/linalg.hpp"
#include "ngflow/logistic.hpp"
#include "ngflow/model.hpp"

namespace ngflow {

inline constexpr double kDefaultResidualTol = 1e-8;

enum class DiagonalSolve {
  joint,      // minimum-norm over all layers at once
  per_layer,  // each layer solves F J_l v_l = grad / L on its own
};

struct NatGradOptions {
  double pinv_rtol = kDefaultPinvRtol;
  double residual_tol = kDefaultResidualTol;
  DiagonalSolve diagonal_solve = DiagonalSolve::joint;
  /// When set, the Fisher is averaged over this dataset instead of the
  /// training set (population Fisher).
  const ClassificationDataset* population = nullptr;
};

struct NatGradDirection {
  std::vector<Eigen::MatrixXd> blocks;
  /// Relative residual of the defining linear system after scale extraction
  /// (logistic) or of the hypothesis-space reconstruction (matfac).
  double residual = 0.0;
  /// Largest condition number among pseudo-inverted factors (matfac).
  double condition = 1.0;
  bool rank_deficient = false;
  int iterations = 0;
  /// Solution of the Kronecker-sum system (joint matfac solve); reusable as a
  /// warm start on the next step.
  Eigen::MatrixXd multiplier;
};

NatGradDirection natgrad_direct_logistic(const ClassificationDataset& ds,
                                         const Eigen::VectorXd& beta,
                                         const NatGradOptions& options = {});

NatGradDirection natgrad_diagonal_logistic(const ClassificationDataset& ds,
                                           const ModelParams& params,
                                           const NatGradOptions& options = {});

/// Factored per-layer preconditioning: V_l = (1/L) pinv(A_l) G pinv(B_l).
/// Never throws on rank deficiency; `condition` and `rank_deficient` report it.
NatGradDirection natgrad_matfac(const ModelParams& params, const Eigen::MatrixXd& grad_beta,
                                const NatGradOptions& options = {});

struct MatfacJointOptions {
  double residual_tol = kDefaultResidualTol;
  double cg_tol = 1e-12;
  int max_iterations = 0;  // 0 = 20 * D^2
  const Eigen::MatrixXd* warm_start = nullptr;
};

/// Moore-Penrose natural gradient of the full factorization: the
/// minimum-norm V with sum_l A_l V_l B_l = G. Solved matrix-free by
/// preconditioned conjugate gradients on sum_l A_l A_l^T Z B_l^T B_l = G,
/// then V_l = A_l^T Z B_l^T. Throws SolverError when the reconstruction
/// residual exceeds residual_tol.
NatGradDirection natgrad_matfac_joint(const ModelParams& params, const Eigen::MatrixXd& grad_beta,
                                      const MatfacJointOptions& options = {});

}  // namespace ngflow
