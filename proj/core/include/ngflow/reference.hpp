#pragma once

// Independent oracles: least squares, max-margin separators and the closed
// form logit trajectory of natural gradient flow.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ngflow/linalg.hpp"
#include "ngflow/logistic.hpp"

namespace ngflow {

struct OlsSolution {
  Eigen::VectorXd beta;
  bool rank_deficient = false;
};

/// pinv(X) y: the least-squares solution for N >= D, the minimum-norm
/// interpolant for N < D.
OlsSolution ols(const ClassificationDataset& ds, double rtol = kDefaultPinvRtol);

struct MarginSolution {
  Eigen::VectorXd beta;
  /// Geometric margin min_n(y_n x_n^T beta) / |beta|_p.
  double margin = 0.0;
  /// Rows with y_n x_n^T beta within 1e-6 of 1.
  std::vector<Eigen::Index> active_set;
  /// Dual multipliers (l2 only; empty otherwise).
  Eigen::VectorXd dual;
};

struct MarginOptions {
  double feasibility_tol = 1e-10;
  int max_sweeps = 200000;
  /// Dual norm beyond which the data are declared non-separable.
  double divergence_bound = 1e12;
};

/// argmin |beta|_2 s.t. y_n x_n^T beta >= 1. Hildreth's dual coordinate
/// ascent, finished by an exact solve on the identified active set.
MarginSolution max_margin_l2(const ClassificationDataset& ds, const MarginOptions& options = {});

struct LpMarginOptions {
  /// Vertex enumeration budget for p = 1.
  std::uint64_t max_vertices = 5'000'000;
  /// Grid resolution per angle for p != 1 (D <= 3).
  int grid = 4096;
};

/// argmin |beta|_p s.t. y_n x_n^T beta >= 1 for p in (0, 2].
///
/// p = 1 is an exact LP solved by enumerating the vertices cut out by the
/// margin and coordinate hyperplanes; ties go to the lexicographically
/// smallest vertex. p = 2 delegates to max_margin_l2. Any other p is
/// non-convex and handled by a heuristic: a dense grid over directions
/// followed by coordinate descent, limited to D <= 3.
MarginSolution max_margin_lp(const ClassificationDataset& ds, double p,
                             const LpMarginOptions& options = {});

/// log(e^{t+c} - 1): the logit of a single correctly labelled point under
/// natural gradient flow on the mean logistic loss.
double analytic_ngf_logits(double t, double c);

}  // namespace ngflow
