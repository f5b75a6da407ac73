#include "ngflow/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ngflow/errors.hpp"

namespace ngflow {

namespace {

constexpr double kActiveTol = 1e-6;
constexpr double kFeasibleTol = 1e-8;

double lp_norm(const Eigen::VectorXd& v, double p) {
  if (p == 1.0) return v.lpNorm<1>();
  if (p == 2.0) return v.norm();
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v(i)), p);
  return std::pow(s, 1.0 / p);
}

MarginSolution finish(const Eigen::MatrixXd& Xs, Eigen::VectorXd beta, double p) {
  MarginSolution sol;
  const Eigen::VectorXd u = Xs * beta;
  for (Eigen::Index n = 0; n < u.size(); ++n)
    if (std::abs(u(n) - 1.0) <= kActiveTol) sol.active_set.push_back(n);
  const double norm = lp_norm(beta, p);
  sol.margin = norm > 0.0 ? u.minCoeff() / norm : 0.0;
  sol.beta = std::move(beta);
  return sol;
}

// Exact KKT solution on a candidate support: beta = Xa^T alpha_a with
// Xa Xa^T alpha_a = 1. Accepted only if it is primal and dual feasible.
bool polish_l2(const Eigen::MatrixXd& Xs, const std::vector<Eigen::Index>& support,
               Eigen::VectorXd& beta, Eigen::VectorXd& dual) {
  if (support.empty()) return false;
  Eigen::MatrixXd Xa(support.size(), Xs.cols());
  for (std::size_t k = 0; k < support.size(); ++k) Xa.row(k) = Xs.row(support[k]);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(Xa.rows());
  const Eigen::VectorXd alpha = min_norm_solve(Xa * Xa.transpose(), ones);
  if (alpha.minCoeff() < -1e-12 * std::max(1.0, alpha.cwiseAbs().maxCoeff())) return false;
  const Eigen::VectorXd candidate = Xa.transpose() * alpha;
  if ((Xa * candidate - ones).cwiseAbs().maxCoeff() > 1e-10) return false;
  if ((Xs * candidate).minCoeff() < 1.0 - 1e-10) return false;
  beta = candidate;
  dual = Eigen::VectorXd::Zero(Xs.rows());
  for (std::size_t k = 0; k < support.size(); ++k) dual(support[k]) = std::max(alpha(k), 0.0);
  return true;
}

MarginSolution lp_vertex_search(const Eigen::MatrixXd& Xs, const LpMarginOptions& options) {
  const Eigen::Index N = Xs.rows();
  const Eigen::Index D = Xs.cols();
  const Eigen::Index M = N + D;

  // C(M, D) without overflow
  double count = 1.0;
  for (Eigen::Index k = 0; k < D; ++k) count = count * static_cast<double>(M - k) / (k + 1);
  if (count > static_cast<double>(options.max_vertices))
    throw UnsupportedRegime("l1 vertex enumeration exceeds its budget (" +
                            std::to_string(static_cast<long long>(count)) + " subsets)");

  // Rows 0..N-1: margin hyperplanes x~_n beta = 1; rows N..N+D-1: beta_d = 0.
  Eigen::MatrixXd rows(M, D);
  Eigen::VectorXd rhs(M);
  rows.topRows(N) = Xs;
  rhs.head(N).setOnes();
  rows.bottomRows(D).setIdentity();
  rhs.tail(D).setZero();

  std::vector<Eigen::Index> idx(D);
  std::iota(idx.begin(), idx.end(), 0);
  bool found = false;
  double best_norm = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best;
  Eigen::MatrixXd A(D, D);
  Eigen::VectorXd b(D);

  auto lex_less = [](const Eigen::VectorXd& a, const Eigen::VectorXd& c) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (std::abs(a(i) - c(i)) <= 1e-12 * (1.0 + std::abs(c(i)))) continue;
      return a(i) < c(i);
    }
    return false;
  };

  while (true) {
    for (Eigen::Index k = 0; k < D; ++k) {
      A.row(k) = rows.row(idx[k]);
      b(k) = rhs(idx[k]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.isInvertible()) {
      const Eigen::VectorXd v = lu.solve(b);
      if (v.allFinite() && (Xs * v).minCoeff() >= 1.0 - kFeasibleTol) {
        const double norm = v.lpNorm<1>();
        const double tie = 1e-9 * (1.0 + best_norm);
        if (!found || norm < best_norm - tie ||
            (norm <= best_norm + tie && lex_less(v, best))) {
          best_norm = std::min(norm, best_norm);
          best = v;
          found = true;
        }
      }
    }
    // next combination of D indices out of M
    Eigen::Index k = D - 1;
    while (k >= 0 && idx[k] == M - D + k) --k;
    if (k < 0) break;
    ++idx[k];
    for (Eigen::Index j = k + 1; j < D; ++j) idx[j] = idx[j - 1] + 1;
  }
  if (!found) throw InfeasibleError("no feasible vertex: data are not linearly separable");
  return finish(Xs, best, 1.0);
}

// Scale-free objective |d|_p / min_n(x~_n d); infinite when d does not
// separate the data.
double direction_cost(const Eigen::MatrixXd& Xs, const Eigen::VectorXd& d, double p) {
  const double m = (Xs * d).minCoeff();
  if (!(m > 0.0)) return std::numeric_limits<double>::infinity();
  return lp_norm(d, p) / m;
}

MarginSolution lp_grid_search(const Eigen::MatrixXd& Xs, double p, const LpMarginOptions& options) {
  const Eigen::Index D = Xs.cols();
  if (D > 3)
    throw UnsupportedRegime("l_p margin with p != 1, 2 is only supported for D <= 3");

  double best_cost = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best;
  auto consider = [&](const Eigen::VectorXd& d) {
    const double c = direction_cost(Xs, d, p);
    if (c < best_cost) {
      best_cost = c;
      best = d;
    }
  };

  for (Eigen::Index i = 0; i < D; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(D);
    e(i) = 1.0;
    consider(e);
    consider(-e);
  }
  const int g = std::max(options.grid, 8);
  const double pi = std::acos(-1.0);
  if (D == 1) {
    // axes already cover both directions
  } else if (D == 2) {
    for (int k = 0; k < g; ++k) {
      const double a = 2.0 * pi * k / g;
      consider(Eigen::Vector2d(std::cos(a), std::sin(a)));
    }
  } else {
    // coordinate planes first: sparse optima lie there exactly
    for (Eigen::Index i = 0; i < 3; ++i)
      for (int k = 0; k < g; ++k) {
        const double a = 2.0 * pi * k / g;
        Eigen::VectorXd d = Eigen::VectorXd::Zero(3);
        d((i + 1) % 3) = std::cos(a);
        d((i + 2) % 3) = std::sin(a);
        consider(d);
      }
    const int g3 = std::max(8, static_cast<int>(std::sqrt(static_cast<double>(g) * 64.0)));
    for (int a = 1; a < g3; ++a) {
      const double theta = pi * a / g3;
      for (int k = 0; k < 2 * g3; ++k) {
        const double phi = pi * k / g3;
        consider(Eigen::Vector3d(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                                 std::cos(theta)));
      }
    }
  }
  if (!std::isfinite(best_cost))
    throw InfeasibleError("no separating direction found: data are not linearly separable");

  // coordinate descent with shrinking steps, trying exact zeros as well
  double h = 2.0 * pi / g * best.norm();
  while (h > 1e-13 * best.norm()) {
    bool improved = false;
    for (Eigen::Index i = 0; i < D; ++i) {
      for (double cand : {best(i) + h, best(i) - h, 0.0}) {
        Eigen::VectorXd d = best;
        d(i) = cand;
        const double c = direction_cost(Xs, d, p);
        if (c < best_cost - 1e-15 * best_cost) {
          best_cost = c;
          best = d;
          improved = true;
        }
      }
    }
    if (!improved) h *= 0.5;
  }
  const Eigen::VectorXd beta = best / (Xs * best).minCoeff();
  return finish(Xs, beta, p);
}

}  // namespace

OlsSolution ols(const ClassificationDataset& ds, double rtol) {
  ds.validate();
  OlsSolution out;
  out.beta = min_norm_solve(ds.X, ds.y, rtol);
  out.rank_deficient = spectrum(ds.X, rtol).rank < std::min(ds.size(), ds.dim());
  return out;
}

MarginSolution max_margin_l2(const ClassificationDataset& ds, const MarginOptions& options) {
  ds.validate();
  const Eigen::MatrixXd Xs = ds.signed_design();
  const Eigen::Index N = Xs.rows();
  const Eigen::VectorXd row_sq = Xs.rowwise().squaredNorm();

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(N);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(Xs.cols());
  bool converged = false;
  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    double change = 0.0;
    for (Eigen::Index n = 0; n < N; ++n) {
      const double next = std::max(0.0, alpha(n) + (1.0 - Xs.row(n).dot(beta)) / row_sq(n));
      const double delta = next - alpha(n);
      if (delta != 0.0) {
        beta += delta * Xs.row(n).transpose();
        alpha(n) = next;
        change = std::max(change, std::abs(delta) * std::sqrt(row_sq(n)));
      }
    }
    if (alpha.norm() > options.divergence_bound)
      throw InfeasibleError("max_margin_l2: dual diverged; data are not linearly separable");
    // recompute beta from alpha periodically to shed accumulated rounding
    if (sweep % 64 == 63) beta = Xs.transpose() * alpha;
    const double violation = 1.0 - (Xs * beta).minCoeff();
    if (violation <= options.feasibility_tol && change <= options.feasibility_tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw InfeasibleError("max_margin_l2: iteration budget exhausted before feasibility");

  std::vector<Eigen::Index> support;
  const double amax = alpha.maxCoeff();
  for (Eigen::Index n = 0; n < N; ++n)
    if (alpha(n) > 1e-9 * amax) support.push_back(n);
  Eigen::VectorXd dual = alpha;
  polish_l2(Xs, support, beta, dual);

  MarginSolution sol = finish(Xs, beta, 2.0);
  sol.dual = dual;
  return sol;
}

MarginSolution max_margin_lp(const ClassificationDataset& ds, double p,
                             const LpMarginOptions& options) {
  ds.validate();
  if (!(p > 0.0 && p <= 2.0)) throw ArgumentError("max_margin_lp requires p in (0, 2]");
  if (p == 2.0) return max_margin_l2(ds);
  const Eigen::MatrixXd Xs = ds.signed_design();
  if (p == 1.0) return lp_vertex_search(Xs, options);
  return lp_grid_search(Xs, p, options);
}

double analytic_ngf_logits(double t, double c) {
  const double x = t + c;
  if (!(x > 0.0)) throw DomainError("analytic_ngf_logits requires t + c > 0");
  if (x > std::log(2.0)) return x + std::log1p(-std::exp(-x));
  return x + std::log(-std::expm1(-x));
}

}  // namespace ngflow
