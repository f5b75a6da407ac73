#include "oracles.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <boost/multiprecision/mpfr.hpp>
#include <unsupported/Eigen/KroneckerProduct>

namespace ngflow::oracle {

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

Eigen::MatrixXd well_conditioned(Eigen::Index n, std::mt19937_64& rng) {
  const Eigen::HouseholderQR<Eigen::MatrixXd> qa(gaussian_matrix(n, n, rng));
  const Eigen::HouseholderQR<Eigen::MatrixXd> qb(gaussian_matrix(n, n, rng));
  std::uniform_real_distribution<double> unif(0.5, 2.0);
  Eigen::VectorXd s(n);
  for (Eigen::Index i = 0; i < n; ++i) s(i) = unif(rng);
  const Eigen::MatrixXd Q1 = qa.householderQ();
  const Eigen::MatrixXd Q2 = qb.householderQ();
  return Q1 * s.asDiagonal() * Q2.transpose();
}

ClassificationDataset separable_dataset(Eigen::Index n, Eigen::Index d, std::mt19937_64& rng) {
  ClassificationDataset ds;
  ds.X = gaussian_matrix(n, d, rng);
  const Eigen::VectorXd w = gaussian_matrix(d, 1, rng);
  ds.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = ds.X.row(i).dot(w);
    if (std::abs(m) < 1e-3) {
      ds.X.row(i) += (1e-2 - m) / w.squaredNorm() * w.transpose();
      m = ds.X.row(i).dot(w);
    }
    ds.y(i) = m > 0 ? 1.0 : -1.0;
  }
  return ds;
}

Eigen::MatrixXd fd_jacobian(const ModelParams& params, double h) {
  const Eigen::MatrixXd base = collapse(params).values;
  Eigen::MatrixXd J(base.size(), params.size());
  Eigen::Index col = 0;
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    for (Eigen::Index k = 0; k < params.layers[l].size(); ++k, ++col) {
      ModelParams plus = params, minus = params;
      plus.layers[l].data()[k] += h;
      minus.layers[l].data()[k] -= h;
      const Eigen::MatrixXd diff = (collapse(plus).values - collapse(minus).values) / (2 * h);
      J.col(col) = Eigen::Map<const Eigen::VectorXd>(diff.data(), diff.size());
    }
  return J;
}

Eigen::MatrixXd cod_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  cod.setThreshold(1e-13);
  return cod.solve(b);
}

Eigen::MatrixXd kronecker_jacobian(const ModelParams& params) {
  const int D = params.spec.dim;
  const int L = params.spec.depth;
  Eigen::MatrixXd J(D * D, L * D * D);
  for (int l = 0; l < L; ++l) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(D, D);
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(D, D);
    for (int k = 0; k < l; ++k) A = A * params.layers[k];
    for (int k = l + 1; k < L; ++k) B = B * params.layers[k];
    J.middleCols(l * D * D, D * D) = Eigen::kroneckerProduct(B.transpose(), A);
  }
  return J;
}

Eigen::MatrixXd diagonal_jacobian(const ModelParams& params) {
  const int D = params.spec.dim;
  const int L = params.spec.depth;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(D, L * D);
  for (int l = 0; l < L; ++l)
    for (int d = 0; d < D; ++d) {
      double f = 1.0;
      for (int k = 0; k < L; ++k)
        if (k != l) f *= params.layers[k](d, 0);
      J(d, l * D + d) = f;
    }
  return J;
}

Eigen::VectorXd gram_natgrad(const Eigen::MatrixXd& J, const ClassificationDataset& ds,
                             const Eigen::VectorXd& beta) {
  const Eigen::MatrixXd G = J.transpose() * naive_fisher(ds, beta) * J;
  return cod_solve(G, -J.transpose() * naive_grad(ds, beta));
}

Eigen::VectorXd sqrt_natgrad(const Eigen::MatrixXd& J, const ClassificationDataset& ds,
                             const Eigen::VectorXd& beta) {
  const double N = static_cast<double>(ds.size());
  const Eigen::VectorXd u = ds.signed_design() * beta;
  Eigen::VectorXd rw(u.size()), r(u.size());
  for (Eigen::Index n = 0; n < u.size(); ++n) {
    const double p = 1.0 / (1.0 + std::exp(-u(n)));
    rw(n) = std::sqrt(p * (1.0 - p) / N);
    r(n) = std::sqrt(N) * std::sqrt((1.0 - p) / p);
  }
  const Eigen::MatrixXd M = rw.asDiagonal() * ds.signed_design() * J;
  return cod_solve(M, r);
}

namespace {

using mpreal = boost::multiprecision::mpfr_float;

mpreal mp_sigmoid(const mpreal& x) { return 1 / (1 + exp(-x)); }

}  // namespace

Eigen::VectorXd mp_natgrad_direct(const ClassificationDataset& ds, const Eigen::VectorXd& beta) {
  const Eigen::Index N = ds.size();
  const Eigen::Index D = ds.dim();
  if (N < D) throw std::invalid_argument("mp_natgrad_direct needs N >= D");
  // Fisher weights span about e^{-(u_max - u_min)}; carry that many decimal
  // digits twice over plus a working margin
  const Eigen::VectorXd u_double = ds.signed_design() * beta;
  const double spread = u_double.maxCoeff() - u_double.minCoeff();
  const unsigned previous = mpreal::default_precision();
  mpreal::default_precision(100 + static_cast<unsigned>(std::ceil(2.0 * spread / std::log(10.0))));
  std::vector<std::vector<mpreal>> F(D, std::vector<mpreal>(D, mpreal(0)));
  std::vector<mpreal> rhs(D, mpreal(0));
  for (Eigen::Index n = 0; n < N; ++n) {
    mpreal u = 0;
    std::vector<mpreal> xs(D);
    for (Eigen::Index d = 0; d < D; ++d) {
      xs[d] = mpreal(ds.y(n)) * mpreal(ds.X(n, d));
      u += xs[d] * mpreal(beta(d));
    }
    const mpreal p = mp_sigmoid(u);
    const mpreal q = mp_sigmoid(-u);
    for (Eigen::Index i = 0; i < D; ++i) {
      rhs[i] += xs[i] * q;  // -grad of the summed loss
      for (Eigen::Index j = 0; j < D; ++j) F[i][j] += xs[i] * xs[j] * p * q / mpreal(N);
    }
  }
  // Gaussian elimination with partial pivoting
  for (Eigen::Index c = 0; c < D; ++c) {
    Eigen::Index piv = c;
    for (Eigen::Index r = c + 1; r < D; ++r)
      if (abs(F[r][c]) > abs(F[piv][c])) piv = r;
    std::swap(F[c], F[piv]);
    std::swap(rhs[c], rhs[piv]);
    for (Eigen::Index r = c + 1; r < D; ++r) {
      const mpreal f = F[r][c] / F[c][c];
      for (Eigen::Index k = c; k < D; ++k) F[r][k] -= f * F[c][k];
      rhs[r] -= f * rhs[c];
    }
  }
  std::vector<mpreal> v(D);
  for (Eigen::Index r = D - 1; r >= 0; --r) {
    mpreal s = rhs[r];
    for (Eigen::Index k = r + 1; k < D; ++k) s -= F[r][k] * v[k];
    v[r] = s / F[r][r];
  }
  Eigen::VectorXd out(D);
  for (Eigen::Index d = 0; d < D; ++d) out(d) = static_cast<double>(v[d]);
  mpreal::default_precision(previous);
  return out;
}

Eigen::MatrixXd naive_fisher(const ClassificationDataset& ds, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd s = ds.X * beta;
  Eigen::VectorXd w(s.size());
  for (Eigen::Index n = 0; n < s.size(); ++n) {
    const double p = 1.0 / (1.0 + std::exp(-s(n)));
    w(n) = p * (1.0 - p);
  }
  return ds.X.transpose() * w.asDiagonal() * ds.X / static_cast<double>(ds.size());
}

Eigen::VectorXd naive_grad(const ClassificationDataset& ds, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd s = ds.X * beta;
  Eigen::VectorXd r(s.size());
  for (Eigen::Index n = 0; n < s.size(); ++n) {
    const double p = 1.0 / (1.0 + std::exp(-s(n)));
    r(n) = p - (ds.y(n) + 1.0) / 2.0;
  }
  return ds.X.transpose() * r;
}

Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iter) {
  const Eigen::Index n = a.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(n, false);
  const double tol = 1e-12 * std::max(1.0, a.norm() * b.norm());
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd w = a.transpose() * (b - a * x);
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[j] && w(j) > tol && (best < 0 || w(j) > w(best))) best = j;
    if (best < 0) break;
    passive[best] = true;
    while (true) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j]) idx.push_back(j);
      Eigen::MatrixXd ap(a.rows(), idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) ap.col(k) = a.col(idx[k]);
      const Eigen::VectorXd zp = cod_solve(ap, b);
      Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
      for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zp(k);
      bool feasible = true;
      for (auto j : idx)
        if (z(j) <= 0) feasible = false;
      if (feasible) {
        x = z;
        break;
      }
      double alpha = 1.0;
      for (auto j : idx)
        if (z(j) <= 0) alpha = std::min(alpha, x(j) / (x(j) - z(j)));
      x += alpha * (z - x);
      for (auto j : idx)
        if (x(j) <= 1e-15) {
          passive[j] = false;
          x(j) = 0.0;
        }
    }
  }
  return x;
}

Eigen::VectorXd l2_margin_by_enumeration(const Eigen::MatrixXd& Xs) {
  const Eigen::Index N = Xs.rows();
  if (N > 12) throw std::invalid_argument("enumeration oracle limited to N <= 12");
  double best_norm = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best;
  for (std::uint32_t mask = 1; mask < (1u << N); ++mask) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index n = 0; n < N; ++n)
      if (mask & (1u << n)) rows.push_back(n);
    if (static_cast<Eigen::Index>(rows.size()) > Xs.cols()) continue;
    Eigen::MatrixXd A(rows.size(), Xs.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) A.row(k) = Xs.row(rows[k]);
    const Eigen::MatrixXd gram = A * A.transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd alpha = lu.solve(Eigen::VectorXd::Ones(rows.size()));
    if (alpha.minCoeff() < 0) continue;
    const Eigen::VectorXd beta = A.transpose() * alpha;
    if ((Xs * beta).minCoeff() < 1.0 - 1e-12) continue;
    if (beta.norm() < best_norm) {
      best_norm = beta.norm();
      best = beta;
    }
  }
  if (!std::isfinite(best_norm)) throw std::runtime_error("no KKT point: not separable");
  return best;
}

Eigen::VectorXd l2_margin_by_nnls(const Eigen::MatrixXd& Xs) {
  const Eigen::Index N = Xs.rows();
  const Eigen::Index D = Xs.cols();
  Eigen::MatrixXd M(D + 1, N);
  M.topRows(D) = Xs.transpose();
  M.row(D).setOnes();
  Eigen::VectorXd e = Eigen::VectorXd::Zero(D + 1);
  e(D) = 1.0;
  const Eigen::VectorXd r = e - M * nnls(M, e, 2000);
  if (!(r(D) > 1e-14)) throw std::runtime_error("nnls oracle: data are not separable");
  return -r.head(D) / r(D);
}

double best_margin_on_circle(const Eigen::MatrixXd& Xs, double p, int samples) {
  const double pi = std::acos(-1.0);
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < samples; ++k) {
    const double a = 2.0 * pi * k / samples;
    const Eigen::Vector2d d(std::cos(a), std::sin(a));
    const double norm = std::pow(std::pow(std::abs(d(0)), p) + std::pow(std::abs(d(1)), p), 1.0 / p);
    best = std::max(best, (Xs * d).minCoeff() / norm);
  }
  return best;
}

}  // namespace ngflow::oracle
