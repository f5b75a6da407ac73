#include "ngflow/linalg.hpp"

#include <cmath>
#include <limits>

#include "ngflow/errors.hpp"

namespace ngflow {

namespace {

Eigen::BDCSVD<Eigen::MatrixXd> thin_svd(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) throw NumericError("SVD of a matrix with non-finite entries");
  return Eigen::BDCSVD<Eigen::MatrixXd>(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

Eigen::VectorXd inverted_spectrum(const Eigen::VectorXd& sigma, double rtol) {
  const double cutoff = sigma.size() ? rtol * sigma(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > cutoff && sigma(i) > 0.0) inv(i) = 1.0 / sigma(i);
  return inv;
}

}  // namespace

Eigen::MatrixXd pinv(const Eigen::MatrixXd& m, double rtol) {
  if (m.size() == 0) return Eigen::MatrixXd::Zero(m.cols(), m.rows());
  const auto svd = thin_svd(m);
  const Eigen::VectorXd inv = inverted_spectrum(svd.singularValues(), rtol);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::MatrixXd min_norm_solve(const Eigen::MatrixXd& m, const Eigen::MatrixXd& b, double rtol) {
  if (m.rows() != b.rows()) throw StructuralError("min_norm_solve: row mismatch");
  const auto svd = thin_svd(m);
  const Eigen::VectorXd inv = inverted_spectrum(svd.singularValues(), rtol);
  return svd.matrixV() * (inv.asDiagonal() * (svd.matrixU().transpose() * b));
}

double SpectrumInfo::condition() const {
  if (sigma_min <= 0.0) return std::numeric_limits<double>::infinity();
  return sigma_max / sigma_min;
}

SpectrumInfo spectrum(const Eigen::MatrixXd& m, double rtol) {
  SpectrumInfo info;
  if (m.size() == 0) return info;
  const Eigen::VectorXd sigma = singular_values(m);
  info.sigma_max = sigma(0);
  // Thin SVD reports min(rows, cols) values; a non-square matrix is rank
  // deficient in the larger dimension by construction, which callers handle.
  info.sigma_min = sigma(sigma.size() - 1);
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > rtol * info.sigma_max && sigma(i) > 0.0) ++info.rank;
  return info;
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) throw NumericError("singular values of a non-finite matrix");
  return Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues();
}

double relative_residual(const Eigen::MatrixXd& m, const Eigen::MatrixXd& x,
                         const Eigen::MatrixXd& b) {
  const double r = (m * x - b).norm();
  const double scale = b.norm();
  return scale > 0.0 ? r / scale : r;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace ngflow
