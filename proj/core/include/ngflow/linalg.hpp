#pragma once

#include <Eigen/Dense>

namespace ngflow {

inline constexpr double kDefaultPinvRtol = 1e-12;

/// SVD-based Moore-Penrose pseudoinverse. Singular values below
/// rtol * sigma_max are treated as zero.
Eigen::MatrixXd pinv(const Eigen::MatrixXd& m, double rtol = kDefaultPinvRtol);

/// Minimum-norm least-squares solution of m x = b (x = pinv(m) b) without
/// forming the pseudoinverse explicitly.
Eigen::MatrixXd min_norm_solve(const Eigen::MatrixXd& m, const Eigen::MatrixXd& b,
                               double rtol = kDefaultPinvRtol);

struct SpectrumInfo {
  double sigma_max = 0.0;
  double sigma_min = 0.0;  // smallest singular value, including zeros
  Eigen::Index rank = 0;   // count above rtol * sigma_max
  double condition() const;
};

SpectrumInfo spectrum(const Eigen::MatrixXd& m, double rtol = kDefaultPinvRtol);

Eigen::VectorXd singular_values(const Eigen::MatrixXd& m);

/// Relative residual |m x - b| / |b| (absolute when b == 0).
double relative_residual(const Eigen::MatrixXd& m, const Eigen::MatrixXd& x,
                         const Eigen::MatrixXd& b);

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace ngflow
