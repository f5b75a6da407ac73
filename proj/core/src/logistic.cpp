#include "ngflow/logistic.hpp"

#include <cmath>

#include "ngflow/errors.hpp"

namespace ngflow {

namespace stable {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double log_sigmoid(double x) { return -softplus(-x); }

double sigmoid_variance(double x) {
  const double e = std::exp(-std::abs(x));
  const double d = 1.0 + e;
  return e / (d * d);
}

}  // namespace stable

void ClassificationDataset::validate() const {
  if (X.rows() == 0 || X.cols() == 0) throw StructuralError("empty design matrix");
  if (y.size() != X.rows()) throw StructuralError("label count does not match design rows");
  for (Eigen::Index n = 0; n < y.size(); ++n) {
    if (y(n) != 1.0 && y(n) != -1.0) throw ArgumentError("labels must be exactly +1 or -1");
    if (X.row(n).cwiseAbs().maxCoeff() == 0.0)
      throw ArgumentError("design row " + std::to_string(n) + " is zero");
  }
  if (!X.allFinite()) throw NumericError("design matrix has non-finite entries");
}

Eigen::MatrixXd ClassificationDataset::signed_design() const { return y.asDiagonal() * X; }

ClassificationDataset ClassificationDataset::transformed(const Eigen::MatrixXd& A) const {
  if (A.rows() != dim() || A.cols() != dim()) throw StructuralError("transform must be D x D");
  return {X * A.transpose(), y};
}

LogitState LogitState::from(const ClassificationDataset& ds, const Eigen::VectorXd& beta) {
  if (beta.size() != ds.dim()) throw StructuralError("beta length does not match dataset dim");
  return from_logits(ds.X * beta, ds.y);
}

LogitState LogitState::from_logits(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
  if (s.size() != y.size()) throw StructuralError("logit and label lengths differ");
  LogitState st;
  st.s = s;
  st.u = y.cwiseProduct(s);
  st.u_max = st.u.size() ? st.u.maxCoeff() : 0.0;
  return st;
}

Eigen::MatrixXd FisherSystem::true_fisher() const { return std::exp(scale_log) * matrix; }

double loss(const ClassificationDataset& ds, const Eigen::VectorXd& beta) {
  const LogitState st = LogitState::from(ds, beta);
  double total = 0.0;
  for (Eigen::Index n = 0; n < st.u.size(); ++n) total += stable::softplus(-st.u(n));
  return total;
}

Eigen::VectorXd grad_logits(const LogitState& state, const Eigen::VectorXd& y) {
  Eigen::VectorXd g(state.s.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = -y(i) * stable::sigmoid(-y(i) * state.s(i));
  return g;
}

Eigen::VectorXd fisher_logits(const LogitState& state) {
  return state.s.unaryExpr([](double v) { return stable::sigmoid_variance(v); });
}

Eigen::VectorXd grad_beta(const ClassificationDataset& ds, const Eigen::VectorXd& beta) {
  const LogitState st = LogitState::from(ds, beta);
  const Eigen::VectorXd weights = st.u.unaryExpr([](double v) { return stable::sigmoid(-v); });
  return -(ds.signed_design().transpose() * weights);
}

FisherSystem fisher_beta(const ClassificationDataset& ds, const Eigen::VectorXd& beta,
                         const ClassificationDataset* population) {
  const ClassificationDataset& data = population ? *population : ds;
  const LogitState st = LogitState::from(data, beta);
  // exp(-u + u_max) phi(u)^2 == exp(u_max) phi(u) phi(-u), evaluated from |u|
  // so misclassified points cannot overflow the exponent.
  Eigen::VectorXd w(st.u.size());
  for (Eigen::Index n = 0; n < w.size(); ++n) {
    const double a = std::abs(st.u(n));
    const double d = 1.0 + std::exp(-a);
    w(n) = std::exp(st.u_max - a) / (d * d);
  }
  const Eigen::MatrixXd Xs = data.signed_design();
  FisherSystem sys;
  sys.matrix = Xs.transpose() * w.asDiagonal() * Xs / static_cast<double>(data.size());
  sys.matrix = 0.5 * (sys.matrix + sys.matrix.transpose());
  sys.scale_log = -st.u_max;
  sys.weighting = population ? FisherWeighting::population : FisherWeighting::sample;
  return sys;
}

}  // namespace ngflow
