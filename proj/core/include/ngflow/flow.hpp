#pragma once

// Explicit Euler discretizations of Euclidean and natural gradient flow, with
// trajectory recording and the metrics computed along a run.
//
// Pseudo-time is t = step * eta. The logistic objective is the mean loss by
// default, which makes the natural-gradient logit velocity exactly 1/phi(u)
// per training point.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ngflow/gaussian.hpp"
#include "ngflow/linalg.hpp"
#include "ngflow/logistic.hpp"
#include "ngflow/model.hpp"
#include "ngflow/natgrad.hpp"

namespace ngflow {

enum class Optimizer { egd, ngd };
enum class Objective { logistic, completion };
enum class LossReduction { mean, sum };
enum class MatfacSolver { joint, factored };

std::string_view to_string(Optimizer v);
std::string_view to_string(Objective v);
std::string_view to_string(FisherWeighting v);
std::string_view to_string(LossReduction v);
std::string_view to_string(MatfacSolver v);
std::string_view to_string(DiagonalSolve v);
Optimizer optimizer_from_string(std::string_view s);
Objective objective_from_string(std::string_view s);
FisherWeighting fisher_weighting_from_string(std::string_view s);
LossReduction loss_reduction_from_string(std::string_view s);
MatfacSolver matfac_solver_from_string(std::string_view s);
DiagonalSolve diagonal_solve_from_string(std::string_view s);

/// Hypotheses with at most this many rows are stored in every snapshot.
inline constexpr Eigen::Index kSnapshotDimLimit = 64;

struct RunConfig {
  Optimizer optimizer = Optimizer::ngd;
  Objective objective = Objective::logistic;
  double step_size = 1e-2;
  std::int64_t max_steps = 1000;
  std::int64_t record_every = 10;
  FisherWeighting fisher_weighting = FisherWeighting::sample;
  std::optional<double> loss_below;
  /// Logistic objective only; completion always uses the summed loss.
  LossReduction loss_reduction = LossReduction::mean;
  MatfacSolver matfac_solver = MatfacSolver::joint;
  DiagonalSolve diagonal_solve = DiagonalSolve::joint;
  double pinv_rtol = kDefaultPinvRtol;
  double residual_tol = kDefaultResidualTol;

  void validate() const;
};

using MetricMap = std::map<std::string, double>;

struct StepRecord {
  std::int64_t step = 0;
  double t = 0.0;
  double loss = 0.0;
  MetricMap metrics;
  /// Present when the hypothesis has at most kSnapshotDimLimit rows.
  std::optional<Eigen::MatrixXd> hypothesis;
  /// Training logits s = X beta (classification only).
  Eigen::VectorXd logits;
};

enum class RunStatus { completed, stopped, aborted };
std::string_view to_string(RunStatus v);

struct Trajectory {
  std::vector<StepRecord> records;
  ModelParams final_params;
  Eigen::MatrixXd final_hypothesis;
  RunStatus status = RunStatus::completed;
  std::int64_t steps_taken = 0;
  std::string diagnostic;
};

struct ClassificationProblem {
  ClassificationDataset train;
  std::optional<ClassificationDataset> test;
  /// Used for the Fisher when fisher_weighting = population.
  std::optional<ClassificationDataset> population;
  /// Unit or unnormalized directions reported as cos_<name> metrics.
  std::map<std::string, Eigen::VectorXd> references;
};

/// Runs the configured optimizer on a logistic problem. params must be a
/// vector kind (direct_vector or diagonal).
Trajectory run(const ClassificationProblem& problem, ModelParams params, const RunConfig& config);

/// Runs the configured optimizer on a completion task. params must be
/// matfac (direct matrix hypotheses are matfac with depth 1).
Trajectory run(const CompletionTask& task, ModelParams params, const RunConfig& config);

MetricMap classification_metrics(const ClassificationProblem& problem, const Eigen::VectorXd& beta);
MetricMap completion_metrics(const CompletionTask& task, const Eigen::MatrixXd& beta);

double nuclear_norm(const Eigen::MatrixXd& m);
/// exp of the Shannon entropy of sigma_i / sum_j sigma_j; 0 for the zero
/// matrix.
double effective_rank(const Eigen::MatrixXd& m);

struct DirectionLimit {
  Eigen::VectorXd direction;        // normalized fitted slope; empty if degenerate
  Eigen::VectorXd slope;            // per-coordinate fitted slope
  Eigen::VectorXd final_direction;  // last snapshot's hypothesis, normalized
  bool degenerate = false;
};

/// Least-squares fit of s(t) = t d + c per coordinate over the last half of
/// the series. Requires at least 10 samples.
DirectionLimit direction_limit(const std::vector<double>& t,
                               const std::vector<Eigen::VectorXd>& series);

/// direction_limit over a trajectory's training logits.
DirectionLimit direction_limit(const Trajectory& trajectory);

}  // namespace ngflow
