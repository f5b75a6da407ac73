#include "ngflow/flow.hpp"

#include <cmath>
#include <functional>

#include "ngflow/errors.hpp"

namespace ngflow {

std::string_view to_string(Optimizer v) { return v == Optimizer::egd ? "egd" : "ngd"; }
std::string_view to_string(Objective v) {
  return v == Objective::logistic ? "logistic" : "completion";
}
std::string_view to_string(FisherWeighting v) {
  return v == FisherWeighting::sample ? "sample" : "population";
}
std::string_view to_string(LossReduction v) { return v == LossReduction::mean ? "mean" : "sum"; }
std::string_view to_string(MatfacSolver v) {
  return v == MatfacSolver::joint ? "joint" : "factored";
}
std::string_view to_string(DiagonalSolve v) {
  return v == DiagonalSolve::joint ? "joint" : "per_layer";
}
std::string_view to_string(RunStatus v) {
  switch (v) {
    case RunStatus::completed: return "completed";
    case RunStatus::stopped: return "stopped";
    case RunStatus::aborted: return "aborted";
  }
  return "unknown";
}

namespace {

template <typename E>
E parse_enum(std::string_view s, std::initializer_list<E> values, const char* what) {
  for (E v : values)
    if (to_string(v) == s) return v;
  throw ArgumentError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

}  // namespace

Optimizer optimizer_from_string(std::string_view s) {
  return parse_enum(s, {Optimizer::egd, Optimizer::ngd}, "optimizer");
}
Objective objective_from_string(std::string_view s) {
  return parse_enum(s, {Objective::logistic, Objective::completion}, "objective");
}
FisherWeighting fisher_weighting_from_string(std::string_view s) {
  return parse_enum(s, {FisherWeighting::sample, FisherWeighting::population},
                    "fisher weighting");
}
LossReduction loss_reduction_from_string(std::string_view s) {
  return parse_enum(s, {LossReduction::mean, LossReduction::sum}, "loss reduction");
}
MatfacSolver matfac_solver_from_string(std::string_view s) {
  return parse_enum(s, {MatfacSolver::joint, MatfacSolver::factored}, "matfac solver");
}
DiagonalSolve diagonal_solve_from_string(std::string_view s) {
  return parse_enum(s, {DiagonalSolve::joint, DiagonalSolve::per_layer}, "diagonal solve");
}

void RunConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size))
    throw ArgumentError("step_size must be positive");
  if (max_steps < 1) throw ArgumentError("max_steps must be >= 1");
  if (record_every < 1) throw ArgumentError("record_every must be >= 1");
  if (record_every > max_steps) throw ArgumentError("record_every must not exceed max_steps");
  if (!(pinv_rtol > 0.0)) throw ArgumentError("pinv_rtol must be positive");
  if (!(residual_tol > 0.0)) throw ArgumentError("residual_tol must be positive");
}

namespace {

struct Evaluation {
  double loss = 0.0;
  Eigen::MatrixXd hypothesis;
  Eigen::VectorXd logits;
};

// Shared Euler loop. `evaluate` reports the current state, `metrics` turns a
// hypothesis into a metric map, `update` advances params by one step.
Trajectory euler_loop(ModelParams params, const RunConfig& config,
                      const std::function<Evaluation(const ModelParams&)>& evaluate,
                      const std::function<MetricMap(const Eigen::MatrixXd&)>& metrics,
                      const std::function<void(ModelParams&)>& update) {
  Trajectory traj;
  for (std::int64_t step = 0;; ++step) {
    const Evaluation ev = evaluate(params);
    bool last = step == config.max_steps;
    if (!std::isfinite(ev.loss) || !ev.hypothesis.allFinite()) {
      traj.status = RunStatus::aborted;
      traj.diagnostic = "non-finite loss or hypothesis at step " + std::to_string(step);
      last = true;
    } else if (config.loss_below && ev.loss < *config.loss_below) {
      traj.status = RunStatus::stopped;
      traj.diagnostic = "loss below threshold at step " + std::to_string(step);
      last = true;
    }
    if (step % config.record_every == 0 || last) {
      StepRecord rec;
      rec.step = step;
      rec.t = static_cast<double>(step) * config.step_size;
      rec.loss = ev.loss;
      if (traj.status != RunStatus::aborted) rec.metrics = metrics(ev.hypothesis);
      if (ev.hypothesis.rows() <= kSnapshotDimLimit) rec.hypothesis = ev.hypothesis;
      rec.logits = ev.logits;
      traj.records.push_back(std::move(rec));
    }
    if (last) {
      traj.steps_taken = step;
      traj.final_hypothesis = ev.hypothesis;
      break;
    }
    try {
      update(params);
    } catch (const SolverError& e) {
      throw SolverError(e.what(), e.residual(), step);
    }
  }
  traj.final_params = std::move(params);
  return traj;
}

}  // namespace

Trajectory run(const ClassificationProblem& problem, ModelParams params, const RunConfig& config) {
  config.validate();
  if (config.objective != Objective::logistic)
    throw ArgumentError("classification problems require the logistic objective");
  problem.train.validate();
  params.validate();
  if (!params.spec.is_vector())
    throw StructuralError("logistic runs need a direct_vector or diagonal model");
  if (params.spec.dim != problem.train.dim())
    throw StructuralError("model dim does not match dataset dim");

  const ClassificationDataset& train = problem.train;
  const double scale =
      config.loss_reduction == LossReduction::mean ? 1.0 / static_cast<double>(train.size()) : 1.0;
  NatGradOptions ng;
  ng.pinv_rtol = config.pinv_rtol;
  ng.residual_tol = config.residual_tol;
  ng.diagonal_solve = config.diagonal_solve;
  if (config.fisher_weighting == FisherWeighting::population) {
    if (!problem.population)
      throw ArgumentError("population Fisher requested but no population set supplied");
    ng.population = &*problem.population;
  }
  const double eta = config.step_size;

  auto evaluate = [&](const ModelParams& p) {
    Evaluation ev;
    ev.hypothesis = collapse(p).values;
    ev.loss = scale * loss(train, ev.hypothesis.col(0));
    ev.logits = train.X * ev.hypothesis.col(0);
    return ev;
  };
  auto metric_fn = [&](const Eigen::MatrixXd& h) {
    return classification_metrics(problem, h.col(0));
  };
  auto update = [&](ModelParams& p) {
    if (config.optimizer == Optimizer::egd) {
      const Eigen::VectorXd g = scale * grad_beta(train, collapse(p).vector());
      if (p.spec.kind == ModelKind::direct_vector) {
        p.layers[0] -= eta * g;
      } else {
        const JacobianView jac = jacobian(p);
        for (int l = 0; l < p.spec.depth; ++l) p.layers[l] -= eta * jac.factors[l].cwiseProduct(g);
      }
      return;
    }
    if (p.spec.kind == ModelKind::direct_vector) {
      const NatGradDirection dir = natgrad_direct_logistic(train, p.layers[0].col(0), ng);
      p.layers[0] += (eta * scale) * dir.blocks[0];
    } else {
      const NatGradDirection dir = natgrad_diagonal_logistic(train, p, ng);
      for (int l = 0; l < p.spec.depth; ++l) p.layers[l] += (eta * scale) * dir.blocks[l];
    }
  };
  return euler_loop(std::move(params), config, evaluate, metric_fn, update);
}

Trajectory run(const CompletionTask& task, ModelParams params, const RunConfig& config) {
  config.validate();
  if (config.objective != Objective::completion)
    throw ArgumentError("completion tasks require the completion objective");
  task.validate();
  params.validate();
  if (params.spec.kind != ModelKind::matfac)
    throw StructuralError("completion runs need a matfac model");
  if (params.spec.dim != task.dim()) throw StructuralError("model dim does not match task dim");

  const GaussianFisher fisher = fisher_gaussian(task);
  const double eta = config.step_size;
  Eigen::MatrixXd warm;
  NatGradOptions ng;
  ng.pinv_rtol = config.pinv_rtol;
  ng.residual_tol = config.residual_tol;

  auto evaluate = [&](const ModelParams& p) {
    Evaluation ev;
    ev.hypothesis = collapse(p).values;
    ev.loss = mc_loss(task, ev.hypothesis);
    return ev;
  };
  auto metric_fn = [&](const Eigen::MatrixXd& h) { return completion_metrics(task, h); };
  auto update = [&](ModelParams& p) {
    const Eigen::MatrixXd G = mc_grad(task, collapse(p).values);
    if (config.optimizer == Optimizer::egd) {
      const JacobianView jac = jacobian(p);
      for (int l = 0; l < p.spec.depth; ++l) p.layers[l] -= eta * jac.apply_transpose(l, G);
      return;
    }
    const Eigen::MatrixXd nat = fisher.solve(G);
    NatGradDirection dir;
    if (config.matfac_solver == MatfacSolver::joint) {
      MatfacJointOptions opts;
      opts.residual_tol = config.residual_tol;
      if (warm.size()) opts.warm_start = &warm;
      dir = natgrad_matfac_joint(p, nat, opts);
      warm = dir.multiplier;
    } else {
      dir = natgrad_matfac(p, nat, ng);
    }
    for (int l = 0; l < p.spec.depth; ++l) p.layers[l] -= eta * dir.blocks[l];
  };
  return euler_loop(std::move(params), config, evaluate, metric_fn, update);
}

MetricMap classification_metrics(const ClassificationProblem& problem, const Eigen::VectorXd& beta) {
  MetricMap m;
  auto accuracy = [&](const ClassificationDataset& ds) {
    const Eigen::VectorXd u = ds.y.cwiseProduct(ds.X * beta);
    return static_cast<double>((u.array() > 0.0).count()) / static_cast<double>(u.size());
  };
  m["train_accuracy"] = accuracy(problem.train);
  if (problem.test) m["test_accuracy"] = accuracy(*problem.test);
  const double norm = beta.norm();
  const Eigen::VectorXd u = problem.train.y.cwiseProduct(problem.train.X * beta);
  m["min_margin"] = norm > 0.0 ? u.minCoeff() / norm : 0.0;
  m["l1_norm"] = beta.lpNorm<1>();
  m["l2_norm"] = norm;
  for (const auto& [name, ref] : problem.references)
    if (ref.size() == beta.size()) m["cos_" + name] = cosine(beta, ref);
  return m;
}

MetricMap completion_metrics(const CompletionTask& task, const Eigen::MatrixXd& beta) {
  MetricMap m;
  const Eigen::ArrayXXd sq = (beta - task.target).array().square();
  const double n_obs = static_cast<double>(task.observed_count());
  const double n_unobs = static_cast<double>(task.mask.size()) - n_obs;
  const double obs_sum = task.mask.select(sq.matrix(), 0.0).sum();
  const double unobs_sum = sq.sum() - obs_sum;
  m["observed_mse"] = obs_sum / n_obs;
  m["unobserved_mse"] = n_unobs > 0 ? unobs_sum / n_unobs : 0.0;
  m["nuclear_norm"] = nuclear_norm(beta);
  m["effective_rank"] = effective_rank(beta);
  return m;
}

double nuclear_norm(const Eigen::MatrixXd& m) { return singular_values(m).sum(); }

double effective_rank(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd sigma = singular_values(m);
  const double total = sigma.sum();
  if (!(total > 0.0)) return 0.0;
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    const double p = sigma(i) / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

DirectionLimit direction_limit(const std::vector<double>& t,
                               const std::vector<Eigen::VectorXd>& series) {
  if (t.size() != series.size()) throw StructuralError("time and series lengths differ");
  if (series.size() < 10) throw ArgumentError("direction_limit needs at least 10 snapshots");
  const std::size_t first = series.size() / 2;
  const std::size_t count = series.size() - first;
  const Eigen::Index dim = series.front().size();

  double t_mean = 0.0;
  Eigen::VectorXd s_mean = Eigen::VectorXd::Zero(dim);
  for (std::size_t k = first; k < series.size(); ++k) {
    if (series[k].size() != dim) throw StructuralError("series entries differ in length");
    t_mean += t[k];
    s_mean += series[k];
  }
  t_mean /= static_cast<double>(count);
  s_mean /= static_cast<double>(count);
  double t_var = 0.0;
  Eigen::VectorXd cov = Eigen::VectorXd::Zero(dim);
  for (std::size_t k = first; k < series.size(); ++k) {
    const double dt = t[k] - t_mean;
    t_var += dt * dt;
    cov += dt * (series[k] - s_mean);
  }

  DirectionLimit out;
  out.slope = t_var > 0.0 ? Eigen::VectorXd(cov / t_var) : Eigen::VectorXd::Zero(dim);
  const double level = std::max(1.0, s_mean.cwiseAbs().maxCoeff());
  out.degenerate = !(out.slope.norm() > 1e-12 * level);
  if (!out.degenerate) out.direction = out.slope.normalized();
  const double last_norm = series.back().norm();
  if (last_norm > 0.0) out.final_direction = series.back() / last_norm;
  return out;
}

DirectionLimit direction_limit(const Trajectory& trajectory) {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> series;
  for (const auto& rec : trajectory.records) {
    if (rec.logits.size() == 0) continue;
    t.push_back(rec.t);
    series.push_back(rec.logits);
  }
  DirectionLimit out = direction_limit(t, series);
  const double norm = trajectory.final_hypothesis.norm();
  if (norm > 0.0) {
    const Eigen::MatrixXd& h = trajectory.final_hypothesis;
    out.final_direction = Eigen::Map<const Eigen::VectorXd>(h.data(), h.size()) / norm;
  }
  return out;
}

}  // namespace ngflow
