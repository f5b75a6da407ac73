#include "ngflow/model.hpp"

#include <cmath>
#include <random>

#include "ngflow/errors.hpp"

namespace ngflow {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::direct_vector: return "direct_vector";
    case ModelKind::diagonal: return "diagonal";
    case ModelKind::matfac: return "matfac";
  }
  return "unknown";
}

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "direct_vector" || name == "direct") return ModelKind::direct_vector;
  if (name == "diagonal") return ModelKind::diagonal;
  if (name == "matfac") return ModelKind::matfac;
  throw ArgumentError("unknown model kind '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
  if (dim < 1) throw ArgumentError("model dim must be >= 1");
  if (depth < 1) throw ArgumentError("model depth must be >= 1");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale))
    throw ArgumentError("init_scale must be finite and >= 0");
  if (kind == ModelKind::direct_vector && depth != 1)
    throw ArgumentError("direct_vector models have depth 1");
}

Eigen::VectorXd Hypothesis::vector() const {
  return Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
}

void ModelParams::validate() const {
  spec.validate();
  if (static_cast<int>(layers.size()) != spec.depth)
    throw StructuralError("layer count " + std::to_string(layers.size()) +
                          " does not match depth " + std::to_string(spec.depth));
  const Eigen::Index cols = spec.is_vector() ? 1 : spec.dim;
  for (const auto& layer : layers) {
    if (layer.rows() != spec.dim || layer.cols() != cols)
      throw StructuralError("layer shape does not match model spec");
  }
}

Eigen::Index ModelParams::size() const {
  Eigen::Index n = 0;
  for (const auto& layer : layers) n += layer.size();
  return n;
}

ModelParams ModelParams::direct(const Hypothesis& beta, std::uint64_t seed) {
  ModelParams p;
  p.spec.kind = beta.is_matrix() ? ModelKind::matfac : ModelKind::direct_vector;
  p.spec.depth = 1;
  p.spec.dim = static_cast<int>(beta.dim());
  p.spec.init_scale = 0.0;
  p.spec.seed = seed;
  p.layers = {beta.values};
  return p;
}

Hypothesis collapse(const ModelParams& params) {
  params.validate();
  switch (params.spec.kind) {
    case ModelKind::direct_vector:
      return {params.layers.front()};
    case ModelKind::diagonal: {
      Eigen::MatrixXd beta = params.layers.front();
      for (std::size_t l = 1; l < params.layers.size(); ++l)
        beta = beta.cwiseProduct(params.layers[l]);
      return {beta};
    }
    case ModelKind::matfac: {
      Eigen::MatrixXd beta = params.layers.front();
      for (std::size_t l = 1; l < params.layers.size(); ++l) beta = beta * params.layers[l];
      return {beta};
    }
  }
  throw StructuralError("unknown model kind");
}

int JacobianView::depth() const {
  switch (kind) {
    case ModelKind::direct_vector: return 1;
    case ModelKind::diagonal: return static_cast<int>(factors.size());
    case ModelKind::matfac: return static_cast<int>(left.size());
  }
  return 0;
}

Eigen::MatrixXd JacobianView::apply(int layer, const Eigen::MatrixXd& perturbation) const {
  switch (kind) {
    case ModelKind::direct_vector: return perturbation;
    case ModelKind::diagonal: return factors.at(layer).cwiseProduct(perturbation);
    case ModelKind::matfac: return left.at(layer) * perturbation * right.at(layer);
  }
  return {};
}

Eigen::MatrixXd JacobianView::apply_transpose(int layer, const Eigen::MatrixXd& grad) const {
  switch (kind) {
    case ModelKind::direct_vector: return grad;
    case ModelKind::diagonal: return factors.at(layer).cwiseProduct(grad);
    case ModelKind::matfac:
      return left.at(layer).transpose() * grad * right.at(layer).transpose();
  }
  return {};
}

Eigen::MatrixXd JacobianView::apply_all(const std::vector<Eigen::MatrixXd>& blocks) const {
  if (static_cast<int>(blocks.size()) != depth())
    throw StructuralError("block count does not match Jacobian depth");
  Eigen::MatrixXd out = apply(0, blocks[0]);
  for (int l = 1; l < depth(); ++l) out += apply(l, blocks[l]);
  return out;
}

JacobianView jacobian(const ModelParams& params) {
  params.validate();
  JacobianView view;
  view.kind = params.spec.kind;
  const int depth = params.spec.depth;
  const int dim = params.spec.dim;

  if (view.kind == ModelKind::diagonal) {
    // prefix[l] = w_1 .. w_{l-1}, suffix[l] = w_{l+1} .. w_L; no division, so
    // zero entries propagate exactly.
    std::vector<Eigen::VectorXd> prefix(depth, Eigen::VectorXd::Ones(dim));
    std::vector<Eigen::VectorXd> suffix(depth, Eigen::VectorXd::Ones(dim));
    for (int l = 1; l < depth; ++l)
      prefix[l] = prefix[l - 1].cwiseProduct(params.layers[l - 1].col(0));
    for (int l = depth - 2; l >= 0; --l)
      suffix[l] = suffix[l + 1].cwiseProduct(params.layers[l + 1].col(0));
    view.factors.reserve(depth);
    for (int l = 0; l < depth; ++l) view.factors.push_back(prefix[l].cwiseProduct(suffix[l]));
  } else if (view.kind == ModelKind::matfac) {
    view.left.assign(depth, Eigen::MatrixXd::Identity(dim, dim));
    view.right.assign(depth, Eigen::MatrixXd::Identity(dim, dim));
    for (int l = 1; l < depth; ++l) view.left[l] = view.left[l - 1] * params.layers[l - 1];
    for (int l = depth - 2; l >= 0; --l) view.right[l] = params.layers[l + 1] * view.right[l + 1];
  }
  return view;
}

ModelParams init(const ModelSpec& spec) {
  spec.validate();
  ModelParams params;
  params.spec = spec;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index cols = spec.is_vector() ? 1 : spec.dim;
  params.layers.reserve(spec.depth);
  for (int l = 0; l < spec.depth; ++l) {
    Eigen::MatrixXd layer(spec.dim, cols);
    for (Eigen::Index j = 0; j < layer.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.rows(); ++i) layer(i, j) = spec.init_scale * normal(rng);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

std::vector<int> grouping(int depth, int target_depth) {
  if (target_depth < 1) throw ArgumentError("target depth must be >= 1");
  if (target_depth > depth)
    throw ArgumentError("target depth " + std::to_string(target_depth) +
                        " exceeds source depth " + std::to_string(depth));
  std::vector<int> sizes(target_depth, depth / target_depth);
  for (int g = 0; g < depth % target_depth; ++g) ++sizes[g];
  return sizes;
}

ModelParams collapsed_init(const ModelSpec& deep_spec, int target_depth) {
  if (deep_spec.kind != ModelKind::matfac)
    throw ArgumentError("collapsed_init requires a matfac spec");
  const auto sizes = grouping(deep_spec.depth, target_depth);
  const ModelParams deep = init(deep_spec);

  ModelParams out;
  out.spec = deep_spec;
  out.spec.depth = target_depth;
  std::size_t next = 0;
  for (int size : sizes) {
    Eigen::MatrixXd factor = deep.layers[next++];
    for (int k = 1; k < size; ++k) factor = factor * deep.layers[next++];
    out.layers.push_back(std::move(factor));
  }
  return out;
}

}  // namespace ngflow
