#pragma once

// Parametrizations of a linear hypothesis and their collapse maps.
//
// Three kinds are supported:
//   direct_vector  beta = w                     (one length-D vector)
//   diagonal       beta = w_1 * w_2 * ... * w_L (elementwise, length-D vectors)
//   matfac         beta = W_1 W_2 ... W_L       (D x D matrices)
//
// Vector layers are stored as D x 1 Eigen matrices so every layer and every
// hypothesis share the same storage type.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ngflow {

enum class ModelKind { direct_vector, diagonal, matfac };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::direct_vector;
  int depth = 1;
  int dim = 1;
  double init_scale = 0.1;
  std::uint64_t seed = 0;

  /// Throws ArgumentError when the model description violates its invariants.
  void validate() const;

  /// init_scale == 0 yields all-zero parameters, a saddle for every
  /// depth > 1. Allowed, but callers should surface it.
  bool degenerate() const { return init_scale == 0.0; }

  bool is_vector() const { return kind != ModelKind::matfac; }
};

struct Hypothesis {
  Eigen::MatrixXd values;  // D x 1 for vector kinds, D x D for matfac

  Eigen::Index dim() const { return values.rows(); }
  bool is_matrix() const { return values.cols() > 1; }
  Eigen::VectorXd vector() const;
};

struct ModelParams {
  ModelSpec spec;
  std::vector<Eigen::MatrixXd> layers;

  /// Throws StructuralError if the layer count or any block shape disagrees
  /// with `spec`.
  void validate() const;

  /// Number of scalar parameters across all layers.
  Eigen::Index size() const;

  /// Builds direct parameters holding `beta` (vector or matrix hypothesis).
  static ModelParams direct(const Hypothesis& beta, std::uint64_t seed = 0);
};

Hypothesis collapse(const ModelParams& params);

/// Jacobian of the collapse map, kept in factored form.
///
/// diagonal: factors[l] = a_l (.) b_l with a_l the product of layers before l
///   and b_l the product after (empty product = ones), so J_l = diag(factors[l]).
/// matfac: left[l] = W_1...W_{l-1}, right[l] = W_{l+1}...W_L (empty = I), so
///   J_l vec(V) = vec(left[l] V right[l]).
/// direct: identity; no storage.
struct JacobianView {
  ModelKind kind = ModelKind::direct_vector;
  std::vector<Eigen::VectorXd> factors;
  std::vector<Eigen::MatrixXd> left;
  std::vector<Eigen::MatrixXd> right;

  int depth() const;

  /// Hypothesis-space response of a perturbation of layer `layer`.
  Eigen::MatrixXd apply(int layer, const Eigen::MatrixXd& perturbation) const;

  /// Pulls a hypothesis-space gradient back to layer `layer`.
  Eigen::MatrixXd apply_transpose(int layer, const Eigen::MatrixXd& grad) const;

  /// Sum over layers of apply(l, blocks[l]).
  Eigen::MatrixXd apply_all(const std::vector<Eigen::MatrixXd>& blocks) const;
};

JacobianView jacobian(const ModelParams& params);

/// i.i.d. Gaussian layers with standard deviation spec.init_scale, drawn from
/// a stream seeded by spec.seed.
ModelParams init(const ModelSpec& spec);

/// Draws deep_spec.depth matfac factors and multiplies contiguous groups down
/// to target_depth factors. Groups are as equal as possible; earlier groups
/// take the extra factor when depth does not divide evenly.
ModelParams collapsed_init(const ModelSpec& deep_spec, int target_depth);

/// Group sizes used by collapsed_init.
std::vector<int> grouping(int depth, int target_depth);

}  // namespace ngflow
