#pragma once

// Tangent-kernel slices for matrix factorization: how every entry of beta
// moves in response to a unit negative gradient at a single probe entry.

#include <string_view>

#include <Eigen/Dense>

#include "ngflow/flow.hpp"
#include "ngflow/model.hpp"

namespace ngflow {

enum class KernelMode { egf_ntk, egd_onestep, ngf_ntk, ngd_onestep };

std::string_view to_string(KernelMode mode);
KernelMode kernel_mode_from_string(std::string_view s);

struct Probe {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
};

struct KernelSlice {
  Probe probe;
  Eigen::MatrixXd response;  // D x D
  KernelMode mode = KernelMode::egf_ntk;
  bool rank_deficient = false;
  double condition = 1.0;
};

/// K[(i,j),(k,l)] = sum_p d beta_ij/d theta_p * d beta_kl/d theta_p, assembled
/// per layer as (A_l A_l^T)_{ik} (B_l^T B_l)_{lj} without forming J.
KernelSlice ntk_slice(const ModelParams& params, Probe probe);

/// J pinv-preconditioned response to a one-hot gradient at the probe, with
/// the identity Fisher of the Gaussian objective. Uses the factored
/// per-layer pseudoinverse so rank-deficient factors are reported, not fatal.
KernelSlice natural_ntk_slice(const ModelParams& params, Probe probe);

/// (collapse after one step - collapse before) / eta on a single-observation
/// task whose target sits one unit above the current probe entry.
KernelSlice onestep_slice(const ModelParams& params, Probe probe, Optimizer optimizer, double eta,
                          MatfacSolver solver = MatfacSolver::joint);

/// Dispatches on mode; eta is used by the one-step modes only.
KernelSlice kernel_slice(const ModelParams& params, Probe probe, KernelMode mode, double eta);

}  // namespace ngflow
