#pragma once

// Complex-valued L1 regression solvers:
//
//   LAD-Lasso:         min_c  sum_n |y_n - (Phi c)_n| + sum_k |c_k|
//   square-root Lasso: min_c  sqrt(N) ||y - Phi c||_2 + sum_k |c_k|
//
// (|.| is the complex modulus), the equality-constrained forms over the
// extended scaled dictionary, and the real group-Lasso embedding of the
// square-root Lasso.

#include <string>
#include <vector>

#include "spicelab/model.hpp"
#include "spicelab/numerics.hpp"
#include "spicelab/spice.hpp"

namespace spicelab {

struct SolverConfig {
  std::size_t max_iters = 200000;
  double eps_abs = 1e-9;
  double eps_rel = 1e-7;
  /// ADMM penalty; the effective value is penalty * N / ||y||_2 (N = rows).
  double penalty = 1.0;
  /// Over-relaxation factor in (0, 2).
  double relaxation = 1.6;
  /// Required subgradient-certificate violation at termination.
  double kkt_tol = 1e-7;
  /// Stopping tests run every `check_every` iterations.
  std::size_t check_every = 10;
};

struct CoefficientVector {
  CVector c_tilde;                    // K entries
  std::optional<CVector> c_full;      // K + N entries when present
};

struct LassoSolution {
  CoefficientVector coefficients;
  CVector residual;  // y - Phi c_tilde
  double objective = 0.0;
  std::size_t iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  /// Subgradient-certificate violation (see lad_kkt_violation / sqrt_kkt_violation).
  double kkt_violation = 0.0;
  bool converged = false;
  /// Dual estimate s in the subdifferential of the loss at the residual.
  CVector loss_subgradient;
};

double lad_objective(const CMatrix& phi, const CVector& y, const CVector& c);
double sqrt_lasso_objective(const CMatrix& phi, const CVector& y, const CVector& c);

/// Largest violation of 0 in -Phi^H d(loss)(r) + d||c||_1, using `s` as the loss
/// subgradient wherever the residual entry (LAD) or the residual vector
/// (square-root Lasso) is below `zero_tol` in modulus, and the exact gradient
/// direction elsewhere. `s` is projected onto the admissible set first.
double lad_kkt_violation(const CMatrix& phi, const CVector& y, const CVector& c, const CVector& s,
                         double zero_tol);
double sqrt_kkt_violation(const CMatrix& phi, const CVector& y, const CVector& c, const CVector& s,
                          double zero_tol);

/// Returns the zero solution for y = 0. When max_iters is hit the best
/// iterate is returned with converged = false.
LassoSolution solve_lad_lasso(const CMatrix& phi, const CVector& y, const SolverConfig& config = {});
LassoSolution solve_sqrt_lasso(const CMatrix& phi, const CVector& y, const SolverConfig& config = {});

struct ConstrainedL1Result {
  /// c_tilde and c_full with A~^H c_full = y.
  CoefficientVector coefficients;
  /// The unconstrained solve on (phi / ||y||, y / ||y||); the power
  /// transforms consume this.
  LassoSolution normalized;
  double measurement_norm = 0.0;
};

/// min sum_k |c_k| (heteroscedastic) or sum_{k<K} |c_k| + sqrt(N sum_{k>=K} |c_k|^2)
/// (equal_variance) subject to A~^H c = y. The noise coefficients are
/// eliminated via c_{K+j} = (y_j - regressor_row_j^H c_tilde) / identity_scale_j;
/// with identity_scale = ||y|| this is the unconstrained problem in the
/// normalized measurement y / ||y||. Throws ZeroMeasurement for y = 0.
ConstrainedL1Result solve_constrained_l1(const ScaledAtoms& atoms, const CVector& y, NoiseModel variant,
                                         const SolverConfig& config = {});

struct RealEmbedding {
  RMatrix phi;  // [Re Phi, -Im Phi; Im Phi, Re Phi]
  RVector y;    // [Re y; Im y]
};

RealEmbedding real_embedding(const CMatrix& phi, const CVector& y);
RVector embed_vector(const CVector& v);
CVector unembed_vector(const RVector& v);
/// Groups {k, k + K} for k = 0..K-1.
std::vector<std::vector<Eigen::Index>> complex_pair_groups(Eigen::Index num_complex);

struct GroupLassoSolution {
  RVector coefficients;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// min sqrt(rows/2) ||y_R - Phi_R c||_2 + sum_g ||c_g||_2 over a partition of
/// the coordinates into groups. Stops on primal/dual residuals only.
GroupLassoSolution solve_group_lasso_real(const RMatrix& phi, const RVector& y,
                                          const std::vector<std::vector<Eigen::Index>>& groups,
                                          const SolverConfig& config = {});

double group_lasso_objective(const RMatrix& phi, const RVector& y,
                             const std::vector<std::vector<Eigen::Index>>& groups, const RVector& c);

/// Block soft-threshold: v * max(1 - tau / ||v||, 0).
RVector block_soft_threshold(const RVector& v, double tau);
/// Modulus-wise complex soft-threshold z * max(1 - tau / |z|, 0).
cplx complex_soft_threshold(cplx z, double tau);

/// JSON {objective, iterations, converged, support: [[index, re, im], ...]}
/// with 1-based indices of nonzero coefficients.
std::string lasso_solution_json(const LassoSolution& sol);

}  // namespace spicelab
