#pragma once

// The bridge between SPICE and the L1 solvers:
//
//  * elfving_min: y^H R^{-1} y = min_c sum'_k |c_k|^2 / p~_k  s.t.  A~^H c = y,
//    with R = sum_k p~_k a~_k a~_k^H and the closed-form minimizer
//    c = P~ A~ R^{-1} y (primed sum skips p~_k = 0).
//  * allocate_powers: the Cauchy-Schwarz minimizer of sum' |c_k|^2 / p~_k
//    over the simplex for fixed c.
//  * theorem1_transform / theorem2_transform: map an L1 solution back to
//    SPICE powers.
//  * certify_equivalence: run both pipelines and compare.

#include <string>
#include <vector>

#include "spicelab/model.hpp"
#include "spicelab/sparse_solvers.hpp"
#include "spicelab/spice.hpp"

namespace spicelab {

struct ElfvingSolution {
  CVector c;       // K + N
  CVector lambda;  // N, Lagrange multiplier -2 R^{-1} y
  double value = 0.0;
};

/// Atoms with p~_k = 0 are dropped before R is formed. Throws EmptySupport if
/// every p~_k is zero and NonFactorizable if R is singular on the support.
ElfvingSolution elfving_min(const ScaledAtoms& atoms, const RVector& p_tilde, const CVector& y,
                            const JitterPolicy& jitter = {});

/// sum'_k |c_k|^2 / p~_k; +inf when some p~_k = 0 has c_k != 0.
double allocation_cost(const CVector& c_full, const RVector& p_tilde);

struct AllocationResult {
  /// K + N entries summing to one.
  RVector p_tilde;
  /// heteroscedastic: equal to p_tilde. equal_variance: K + 1 entries, the
  /// last being the pooled noise mass N * p~_{K+j}.
  RVector p_prime;
  double alpha = 0.0;
  NoiseModel variant = NoiseModel::heteroscedastic;
};

/// heteroscedastic: p~_k = |c_k| / sum_i |c_i|, alpha = (sum_i |c_i|)^2.
/// equal_variance: p'_k = |c_k| / sqrt(alpha) (k < K),
/// p'_K = sqrt(N sum_{i>=K} |c_i|^2 / alpha),
/// alpha = (sum_{k<K} |c_k| + sqrt(N sum_{i>=K} |c_i|^2))^2.
/// Throws AllZeroCoefficients for c = 0.
AllocationResult allocate_powers(const CVector& c_full, Eigen::Index num_signal, NoiseModel variant);

/// Maps a LAD-Lasso solution of the normalized problem (regressors
/// phi / ||y||, data y / ||y||, as produced by solve_constrained_l1) to powers
///   p_k = ||y||^2 |c_k| / (||a_k||^2 (sum_i |c~_i| + sum_n |r_n|)),
/// using the residual entries r_n as the noise coefficients.
PowerEstimate theorem1_transform(const LassoSolution& normalized, const Dictionary& dict, const CVector& y);

/// Maps a square-root-Lasso solution of the normalized problem to powers
///   p_k     = ||y||^2 |c_k| / (N (||c~||_1 + sqrt(N) ||r||_2)),
///   p_noise = sqrt(N) ||y||^2 ||r||_2 / (N (||c~||_1 + sqrt(N) ||r||_2)).
PowerEstimate theorem2_transform(const LassoSolution& normalized, const Dictionary& dict, const CVector& y);

/// 0-based extended indices with w_k p_k > threshold.
std::vector<Eigen::Index> support_set(const PowerEstimate& powers, const Weights& w, double threshold = 1e-6);

struct CertifyConfig {
  SpiceConfig spice{};
  SolverConfig solver{.eps_abs = 1e-11, .eps_rel = 1e-10, .kkt_tol = 1e-8};
  double support_threshold = 1e-6;
  /// Limit on the l_inf gap between the normalized masses w_k p_k of the two routes.
  double power_gap_threshold = 1e-2;
};

struct CertificationReport {
  NoiseModel variant = NoiseModel::heteroscedastic;
  std::vector<Eigen::Index> support_spice;
  std::vector<Eigen::Index> support_lasso;
  double g_spice = 0.0;
  double g_lasso = 0.0;
  double linf_power_gap = 0.0;
  double noise_power_spice = 0.0;  // mean noise variance
  double noise_power_lasso = 0.0;
  bool spice_converged = false;
  bool lasso_converged = false;
  std::size_t spice_iterations = 0;
  std::size_t lasso_iterations = 0;
  double spice_seconds = 0.0;
  double lasso_seconds = 0.0;
  PowerEstimate p_spice;
  PowerEstimate p_lasso;
  CVector c_tilde;

  bool supports_agree() const { return support_spice == support_lasso; }
  double g_relative_gap() const;
  bool within_gap(double threshold) const { return linf_power_gap <= threshold; }
};

CertificationReport certify_equivalence(const Dictionary& dict, const CVector& y, NoiseModel variant,
                                        const CertifyConfig& config = {});

/// JSON {variant, support_spice, support_lasso, g_spice, g_lasso, linf_power_gap,
/// runtimes, ...}; support indices are 1-based extended indices. Runtimes are
/// omitted when `include_runtimes` is false.
std::string certification_json(const CertificationReport& report, bool include_runtimes = true);

}  // namespace spicelab
