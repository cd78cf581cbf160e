#pragma once

// SPICE covariance-fitting iteration for the heteroscedastic (free per-sample
// noise variances) and equal-variance (tied noise variance) models, and the
// covariance-fitting costs
//
//   f(R) = ||R^{-1/2} (y y^H - R)||_F^2
//        = ||y||^2 y^H R^{-1} y - 2 ||y||^2 + tr R,
//   g(R) = y^H R^{-1} y + sum_k w_k p_k,
//
// with R = sum_k p_k a_k a_k^H over the K + N extended atoms.

#include <functional>
#include <string>
#include <string_view>

#include "spicelab/model.hpp"
#include "spicelab/numerics.hpp"

namespace spicelab {

enum class NoiseModel { heteroscedastic, equal_variance };

std::string_view to_string(NoiseModel m) noexcept;
/// Accepts "hetero"/"heteroscedastic" and "equal"/"equal_variance".
NoiseModel parse_noise_model(std::string_view s);

/// Powers over the extended atoms: p[0..K) are |s_k|^2, p[K..K+N) the noise
/// variances. Under equal_variance every noise entry holds the same value.
struct PowerEstimate {
  RVector p;
  NoiseModel variant = NoiseModel::heteroscedastic;

  auto signal(Eigen::Index k) const { return p.head(k); }
  auto noise(Eigen::Index k) const { return p.tail(p.size() - k); }
};

/// R = sum_{k<K} p_k a_k a_k^H + diag(p_K, ..., p_{K+N-1}), full Hermitian.
CMatrix assemble_covariance(const Dictionary& dict, const PowerEstimate& powers);

double cost_f(const CMatrix& r, const CVector& y, const JitterPolicy& jitter = {});
double cost_g(const CMatrix& r, const CVector& y, const Weights& w, const PowerEstimate& powers,
              const JitterPolicy& jitter = {});

struct SpiceState {
  PowerEstimate powers;
  std::size_t iteration = 0;
  /// Normalizer used for the update that produced `powers` (0 for the initial state).
  double rho = 0.0;
  /// g evaluated at `powers`.
  double g_value = 0.0;
  bool converged = false;
  /// Factorization of R(powers); reused by the next step.
  HermitianFactorization covariance;
};

enum class InitPolicy {
  /// p_k = |a_k^H y|^2 / ||a_k||^4, floored at 1e-8 ||y||^2.
  matched_filter,
  /// p_k = 1 / sum_l w_l, i.e. equal powers with sum_k w_k p_k = 1.
  uniform,
};

struct SpiceConfig {
  NoiseModel variant = NoiseModel::heteroscedastic;
  std::size_t max_iters = 5000;
  double rel_tol = 1e-8;
  InitPolicy init = InitPolicy::matched_filter;
  JitterPolicy jitter{};
  /// Invoked with every state produced by spice_step.
  std::function<void(const SpiceState&)> observer;
};

/// Powers below this are clamped to exactly zero after each update.
inline constexpr double kPowerUnderflow = 1e-300;

PowerEstimate initial_powers(const Dictionary& dict, const CVector& y, const Weights& w,
                             NoiseModel variant, InitPolicy init);

/// Builds the iteration-0 state (factorizes R and evaluates g). Every power
/// must be strictly positive.
SpiceState make_initial_state(const Dictionary& dict, const CVector& y, const Weights& w,
                              PowerEstimate powers, const JitterPolicy& jitter = {});

/// One SPICE update. With c_k = w_k^{1/2} p_k a_k^H R^{-1} y:
///   heteroscedastic:  w_k p_k <- |c_k| / sum_l |c_l|
///   equal_variance:   w_k p_k <- |c_k| / beta (k < K),
///                     w_{K+j} p_{K+j} <- sqrt(N sum_{l>=K} |c_l|^2) / (N beta),
///   beta = sum_{k<K} |c_k| + sqrt(N sum_{l>=K} |c_l|^2).
/// Both keep sum_k w_k p_k = 1. Throws ZeroRho when the normalizer vanishes.
SpiceState spice_step(const SpiceState& state, const Dictionary& dict, const CVector& y, const Weights& w,
                      const JitterPolicy& jitter = {});

/// Iterates until ||p(i+1) - p(i)||_inf / max(||p(i)||_inf, eps) < rel_tol or
/// max_iters steps have run.
SpiceState spice_run(const Dictionary& dict, const CVector& y, const SpiceConfig& config);

/// JSON record {iteration, g_value, rho, converged, variant, p}, where p maps
/// 1-based extended indices to powers above 1e-12.
std::string spice_state_json(const SpiceState& state);

}  // namespace spicelab
