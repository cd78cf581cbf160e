#include "spicelab/spice.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "spicelab/error.hpp"

namespace spicelab {

std::string_view to_string(NoiseModel m) noexcept {
  return m == NoiseModel::heteroscedastic ? "heteroscedastic" : "equal_variance";
}

NoiseModel parse_noise_model(std::string_view s) {
  if (s == "hetero" || s == "heteroscedastic") return NoiseModel::heteroscedastic;
  if (s == "equal" || s == "equal_variance") return NoiseModel::equal_variance;
  throw Error(ErrorKind::InvalidConfig, "unknown variant '" + std::string(s) + "' (expected hetero|equal)");
}

namespace {

void check_powers(const Dictionary& dict, const PowerEstimate& powers) {
  if (powers.p.size() != dict.num_extended())
    throw Error(ErrorKind::DimensionMismatch, "power vector must have K + N entries");
  if (!powers.p.allFinite() || (powers.p.array() < 0.0).any())
    throw Error(ErrorKind::NonFiniteInput, "powers must be finite and nonnegative");
}

// Factorization of R(p) plus z = R^{-1} y and y^H R^{-1} y.
struct CovarianceSolve {
  HermitianFactorization factor;
  CVector z;
  double quad = 0.0;
};

CovarianceSolve solve_covariance(HermitianFactorization factor, const CVector& y) {
  CovarianceSolve out;
  CVector half = factor.factor().triangularView<Eigen::Lower>().solve(y);
  out.quad = half.squaredNorm();
  factor.factor().triangularView<Eigen::Lower>().adjoint().solveInPlace(half);
  out.z = std::move(half);
  out.factor = std::move(factor);
  return out;
}

}  // namespace

CMatrix assemble_covariance(const Dictionary& dict, const PowerEstimate& powers) {
  check_powers(dict, powers);
  const auto k = dict.num_atoms();
  const auto n = dict.num_samples();
  const CMatrix scaled = dict.atoms() * powers.p.head(k).cwiseSqrt().cast<cplx>().asDiagonal();
  CMatrix r = CMatrix::Zero(n, n);
  r.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
  r.diagonal().real() += powers.p.tail(n);
  r.diagonal().imag().setZero();
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) r(i, j) = std::conj(r(j, i));
  return r;
}

double cost_f(const CMatrix& r, const CVector& y, const JitterPolicy& jitter) {
  if (r.rows() != y.size()) throw Error(ErrorKind::DimensionMismatch, "cost_f: R and y disagree");
  const double y_sq = y.squaredNorm();
  const double quad = inverse_quadratic_form(factor_hpd(r, jitter), y);
  return y_sq * quad - 2.0 * y_sq + r.trace().real();
}

double cost_g(const CMatrix& r, const CVector& y, const Weights& w, const PowerEstimate& powers,
              const JitterPolicy& jitter) {
  if (r.rows() != y.size()) throw Error(ErrorKind::DimensionMismatch, "cost_g: R and y disagree");
  if (w.w.size() != powers.p.size())
    throw Error(ErrorKind::DimensionMismatch, "cost_g: weights and powers disagree");
  return inverse_quadratic_form(factor_hpd(r, jitter), y) + w.w.dot(powers.p);
}

PowerEstimate initial_powers(const Dictionary& dict, const CVector& y, const Weights& w,
                             NoiseModel variant, InitPolicy init) {
  const auto k = dict.num_atoms();
  const auto n = dict.num_samples();
  if (y.size() != n) throw Error(ErrorKind::DimensionMismatch, "measurement length differs from dictionary rows");
  if (w.w.size() != dict.num_extended()) throw Error(ErrorKind::DimensionMismatch, "weights must have K + N entries");
  PowerEstimate out;
  out.variant = variant;
  out.p.resize(k + n);
  if (init == InitPolicy::uniform) {
    out.p.setConstant(1.0 / w.w.sum());
    return out;
  }
  const double y_sq = y.squaredNorm();
  const double floor = 1e-8 * y_sq;
  const double nn = static_cast<double>(n);
  out.p.head(k) = (dict.atoms().adjoint() * y).cwiseAbs2() / (nn * nn);
  if (variant == NoiseModel::equal_variance)
    out.p.tail(n).setConstant(y_sq / nn);
  else
    out.p.tail(n) = y.cwiseAbs2();
  out.p = out.p.cwiseMax(floor);
  return out;
}

SpiceState make_initial_state(const Dictionary& dict, const CVector& y, const Weights& w,
                              PowerEstimate powers, const JitterPolicy& jitter) {
  check_powers(dict, powers);
  if ((powers.p.array() <= 0.0).any())
    throw Error(ErrorKind::NonFiniteInput, "initial powers must be strictly positive");
  auto solved = solve_covariance(factor_hpd(assemble_covariance(dict, powers), jitter), y);
  SpiceState state;
  state.g_value = solved.quad + w.w.dot(powers.p);
  state.powers = std::move(powers);
  state.covariance = std::move(solved.factor);
  return state;
}

SpiceState spice_step(const SpiceState& state, const Dictionary& dict, const CVector& y, const Weights& w,
                      const JitterPolicy& jitter) {
  const auto k = dict.num_atoms();
  const auto n = dict.num_samples();
  check_powers(dict, state.powers);
  if (y.size() != n) throw Error(ErrorKind::DimensionMismatch, "measurement length differs from dictionary rows");
  if (w.w.size() != k + n) throw Error(ErrorKind::DimensionMismatch, "weights must have K + N entries");

  HermitianFactorization factor = state.covariance.dim() == n
                                      ? state.covariance
                                      : factor_hpd(assemble_covariance(dict, state.powers), jitter);
  const CVector z = solve_hpd(factor, y);

  // |c_k| = w_k^{1/2} p_k |a_k^H R^{-1} y|
  RVector c_abs(k + n);
  c_abs.head(k) = (dict.atoms().adjoint() * z).cwiseAbs();
  c_abs.tail(n) = z.cwiseAbs();
  c_abs = c_abs.cwiseProduct(w.w.cwiseSqrt()).cwiseProduct(state.powers.p);

  RVector mass(k + n);  // new w_k p_k
  double rho = 0.0;
  if (state.powers.variant == NoiseModel::heteroscedastic) {
    rho = c_abs.sum();
    if (!(rho > 0.0) || !std::isfinite(rho)) throw Error(ErrorKind::ZeroRho, "SPICE normalizer is zero");
    mass = c_abs / rho;
  } else {
    const double nn = static_cast<double>(n);
    const double noise_block = std::sqrt(nn * c_abs.tail(n).squaredNorm());
    rho = c_abs.head(k).sum() + noise_block;
    if (!(rho > 0.0) || !std::isfinite(rho)) throw Error(ErrorKind::ZeroRho, "SPICE normalizer is zero");
    mass.head(k) = c_abs.head(k) / rho;
    mass.tail(n).setConstant(noise_block / (nn * rho));
  }

  SpiceState next;
  next.powers.variant = state.powers.variant;
  next.powers.p = mass.cwiseQuotient(w.w);
  for (auto& v : next.powers.p)
    if (v < kPowerUnderflow) v = 0.0;
  if (next.powers.variant == NoiseModel::equal_variance)
    next.powers.p.tail(n).setConstant(next.powers.p[k]);
  next.iteration = state.iteration + 1;
  next.rho = rho;

  auto solved = solve_covariance(factor_hpd(assemble_covariance(dict, next.powers), jitter), y);
  next.g_value = solved.quad + w.w.dot(next.powers.p);
  next.covariance = std::move(solved.factor);
  return next;
}

SpiceState spice_run(const Dictionary& dict, const CVector& y, const SpiceConfig& config) {
  const Weights w = compute_weights(dict, y);
  SpiceState state =
      make_initial_state(dict, y, w, initial_powers(dict, y, w, config.variant, config.init), config.jitter);
  const double eps = std::numeric_limits<double>::min();
  while (state.iteration < config.max_iters) {
    SpiceState next = spice_step(state, dict, y, w, config.jitter);
    const double change = (next.powers.p - state.powers.p).lpNorm<Eigen::Infinity>() /
                          std::max(state.powers.p.lpNorm<Eigen::Infinity>(), eps);
    next.converged = change < config.rel_tol;
    state = std::move(next);
    if (config.observer) config.observer(state);
    if (state.converged) break;
  }
  return state;
}

std::string spice_state_json(const SpiceState& state) {
  nlohmann::ordered_json j;
  j["iteration"] = state.iteration;
  j["g_value"] = state.g_value;
  j["rho"] = state.rho;
  j["converged"] = state.converged;
  j["variant"] = std::string(to_string(state.powers.variant));
  nlohmann::ordered_json p = nlohmann::ordered_json::object();
  for (Eigen::Index k = 0; k < state.powers.p.size(); ++k)
    if (state.powers.p[k] > 1e-12) p[std::to_string(k + 1)] = state.powers.p[k];
  j["p"] = std::move(p);
  return j.dump();
}

}  // namespace spicelab
