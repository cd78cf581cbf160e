#include "spicelab/equivalence.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "spicelab/error.hpp"

namespace spicelab {

ElfvingSolution elfving_min(const ScaledAtoms& atoms, const RVector& p_tilde, const CVector& y,
                            const JitterPolicy& jitter) {
  const auto n = atoms.num_samples();
  const auto k = atoms.num_atoms();
  if (y.size() != n || p_tilde.size() != k + n || atoms.phi.rows() != n)
    throw Error(ErrorKind::DimensionMismatch, "elfving_min: shapes of atoms, p~ and y disagree");
  if (!p_tilde.allFinite() || (p_tilde.array() < 0.0).any())
    throw Error(ErrorKind::NonFiniteInput, "elfving_min: p~ must be finite and nonnegative");
  if ((p_tilde.array() == 0.0).all()) throw Error(ErrorKind::EmptySupport, "elfving_min: p~ is identically zero");

  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < k; ++i)
    if (p_tilde[i] > 0.0) active.push_back(i);
  CMatrix scaled(n, static_cast<Eigen::Index>(active.size()));
  for (std::size_t j = 0; j < active.size(); ++j)
    scaled.col(static_cast<Eigen::Index>(j)) = atoms.phi.col(active[j]) * std::sqrt(p_tilde[active[j]]);

  CMatrix r = CMatrix::Zero(n, n);
  if (!active.empty()) r.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
  r.diagonal().real() += p_tilde.tail(n).cwiseProduct(atoms.identity_scale.cwiseAbs2());
  r.diagonal().imag().setZero();
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) r(i, j) = std::conj(r(j, i));

  const HermitianFactorization factor = factor_hpd(r, jitter);
  const CVector z = solve_hpd(factor, y);

  ElfvingSolution out;
  out.lambda = -2.0 * z;
  out.c = CVector::Zero(k + n);
  for (auto i : active) out.c[i] = p_tilde[i] * atoms.phi.col(i).dot(z);
  for (Eigen::Index j = 0; j < n; ++j)
    if (p_tilde[k + j] > 0.0) out.c[k + j] = p_tilde[k + j] * atoms.identity_scale[j] * z[j];
  out.value = allocation_cost(out.c, p_tilde);
  return out;
}

double allocation_cost(const CVector& c_full, const RVector& p_tilde) {
  if (c_full.size() != p_tilde.size())
    throw Error(ErrorKind::DimensionMismatch, "allocation_cost: c and p~ lengths differ");
  double total = 0.0;
  for (Eigen::Index i = 0; i < c_full.size(); ++i) {
    const double mag_sq = std::norm(c_full[i]);
    if (p_tilde[i] > 0.0)
      total += mag_sq / p_tilde[i];
    else if (mag_sq > 0.0)
      return std::numeric_limits<double>::infinity();
  }
  return total;
}

AllocationResult allocate_powers(const CVector& c_full, Eigen::Index num_signal, NoiseModel variant) {
  if (num_signal < 0 || num_signal > c_full.size())
    throw Error(ErrorKind::DimensionMismatch, "allocate_powers: signal count exceeds coefficient length");
  const RVector mag = c_full.cwiseAbs();
  if (mag.sum() == 0.0) throw Error(ErrorKind::AllZeroCoefficients, "allocate_powers: c = 0");

  AllocationResult out;
  out.variant = variant;
  if (variant == NoiseModel::heteroscedastic) {
    const double total = mag.sum();
    out.alpha = total * total;
    out.p_tilde = mag / total;
    out.p_prime = out.p_tilde;
    return out;
  }

  const auto k = num_signal;
  const auto n = c_full.size() - k;
  const double nn = static_cast<double>(n);
  const double noise_block = std::sqrt(nn * mag.tail(n).squaredNorm());
  const double root_alpha = mag.head(k).sum() + noise_block;
  out.alpha = root_alpha * root_alpha;
  out.p_prime.resize(k + 1);
  out.p_prime.head(k) = mag.head(k) / root_alpha;
  out.p_prime[k] = noise_block / root_alpha;
  out.p_tilde.resize(k + n);
  out.p_tilde.head(k) = out.p_prime.head(k);
  if (n > 0) out.p_tilde.tail(n).setConstant(out.p_prime[k] / nn);
  return out;
}

namespace {

void check_transform_inputs(const LassoSolution& sol, const Dictionary& dict, const CVector& y) {
  if (y.size() != dict.num_samples() || sol.residual.size() != dict.num_samples() ||
      sol.coefficients.c_tilde.size() != dict.num_atoms())
    throw Error(ErrorKind::DimensionMismatch, "transform: solution shape differs from dictionary");
  if (y.squaredNorm() == 0.0) throw Error(ErrorKind::DegenerateDenominator, "transform undefined for y = 0");
}

// The noise coefficients are the residual entries; when c_full is present the
// two descriptions must coincide.
void check_noise_coefficients(const LassoSolution& sol, Eigen::Index k) {
  if (!sol.coefficients.c_full) return;
  const CVector& full = *sol.coefficients.c_full;
  if (full.size() != k + sol.residual.size())
    throw Error(ErrorKind::DimensionMismatch, "transform: c_full has wrong length");
  const double scale = std::max(1.0, sol.residual.norm());
  if ((full.head(k) - sol.coefficients.c_tilde).norm() > 1e-10 * scale ||
      (full.tail(sol.residual.size()) - sol.residual).norm() > 1e-10 * scale)
    throw Error(ErrorKind::InconsistentSolution, "c_full disagrees with (c~, residual)");
}

}  // namespace

PowerEstimate theorem1_transform(const LassoSolution& normalized, const Dictionary& dict, const CVector& y) {
  check_transform_inputs(normalized, dict, y);
  const auto k = dict.num_atoms();
  const auto n = dict.num_samples();
  check_noise_coefficients(normalized, k);
  const double denom = l1_norm(normalized.coefficients.c_tilde) + l1_norm(normalized.residual);
  if (!(denom > 0.0)) throw Error(ErrorKind::DegenerateDenominator, "sum |c~| + sum |r| = 0");
  const double y_sq = y.squaredNorm();

  PowerEstimate out;
  out.variant = NoiseModel::heteroscedastic;
  out.p.resize(k + n);
  out.p.head(k) = y_sq * normalized.coefficients.c_tilde.cwiseAbs() / (static_cast<double>(n) * denom);
  out.p.tail(n) = y_sq * normalized.residual.cwiseAbs() / denom;
  return out;
}

PowerEstimate theorem2_transform(const LassoSolution& normalized, const Dictionary& dict, const CVector& y) {
  check_transform_inputs(normalized, dict, y);
  const auto k = dict.num_atoms();
  const auto n = dict.num_samples();
  check_noise_coefficients(normalized, k);
  const double nn = static_cast<double>(n);
  const double resid = normalized.residual.norm();
  const double denom = l1_norm(normalized.coefficients.c_tilde) + std::sqrt(nn) * resid;
  if (!(denom > 0.0)) throw Error(ErrorKind::DegenerateDenominator, "||c~||_1 + sqrt(N)||r|| = 0");
  const double y_sq = y.squaredNorm();

  PowerEstimate out;
  out.variant = NoiseModel::equal_variance;
  out.p.resize(k + n);
  out.p.head(k) = y_sq * normalized.coefficients.c_tilde.cwiseAbs() / (nn * denom);
  out.p.tail(n).setConstant(std::sqrt(nn) * y_sq * resid / (nn * denom));
  return out;
}

std::vector<Eigen::Index> support_set(const PowerEstimate& powers, const Weights& w, double threshold) {
  if (powers.p.size() != w.w.size()) throw Error(ErrorKind::DimensionMismatch, "support_set: length mismatch");
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < powers.p.size(); ++i)
    if (w.w[i] * powers.p[i] > threshold) out.push_back(i);
  return out;
}

double CertificationReport::g_relative_gap() const {
  return std::abs(g_spice - g_lasso) / std::max(std::abs(g_spice), std::abs(g_lasso));
}

CertificationReport certify_equivalence(const Dictionary& dict, const CVector& y, NoiseModel variant,
                                        const CertifyConfig& config) {
  using clock = std::chrono::steady_clock;
  const Weights w = compute_weights(dict, y);
  CertificationReport rep;
  rep.variant = variant;

  SpiceConfig spice_cfg = config.spice;
  spice_cfg.variant = variant;
  auto t0 = clock::now();
  const SpiceState state = spice_run(dict, y, spice_cfg);
  rep.spice_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  rep.p_spice = state.powers;
  rep.g_spice = state.g_value;
  rep.spice_converged = state.converged;
  rep.spice_iterations = state.iteration;

  t0 = clock::now();
  const ConstrainedL1Result l1 = solve_constrained_l1(scaled_atoms(dict, w), y, variant, config.solver);
  rep.p_lasso = variant == NoiseModel::heteroscedastic ? theorem1_transform(l1.normalized, dict, y)
                                                       : theorem2_transform(l1.normalized, dict, y);
  rep.lasso_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  rep.lasso_converged = l1.normalized.converged;
  rep.lasso_iterations = l1.normalized.iterations;
  rep.c_tilde = l1.coefficients.c_tilde;
  rep.g_lasso = cost_g(assemble_covariance(dict, rep.p_lasso), y, w, rep.p_lasso, config.spice.jitter);

  rep.support_spice = support_set(rep.p_spice, w, config.support_threshold);
  rep.support_lasso = support_set(rep.p_lasso, w, config.support_threshold);
  rep.linf_power_gap =
      (w.w.cwiseProduct(rep.p_spice.p) - w.w.cwiseProduct(rep.p_lasso.p)).lpNorm<Eigen::Infinity>();
  const auto k = dict.num_atoms();
  rep.noise_power_spice = rep.p_spice.noise(k).mean();
  rep.noise_power_lasso = rep.p_lasso.noise(k).mean();
  return rep;
}

std::string certification_json(const CertificationReport& report, bool include_runtimes) {
  auto one_based = [](const std::vector<Eigen::Index>& s) {
    std::vector<Eigen::Index> out;
    for (auto i : s) out.push_back(i + 1);
    return out;
  };
  nlohmann::ordered_json j;
  j["variant"] = std::string(to_string(report.variant));
  j["support_spice"] = one_based(report.support_spice);
  j["support_lasso"] = one_based(report.support_lasso);
  j["supports_agree"] = report.supports_agree();
  j["g_spice"] = report.g_spice;
  j["g_lasso"] = report.g_lasso;
  j["g_relative_gap"] = report.g_relative_gap();
  j["linf_power_gap"] = report.linf_power_gap;
  j["noise_power_spice"] = report.noise_power_spice;
  j["noise_power_lasso"] = report.noise_power_lasso;
  j["spice_converged"] = report.spice_converged;
  j["spice_iterations"] = report.spice_iterations;
  j["lasso_converged"] = report.lasso_converged;
  j["lasso_iterations"] = report.lasso_iterations;
  if (include_runtimes)
    j["runtimes"] = {{"spice_seconds", report.spice_seconds}, {"lasso_seconds", report.lasso_seconds}};
  return j.dump(2);
}

}  // namespace spicelab
