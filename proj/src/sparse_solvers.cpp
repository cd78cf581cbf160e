#include "spicelab/sparse_solvers.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "spicelab/error.hpp"

namespace spicelab {

cplx complex_soft_threshold(cplx z, double tau) {
  const double mag = std::abs(z);
  return mag > tau ? z * (1.0 - tau / mag) : cplx{0.0, 0.0};
}

RVector block_soft_threshold(const RVector& v, double tau) {
  const double mag = v.norm();
  return mag > tau ? RVector(v * (1.0 - tau / mag)) : RVector(RVector::Zero(v.size()));
}

namespace {

CVector shrink_blockwise(const CVector& v, double tau) {
  const double mag = v.norm();
  return mag > tau ? CVector(v * (1.0 - tau / mag)) : CVector(CVector::Zero(v.size()));
}

void check_shapes(const CMatrix& phi, const CVector& y) {
  if (phi.rows() != y.size())
    throw Error(ErrorKind::DimensionMismatch, "regressor rows differ from measurement length");
  if (!phi.allFinite() || !y.allFinite()) throw Error(ErrorKind::NonFiniteInput, "solver inputs contain NaN/Inf");
}

// Applies (I + Phi^H Phi)^{-1}, factoring whichever Gram matrix is smaller.
class RidgeSolver {
 public:
  explicit RidgeSolver(const CMatrix& phi) : phi_(phi), primal_(phi.cols() <= phi.rows()) {
    if (primal_) {
      CMatrix gram = phi.adjoint() * phi;
      gram.diagonal().array() += 1.0;
      factor_ = factor_hpd(make_hermitian(gram));
    } else {
      CMatrix gram = phi * phi.adjoint();
      gram.diagonal().array() += 1.0;
      factor_ = factor_hpd(make_hermitian(gram));
    }
  }

  CVector apply(const CVector& b) const {
    if (primal_) return solve_hpd(factor_, b);
    return b - phi_.adjoint() * solve_hpd(factor_, CVector(phi_ * b));
  }

 private:
  static CMatrix make_hermitian(CMatrix m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(j, j) = m(j, j).real();
      for (Eigen::Index i = j + 1; i < m.rows(); ++i) m(j, i) = std::conj(m(i, j));
    }
    return m;
  }

  const CMatrix& phi_;
  bool primal_;
  HermitianFactorization factor_;
};

enum class Loss { lad, sqrt_l2 };

double loss_value(Loss loss, const CVector& r) {
  return loss == Loss::lad ? l1_norm(r) : std::sqrt(static_cast<double>(r.size())) * r.norm();
}

// ADMM on  min h(z) + ||x||_1  s.t.  Phi c + z = y,  c = x.
LassoSolution admm_solve(Loss loss, const CMatrix& phi, const CVector& y, const SolverConfig& cfg) {
  check_shapes(phi, y);
  const auto n = phi.rows();
  const auto k = phi.cols();
  const double y_norm = y.norm();

  LassoSolution sol;
  sol.coefficients.c_tilde = CVector::Zero(k);
  sol.residual = y;
  sol.objective = loss_value(loss, y);
  sol.loss_subgradient = CVector::Zero(n);
  if (y_norm == 0.0 || k == 0) {
    sol.converged = true;
    return sol;
  }
  if (!(cfg.relaxation > 0.0 && cfg.relaxation < 2.0) || !(cfg.penalty > 0.0))
    throw Error(ErrorKind::InvalidConfig, "ADMM needs penalty > 0 and relaxation in (0, 2)");

  const double rho = cfg.penalty * static_cast<double>(n) / y_norm;
  const double alpha = cfg.relaxation;
  const double loss_scale = loss == Loss::lad ? 1.0 : std::sqrt(static_cast<double>(n));
  const double zero_tol = 1e-7 * y.cwiseAbs().maxCoeff();
  const RidgeSolver ridge(phi);

  auto kkt = [&](const CVector& coef, const CVector& s) {
    return loss == Loss::lad ? lad_kkt_violation(phi, y, coef, s, zero_tol)
                             : sqrt_kkt_violation(phi, y, coef, s, zero_tol);
  };

  CVector c = CVector::Zero(k), x = CVector::Zero(k), v = CVector::Zero(k);
  CVector z = y, u = CVector::Zero(n);
  CVector best_x = x;
  double best_obj = sol.objective;
  const std::size_t check_every = std::max<std::size_t>(cfg.check_every, 1);

  std::size_t it = 0;
  for (; it < cfg.max_iters; ++it) {
    c = ridge.apply(phi.adjoint() * (y - z - u) + (x - v));
    const CVector phi_c = phi * c;
    const CVector hz = alpha * phi_c + (1.0 - alpha) * (y - z);
    const CVector hx = alpha * c + (1.0 - alpha) * x;

    const CVector z_old = z;
    const CVector x_old = x;
    const CVector z_arg = y - hz - u;
    if (loss == Loss::lad) {
      for (Eigen::Index i = 0; i < n; ++i) z[i] = complex_soft_threshold(z_arg[i], 1.0 / rho);
    } else {
      z = shrink_blockwise(z_arg, loss_scale / rho);
    }
    const CVector x_arg = hx + v;
    for (Eigen::Index i = 0; i < k; ++i) x[i] = complex_soft_threshold(x_arg[i], 1.0 / rho);
    u += hz + z - y;
    v += hx - x;

    if ((it + 1) % check_every != 0) continue;

    const double obj = loss_value(loss, y - phi * x) + l1_norm(x);
    if (obj < best_obj) {
      best_obj = obj;
      best_x = x;
    }
    const double r_pri = std::sqrt((phi_c + z - y).squaredNorm() + (c - x).squaredNorm());
    const double r_dual = rho * (phi.adjoint() * (z - z_old) - (x - x_old)).norm();
    const double eps_pri =
        std::sqrt(static_cast<double>(n + k)) * cfg.eps_abs +
        cfg.eps_rel * std::max({std::sqrt(phi_c.squaredNorm() + c.squaredNorm()),
                                std::sqrt(z.squaredNorm() + x.squaredNorm()), y_norm});
    const double eps_dual = std::sqrt(static_cast<double>(k)) * cfg.eps_abs +
                            cfg.eps_rel * rho * (phi.adjoint() * u + v).norm();
    sol.primal_residual = r_pri;
    sol.dual_residual = r_dual;
    if (r_pri <= eps_pri && r_dual <= eps_dual) {
      const CVector s = -rho * u;
      const double violation = kkt(x, s);
      if (violation <= cfg.kkt_tol) {
        sol.converged = true;
        sol.kkt_violation = violation;
        sol.loss_subgradient = s;
        best_x = x;
        ++it;
        break;
      }
    }
  }

  sol.iterations = it;
  sol.coefficients.c_tilde = sol.converged ? x : best_x;
  sol.residual = y - phi * sol.coefficients.c_tilde;
  sol.objective = loss_value(loss, sol.residual) + l1_norm(sol.coefficients.c_tilde);
  if (!sol.converged) {
    sol.loss_subgradient = -rho * u;
    sol.kkt_violation = kkt(sol.coefficients.c_tilde, sol.loss_subgradient);
  }
  return sol;
}

// Max violation of t = Phi^H s lying in the subdifferential of ||c||_1.
double coefficient_violation(const CMatrix& phi, const CVector& c, const CVector& s, double zero_tol) {
  const CVector t = phi.adjoint() * s;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const double mag = std::abs(c[i]);
    const double viol = mag > zero_tol ? std::abs(t[i] - c[i] / mag) : std::max(0.0, std::abs(t[i]) - 1.0);
    worst = std::max(worst, viol);
  }
  return worst;
}

}  // namespace

double lad_objective(const CMatrix& phi, const CVector& y, const CVector& c) {
  check_shapes(phi, y);
  return l1_norm(y - phi * c) + l1_norm(c);
}

double sqrt_lasso_objective(const CMatrix& phi, const CVector& y, const CVector& c) {
  check_shapes(phi, y);
  return std::sqrt(static_cast<double>(y.size())) * (y - phi * c).norm() + l1_norm(c);
}

double lad_kkt_violation(const CMatrix& phi, const CVector& y, const CVector& c, const CVector& s,
                         double zero_tol) {
  check_shapes(phi, y);
  const CVector r = y - phi * c;
  CVector sub(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double mag = std::abs(r[i]);
    if (mag > zero_tol) {
      sub[i] = r[i] / mag;
    } else {
      const double sm = std::abs(s[i]);
      sub[i] = sm > 1.0 ? s[i] / sm : s[i];
    }
  }
  return coefficient_violation(phi, c, sub, zero_tol);
}

double sqrt_kkt_violation(const CMatrix& phi, const CVector& y, const CVector& c, const CVector& s,
                          double zero_tol) {
  check_shapes(phi, y);
  const double scale = std::sqrt(static_cast<double>(y.size()));
  const CVector r = y - phi * c;
  const double r_norm = r.norm();
  CVector sub;
  if (r_norm > zero_tol) {
    sub = scale * r / r_norm;
  } else {
    const double sn = s.norm();
    sub = sn > scale ? CVector(s * (scale / sn)) : s;
  }
  return coefficient_violation(phi, c, sub, zero_tol);
}

LassoSolution solve_lad_lasso(const CMatrix& phi, const CVector& y, const SolverConfig& config) {
  return admm_solve(Loss::lad, phi, y, config);
}

LassoSolution solve_sqrt_lasso(const CMatrix& phi, const CVector& y, const SolverConfig& config) {
  return admm_solve(Loss::sqrt_l2, phi, y, config);
}

ConstrainedL1Result solve_constrained_l1(const ScaledAtoms& atoms, const CVector& y, NoiseModel variant,
                                         const SolverConfig& config) {
  const auto n = atoms.num_samples();
  const auto k = atoms.num_atoms();
  if (atoms.phi.rows() != n || y.size() != n)
    throw Error(ErrorKind::DimensionMismatch, "scaled atoms and measurement disagree in length");
  const double y_norm = y.norm();
  if (!(y_norm > 0.0)) throw Error(ErrorKind::ZeroMeasurement, "constrained L1 problem needs y != 0");
  if ((atoms.identity_scale.array() <= 0.0).any())
    throw Error(ErrorKind::ZeroWeight, "identity atoms must have positive scale");

  // Row-scale by 1 / identity_scale so the eliminated noise coefficients are
  // exactly the residual of the unconstrained problem.
  const RVector inv_scale = atoms.identity_scale.cwiseInverse();
  const CMatrix phi_n = inv_scale.cast<cplx>().asDiagonal() * atoms.phi;
  const CVector y_n = inv_scale.cast<cplx>().cwiseProduct(y);

  ConstrainedL1Result out;
  out.measurement_norm = y_norm;
  out.normalized = variant == NoiseModel::heteroscedastic ? solve_lad_lasso(phi_n, y_n, config)
                                                          : solve_sqrt_lasso(phi_n, y_n, config);
  CVector full(k + n);
  full.head(k) = out.normalized.coefficients.c_tilde;
  full.tail(n) = out.normalized.residual;
  out.normalized.coefficients.c_full = full;
  out.coefficients.c_tilde = out.normalized.coefficients.c_tilde;
  out.coefficients.c_full = std::move(full);
  return out;
}

RealEmbedding real_embedding(const CMatrix& phi, const CVector& y) {
  check_shapes(phi, y);
  const auto n = phi.rows();
  const auto k = phi.cols();
  RealEmbedding out;
  out.phi.resize(2 * n, 2 * k);
  out.phi.topLeftCorner(n, k) = phi.real();
  out.phi.topRightCorner(n, k) = -phi.imag();
  out.phi.bottomLeftCorner(n, k) = phi.imag();
  out.phi.bottomRightCorner(n, k) = phi.real();
  out.y = embed_vector(y);
  return out;
}

RVector embed_vector(const CVector& v) {
  RVector out(2 * v.size());
  out << v.real(), v.imag();
  return out;
}

CVector unembed_vector(const RVector& v) {
  if (v.size() % 2 != 0) throw Error(ErrorKind::DimensionMismatch, "embedded vector has odd length");
  const auto k = v.size() / 2;
  CVector out(k);
  for (Eigen::Index i = 0; i < k; ++i) out[i] = {v[i], v[i + k]};
  return out;
}

std::vector<std::vector<Eigen::Index>> complex_pair_groups(Eigen::Index num_complex) {
  std::vector<std::vector<Eigen::Index>> groups;
  groups.reserve(static_cast<std::size_t>(num_complex));
  for (Eigen::Index k = 0; k < num_complex; ++k) groups.push_back({k, k + num_complex});
  return groups;
}

namespace {

void check_groups(const std::vector<std::vector<Eigen::Index>>& groups, Eigen::Index dim) {
  std::vector<int> seen(static_cast<std::size_t>(dim), 0);
  for (const auto& g : groups)
    for (auto i : g) {
      if (i < 0 || i >= dim) throw Error(ErrorKind::IndexOutOfRange, "group index outside coefficient range");
      ++seen[static_cast<std::size_t>(i)];
    }
  if (std::any_of(seen.begin(), seen.end(), [](int s) { return s != 1; }))
    throw Error(ErrorKind::InvalidConfig, "groups must partition the coefficients");
}

RVector group_shrink(const RVector& v, const std::vector<std::vector<Eigen::Index>>& groups, double tau) {
  RVector out(v.size());
  RVector block;
  for (const auto& g : groups) {
    block.resize(static_cast<Eigen::Index>(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) block[static_cast<Eigen::Index>(i)] = v[g[i]];
    block = block_soft_threshold(block, tau);
    for (std::size_t i = 0; i < g.size(); ++i) out[g[i]] = block[static_cast<Eigen::Index>(i)];
  }
  return out;
}

}  // namespace

double group_lasso_objective(const RMatrix& phi, const RVector& y,
                             const std::vector<std::vector<Eigen::Index>>& groups, const RVector& c) {
  double penalty = 0.0;
  for (const auto& g : groups) {
    double sq = 0.0;
    for (auto i : g) sq += c[i] * c[i];
    penalty += std::sqrt(sq);
  }
  return std::sqrt(static_cast<double>(y.size()) / 2.0) * (y - phi * c).norm() + penalty;
}

// Plain (unrelaxed) ADMM in real arithmetic on
//   min w ||r||_2 + sum_g ||x_g||_2  s.t.  Phi c + r = y,  c = x.
GroupLassoSolution solve_group_lasso_real(const RMatrix& phi, const RVector& y,
                                          const std::vector<std::vector<Eigen::Index>>& groups,
                                          const SolverConfig& config) {
  if (phi.rows() != y.size() || y.size() % 2 != 0)
    throw Error(ErrorKind::DimensionMismatch, "real embedding must have 2N rows matching y_R");
  const auto m = phi.rows();
  const auto d = phi.cols();
  check_groups(groups, d);

  GroupLassoSolution sol;
  sol.coefficients = RVector::Zero(d);
  const double y_norm = y.norm();
  const double loss_weight = std::sqrt(static_cast<double>(m) / 2.0);
  sol.objective = loss_weight * y_norm;
  if (y_norm == 0.0 || d == 0) {
    sol.converged = true;
    return sol;
  }

  const double rho = 0.5 * config.penalty * static_cast<double>(m / 2) / y_norm;
  Eigen::LLT<RMatrix> gram;
  const bool primal = d <= m;
  if (primal) {
    RMatrix g = phi.transpose() * phi;
    g.diagonal().array() += 1.0;
    gram.compute(g);
  } else {
    RMatrix g = phi * phi.transpose();
    g.diagonal().array() += 1.0;
    gram.compute(g);
  }
  if (gram.info() != Eigen::Success) throw Error(ErrorKind::NonFactorizable, "group Lasso Gram matrix");
  auto ridge = [&](const RVector& b) -> RVector {
    if (primal) return gram.solve(b);
    return b - phi.transpose() * gram.solve(phi * b);
  };

  RVector c = RVector::Zero(d), x = RVector::Zero(d), v = RVector::Zero(d);
  RVector r = y, u = RVector::Zero(m);
  const std::size_t check_every = std::max<std::size_t>(config.check_every, 1);
  std::size_t it = 0;
  for (; it < config.max_iters; ++it) {
    c = ridge(phi.transpose() * (y - r - u) + (x - v));
    const RVector phi_c = phi * c;
    const RVector r_old = r, x_old = x;
    r = block_soft_threshold(y - phi_c - u, loss_weight / rho);
    x = group_shrink(c + v, groups, 1.0 / rho);
    u += phi_c + r - y;
    v += c - x;
    if ((it + 1) % check_every != 0) continue;
    const double r_pri = std::sqrt((phi_c + r - y).squaredNorm() + (c - x).squaredNorm());
    const double r_dual = rho * (phi.transpose() * (r - r_old) - (x - x_old)).norm();
    const double eps_pri = std::sqrt(static_cast<double>(m + d)) * config.eps_abs +
                           config.eps_rel * std::max({std::sqrt(phi_c.squaredNorm() + c.squaredNorm()),
                                                      std::sqrt(r.squaredNorm() + x.squaredNorm()), y_norm});
    const double eps_dual = std::sqrt(static_cast<double>(d)) * config.eps_abs +
                            config.eps_rel * rho * (phi.transpose() * u + v).norm();
    if (r_pri <= eps_pri && r_dual <= eps_dual) {
      sol.converged = true;
      ++it;
      break;
    }
  }
  sol.iterations = it;
  sol.coefficients = x;
  sol.objective = group_lasso_objective(phi, y, groups, x);
  return sol;
}

std::string lasso_solution_json(const LassoSolution& sol) {
  nlohmann::ordered_json j;
  j["objective"] = sol.objective;
  j["iterations"] = sol.iterations;
  j["converged"] = sol.converged;
  j["kkt_violation"] = sol.kkt_violation;
  auto support = nlohmann::ordered_json::array();
  const CVector& c = sol.coefficients.c_tilde;
  for (Eigen::Index k = 0; k < c.size(); ++k)
    if (std::abs(c[k]) > 1e-12) support.push_back({k + 1, c[k].real(), c[k].imag()});
  j["support"] = std::move(support);
  return j.dump();
}

}  // namespace spicelab
