#pragma once

// Random instances and slow reference computations shared by the unit and
// acceptance tests. Nothing here calls into the Cholesky or ADMM code paths
// under test.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "spicelab/error.hpp"
#include "spicelab/model.hpp"
#include "spicelab/spice.hpp"
#include "spicelab/sparse_solvers.hpp"

namespace spicelab::testing {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Kind of the spicelab::Error thrown by fn; nullopt when nothing is thrown.
inline std::optional<ErrorKind> error_kind(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

struct RandomInstance {
  Dictionary dict;
  CVector y;
  std::vector<ActiveAtom> active;
};

inline Dictionary random_dictionary(Eigen::Index n, Eigen::Index k, std::uint64_t seed) {
  const auto t = uniform_time_samples(static_cast<std::size_t>(n), static_cast<double>(k), seed);
  std::vector<double> omega(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) omega[static_cast<std::size_t>(i)] = kTwoPi * static_cast<double>(i + 1) / static_cast<double>(k);
  return build_dictionary(t, omega);
}

/// N in [8, 16], grid in [16, 32], 1-3 lines with amplitude in [1, 3] and
/// noise variance 0.1 (SNR >= 10 dB).
inline RandomInstance small_instance(std::uint64_t seed) {
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(8 + std::floor(9 * rng.uniform()));
  const auto k = static_cast<Eigen::Index>(16 + std::floor(17 * rng.uniform()));
  const auto nact = static_cast<std::size_t>(1 + std::floor(3 * rng.uniform()));
  Dictionary dict = random_dictionary(n, k, seed * 3 + 1);
  std::vector<ActiveAtom> active;
  while (active.size() < nact) {
    const auto idx = static_cast<std::size_t>(1 + std::floor(static_cast<double>(k) * rng.uniform()));
    bool seen = false;
    for (const auto& a : active) seen = seen || a.grid_index == idx;
    if (!seen) active.push_back({idx, 1.0 + 2.0 * rng.uniform()});
  }
  const std::vector<double> var(static_cast<std::size_t>(n), 0.1);
  CVector y = simulate_measurement(dict, active, var, seed).y;
  return {std::move(dict), std::move(y), std::move(active)};
}

inline CVector random_cvector(Eigen::Index n, Rng& rng) {
  CVector v(n);
  for (auto& z : v) z = cplx(rng.normal(), rng.normal());
  return v;
}

inline CMatrix random_cmatrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  CMatrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = cplx(rng.normal(), rng.normal());
  return m;
}

/// R by explicit summation over all K + N extended atoms.
inline CMatrix naive_covariance(const Dictionary& dict, const RVector& p) {
  const Eigen::Index n = dict.num_samples(), k = dict.num_atoms();
  CMatrix r = CMatrix::Zero(n, n);
  for (Eigen::Index a = 0; a < k + n; ++a) {
    CVector atom = CVector::Zero(n);
    if (a < k) {
      for (Eigen::Index i = 0; i < n; ++i) atom[i] = std::polar(1.0, dict.freq_grid()[a] * dict.time_samples()[i]);
    } else {
      atom[a - k] = 1.0;
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) r(i, j) += p[a] * atom[i] * std::conj(atom[j]);
  }
  return r;
}

/// ||R^{-1/2}(yy^H - R)||_F^2 = tr(M R^{-1} M) with M = yy^H - R, via LU.
inline double direct_f(const CMatrix& r, const CVector& y) {
  const CMatrix m = y * y.adjoint() - r;
  const CMatrix x = r.fullPivLu().solve(m);
  return (m * x).trace().real();
}

/// y^H R^{-1} y + sum_k w_k p_k, via LU.
inline double direct_g(const CMatrix& r, const CVector& y, const RVector& w, const RVector& p) {
  const CVector x = r.fullPivLu().solve(y);
  return y.dot(x).real() + w.dot(p);
}

/// Exhaustive search of g over the normalized simplex restricted to `groups`:
/// each group carries a mass that is a multiple of 1/steps, split evenly over
/// its extended indices (p_k = mass / (|group| w_k)). `resolution` is the
/// largest change of g when one step of mass moves between two groups at the
/// minimizing grid point. Numerically singular covariances are skipped.
struct SimplexGrid {
  double min = std::numeric_limits<double>::infinity();
  double resolution = 0.0;
  std::vector<int> best;
  std::size_t points = 0;
};

inline SimplexGrid simplex_grid_search(const Dictionary& dict, const CVector& y, const RVector& w,
                                       const std::vector<std::vector<Eigen::Index>>& groups, int steps) {
  const Eigen::Index n = dict.num_samples(), k = dict.num_atoms();
  auto g_at = [&](const std::vector<int>& units) {
    CMatrix r = CMatrix::Zero(n, n);
    double trace_term = 0.0;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      if (units[gi] == 0) continue;
      const double mass = static_cast<double>(units[gi]) / steps / static_cast<double>(groups[gi].size());
      for (Eigen::Index idx : groups[gi]) {
        const double p = mass / w[idx];
        trace_term += mass;
        if (idx < k)
          r.noalias() += p * dict.atoms().col(idx) * dict.atoms().col(idx).adjoint();
        else
          r(idx - k, idx - k) += p;
      }
    }
    const Eigen::SelfAdjointEigenSolver<CMatrix> es(r);
    const RVector& ev = es.eigenvalues();
    if (ev[0] <= 1e-12 * ev[n - 1]) return std::numeric_limits<double>::infinity();
    const CVector z = es.eigenvectors().adjoint() * y;
    return z.cwiseAbs2().cwiseQuotient(ev).sum() + trace_term;
  };
  SimplexGrid out;
  std::vector<int> units(groups.size(), 0);
  std::function<void(std::size_t, int)> walk = [&](std::size_t gi, int left) {
    if (gi + 1 == groups.size()) {
      units[gi] = left;
      const double g = g_at(units);
      ++out.points;
      if (g < out.min) {
        out.min = g;
        out.best = units;
      }
      return;
    }
    for (int u = 0; u <= left; ++u) {
      units[gi] = u;
      walk(gi + 1, left - u);
    }
  };
  walk(0, steps);
  for (std::size_t a = 0; a < groups.size(); ++a)
    for (std::size_t b = 0; b < groups.size(); ++b) {
      if (a == b || out.best[a] == 0) continue;
      std::vector<int> nb = out.best;
      --nb[a];
      ++nb[b];
      const double g = g_at(nb);
      if (std::isfinite(g)) out.resolution = std::max(out.resolution, std::abs(g - out.min));
    }
  return out;
}

/// min sum_k |c_k|^2 / p_k subject to atoms * c = y, as a least-norm problem in
/// u = P^{-1/2} c solved by complete orthogonal decomposition.
inline double least_norm_value(const CMatrix& atoms, const RVector& p, const CVector& y) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) keep.push_back(i);
  CMatrix b(atoms.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j)
    b.col(static_cast<Eigen::Index>(j)) = std::sqrt(p[keep[j]]) * atoms.col(keep[j]);
  const CVector u = b.completeOrthogonalDecomposition().solve(y);
  return u.squaredNorm();
}

/// Primal-dual hybrid gradient on min_c loss(y - Phi c) + ||c||_1 with either the
/// modulus-sum loss or sqrt(N) ||.||_2. Returns the best primal iterate seen
/// and a certified dual lower bound.
struct PdhgBracket {
  CVector c;
  double primal = 0.0;
  double dual = 0.0;
};

inline PdhgBracket pdhg_reference(const CMatrix& phi, const CVector& y, bool sqrt_loss, int iters) {
  const Eigen::Index n = phi.rows(), k = phi.cols();
  const double opnorm = Eigen::JacobiSVD<CMatrix>(phi).singularValues()(0);
  const double tau = 0.9 / opnorm, sigma = 0.9 / opnorm;
  const double radius = sqrt_loss ? std::sqrt(static_cast<double>(n)) : 1.0;
  auto project_dual = [&](CVector s) {
    if (sqrt_loss) {
      const double nrm = s.norm();
      if (nrm > radius) s *= radius / nrm;
    } else {
      for (auto& z : s)
        if (std::abs(z) > 1.0) z /= std::abs(z);
    }
    return s;
  };
  auto objective = [&](const CVector& c) {
    const CVector r = y - phi * c;
    return (sqrt_loss ? radius * r.norm() : r.cwiseAbs().sum()) + c.cwiseAbs().sum();
  };
  CVector c = CVector::Zero(k), c_bar = c, s = CVector::Zero(n);
  PdhgBracket best{c, objective(c), 0.0};
  for (int it = 0; it < iters; ++it) {
    // Dual step on F*(s) with F(z) = loss(y - z): prox is a shift then projection.
    s = project_dual(s + sigma * (phi * c_bar - y));
    const CVector c_old = c;
    CVector v = c - tau * (phi.adjoint() * s);
    for (auto& z : v) {
      const double m = std::abs(z);
      z = m > tau ? z * (1.0 - tau / m) : cplx(0.0);
    }
    c = v;
    c_bar = 2.0 * c - c_old;
    if ((it + 1) % 100 == 0 || it + 1 == iters) {
      const double obj = objective(c);
      if (obj < best.primal) {
        best.primal = obj;
        best.c = c;
      }
      // Dual of the problem: max Re(t^H y) over admissible t with ||Phi^H t||_inf <= 1,
      // where t = -s. Rescale to feasibility for a certified lower bound.
      CVector t = -s;
      const double corr = (phi.adjoint() * t).cwiseAbs().maxCoeff();
      if (corr > 1.0) t /= corr;
      best.dual = std::max(best.dual, t.dot(y).real());
    }
  }
  return best;
}

}  // namespace spicelab::testing
