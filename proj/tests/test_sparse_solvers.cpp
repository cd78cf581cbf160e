#include <doctest.h>

#include <json.hpp>

#include "spicelab/sparse_solvers.hpp"
#include "support.hpp"

using namespace spicelab;
using namespace spicelab::testing;

namespace {

SolverConfig tight() {
  SolverConfig c;
  c.eps_abs = 1e-12;
  c.eps_rel = 1e-11;
  c.kkt_tol = 1e-9;
  return c;
}

// Regressors with column norm ||y|| as produced by the scaled dictionary.
struct Problem {
  CMatrix phi;
  CVector y;
};

Problem scaled_problem(std::uint64_t seed) {
  const auto inst = small_instance(seed);
  const auto atoms = scaled_atoms(inst.dict, compute_weights(inst.dict, inst.y));
  const double ny = inst.y.norm();
  return {atoms.phi / ny, inst.y / ny};
}

Problem random_problem(Eigen::Index n, Eigen::Index k, std::uint64_t seed) {
  Rng rng(seed);
  CVector y = random_cvector(n, rng);
  CMatrix phi = random_cmatrix(n, k, rng);
  for (Eigen::Index j = 0; j < k; ++j) phi.col(j) *= y.norm() / phi.col(j).norm();
  return {phi, y};
}

}  // namespace

TEST_CASE("zero measurement gives the zero solution") {
  const auto pr = random_problem(5, 3, 1);
  const CVector zero = CVector::Zero(5);
  for (const auto& sol : {solve_lad_lasso(pr.phi, zero), solve_sqrt_lasso(pr.phi, zero)}) {
    CHECK(sol.coefficients.c_tilde.isZero(0.0));
    CHECK(sol.objective == 0.0);
    CHECK(sol.converged);
  }
  RVector yr = RVector::Zero(10);
  const auto emb = real_embedding(pr.phi, zero);
  const auto g = solve_group_lasso_real(emb.phi, yr, complex_pair_groups(3));
  CHECK(g.coefficients.isZero(0.0));
}

TEST_CASE("scalar LAD-Lasso by hand") {
  CMatrix phi(1, 1);
  phi(0, 0) = 2.0;
  CVector y(1);
  y[0] = 2.0;
  const auto sol = solve_lad_lasso(phi, y, tight());
  CHECK(std::abs(sol.coefficients.c_tilde[0] - cplx(1.0)) < 1e-7);
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(lad_objective(phi, y, CVector::Zero(1)) == doctest::Approx(2.0));
}

TEST_CASE("LAD-Lasso objective is bracketed by an independent primal-dual run") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto pr = random_problem(6, 4, seed);
    const auto sol = solve_lad_lasso(pr.phi, pr.y, tight());
    const auto ref = pdhg_reference(pr.phi, pr.y, false, 400000);
    CHECK(sol.converged);
    CHECK(ref.primal - ref.dual < 1e-6);
    CHECK(sol.objective >= ref.dual - 1e-9);
    CHECK(std::abs(sol.objective - ref.primal) < 1e-6);
  }
}

TEST_CASE("square-root Lasso objective is bracketed by an independent primal-dual run") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto pr = random_problem(6, 4, 50 + seed);
    const auto sol = solve_sqrt_lasso(pr.phi, pr.y, tight());
    const auto ref = pdhg_reference(pr.phi, pr.y, true, 400000);
    CHECK(sol.converged);
    CHECK(ref.primal - ref.dual < 1e-6);
    CHECK(sol.objective >= ref.dual - 1e-9);
    CHECK(std::abs(sol.objective - ref.primal) < 1e-6);
  }
}

TEST_CASE("noiseless single atom over orthogonal regressors") {
  // Orthogonal DFT columns scaled to norm ||y||; y = phi_1 exactly.
  const Eigen::Index n = 8, k = 4;
  CMatrix f(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) f(i, j) = std::polar(1.0 / std::sqrt(8.0), kTwoPi * i * j / 8.0);
  const double s = 5.0;
  const CMatrix phi = s * f;
  const CVector y = phi.col(1);
  const auto sol = solve_sqrt_lasso(phi, y, tight());
  const CVector& c = sol.coefficients.c_tilde;
  CHECK(std::abs(c[1] - cplx(1.0)) < 1e-7);
  for (Eigen::Index j : {0, 2, 3}) CHECK(std::abs(c[j]) < 1e-8);
  // The 1-D line through the optimum along atom 1 is minimized at c_1 = 1.
  for (double t : {0.9, 0.99, 1.01, 1.1}) {
    CVector probe = CVector::Zero(k);
    probe[1] = t;
    CHECK(sqrt_lasso_objective(phi, y, probe) > sol.objective);
  }
}

TEST_CASE("solutions satisfy the returned-value invariants") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto pr = scaled_problem(seed);
    const double n = static_cast<double>(pr.y.size());
    for (bool sq : {false, true}) {
      const auto sol = sq ? solve_sqrt_lasso(pr.phi, pr.y) : solve_lad_lasso(pr.phi, pr.y);
      const CVector& c = sol.coefficients.c_tilde;
      CHECK(sol.converged);
      CHECK((sol.residual - (pr.y - pr.phi * c)).norm() < 1e-12 * pr.y.norm() + 1e-14);
      const double obj = sq ? sqrt_lasso_objective(pr.phi, pr.y, c) : lad_objective(pr.phi, pr.y, c);
      CHECK(sol.objective == doctest::Approx(obj).epsilon(1e-9));
      const double at_zero = sq ? std::sqrt(n) * pr.y.norm() : pr.y.cwiseAbs().sum();
      CHECK(sol.objective <= at_zero);
      const double kkt = sq ? sqrt_kkt_violation(pr.phi, pr.y, c, sol.loss_subgradient, 1e-7)
                            : lad_kkt_violation(pr.phi, pr.y, c, sol.loss_subgradient, 1e-7);
      CHECK(kkt < 1e-6);
      Rng rng(seed);
      for (int trial = 0; trial < 5; ++trial) {
        const CVector other = c + random_cvector(c.size(), rng) * 0.1;
        const CVector mid = (c + other) / 2.0;
        const double mid_obj = sq ? sqrt_lasso_objective(pr.phi, pr.y, mid) : lad_objective(pr.phi, pr.y, mid);
        CHECK(mid_obj >= sol.objective - 1e-8);
      }
    }
  }
}

TEST_CASE("constrained form: feasibility, objective identity, trivial case") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto inst = small_instance(seed);
    const auto atoms = scaled_atoms(inst.dict, compute_weights(inst.dict, inst.y));
    for (auto variant : {NoiseModel::heteroscedastic, NoiseModel::equal_variance}) {
      const auto res = solve_constrained_l1(atoms, inst.y, variant);
      REQUIRE(res.coefficients.c_full);
      const CVector& full = *res.coefficients.c_full;
      CHECK((atoms.synthesize(full) - inst.y).norm() / inst.y.norm() < 1e-9);
      CHECK((atoms.dense() * full - inst.y).norm() / inst.y.norm() < 1e-9);
      CHECK(res.measurement_norm == doctest::Approx(inst.y.norm()));
      const auto k = inst.dict.num_atoms();
      if (variant == NoiseModel::heteroscedastic) {
        CHECK(full.cwiseAbs().sum() == doctest::Approx(res.normalized.objective).epsilon(1e-9));
      } else {
        const double n = static_cast<double>(inst.y.size());
        const double cost = full.head(k).cwiseAbs().sum() + std::sqrt(n * full.tail(full.size() - k).squaredNorm());
        CHECK(cost == doctest::Approx(res.normalized.objective).epsilon(1e-9));
      }
    }
  }

  const Dictionary one(RVector::Zero(1), RVector(0), CMatrix(1, 0));
  CVector y(1);
  y << cplx(0.6, -0.8);
  const auto atoms = scaled_atoms(one, compute_weights(one, y));
  const auto res = solve_constrained_l1(atoms, y, NoiseModel::heteroscedastic);
  REQUIRE(res.coefficients.c_full);
  CHECK(res.coefficients.c_full->size() == 1);
  CHECK(std::abs((*res.coefficients.c_full)[0] * atoms.identity_scale[0] - y[0]) < 1e-15);

  CHECK(error_kind([&] { solve_constrained_l1(atoms, CVector::Zero(1), NoiseModel::heteroscedastic); }) ==
        ErrorKind::ZeroMeasurement);
}

TEST_CASE("real embedding layout") {
  Rng rng(2);
  const CMatrix phi = random_cmatrix(3, 2, rng);
  const CVector y = random_cvector(3, rng);
  const auto e = real_embedding(phi, y);
  REQUIRE(e.phi.rows() == 6);
  REQUIRE(e.phi.cols() == 4);
  CHECK(e.phi.topLeftCorner(3, 2) == phi.real());
  CHECK(e.phi.topRightCorner(3, 2) == -phi.imag());
  CHECK(e.phi.bottomLeftCorner(3, 2) == phi.imag());
  CHECK(e.phi.bottomRightCorner(3, 2) == phi.real());
  CHECK(e.y.norm() == doctest::Approx(y.norm()).epsilon(1e-15));
  const CVector c = random_cvector(2, rng);
  CHECK((e.phi * embed_vector(c) - embed_vector(phi * c)).norm() < 1e-13);
  CHECK(unembed_vector(embed_vector(c)) == c);

  const auto r = real_embedding(phi.real().cast<cplx>(), y.real().cast<cplx>());
  CHECK(e.phi.topRightCorner(3, 2).norm() > 0.0);
  CHECK(r.phi.topRightCorner(3, 2).isZero(0.0));
  CHECK(r.phi.bottomLeftCorner(3, 2).isZero(0.0));
  CHECK(r.phi.topLeftCorner(3, 2) == r.phi.bottomRightCorner(3, 2));

  const auto groups = complex_pair_groups(3);
  REQUIRE(groups.size() == 3);
  CHECK(groups[1] == std::vector<Eigen::Index>{1, 4});
}

TEST_CASE("group Lasso agrees with the complex square-root Lasso") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto pr = scaled_problem(seed);
    const auto cx = solve_sqrt_lasso(pr.phi, pr.y, tight());
    const auto e = real_embedding(pr.phi, pr.y);
    const auto groups = complex_pair_groups(pr.phi.cols());
    const auto re = solve_group_lasso_real(e.phi, e.y, groups, tight());
    CHECK(re.converged);
    const CVector back = unembed_vector(re.coefficients);
    CHECK((back - cx.coefficients.c_tilde).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(re.objective == doctest::Approx(cx.objective).epsilon(1e-8));
    for (Eigen::Index k = 0; k < back.size(); ++k) {
      const bool complex_zero = std::abs(cx.coefficients.c_tilde[k]) < 1e-8;
      const bool group_zero = std::hypot(re.coefficients[k], re.coefficients[k + back.size()]) < 1e-8;
      CHECK(complex_zero == group_zero);
    }
  }
}

TEST_CASE("prox operators by hand") {
  RVector v(2);
  v << 3.0, 4.0;
  const RVector s = block_soft_threshold(v, 1.0);
  CHECK(s[0] == doctest::Approx(2.4));
  CHECK(s[1] == doctest::Approx(3.2));
  CHECK(block_soft_threshold(v, 5.0).isZero(0.0));
  CHECK(block_soft_threshold(v, 6.0).isZero(0.0));

  // One group over two rows: sqrt(rows / 2) = 1.
  RMatrix phi = RMatrix::Identity(2, 2);
  RVector y(2);
  y << 3.0, 4.0;
  const auto g = solve_group_lasso_real(phi, y, {{0, 1}}, tight());
  // min ||y - c|| + ||c||: any c = t y, t in [0, 1] is optimal; objective ||y|| = 5.
  CHECK(g.objective == doctest::Approx(5.0).epsilon(1e-8));

  const cplx z(3.0, 4.0);
  CHECK(std::abs(complex_soft_threshold(z, 1.0) - cplx(2.4, 3.2)) < 1e-15);
  CHECK(complex_soft_threshold(z, 5.0) == cplx(0.0));
}

TEST_CASE("solution JSON lists nonzero coefficients with 1-based indices") {
  const auto pr = scaled_problem(3);
  const auto sol = solve_lad_lasso(pr.phi, pr.y);
  const auto j = nlohmann::json::parse(lasso_solution_json(sol));
  CHECK(j["objective"].get<double>() == sol.objective);
  CHECK(j["iterations"].get<std::size_t>() == sol.iterations);
  for (const auto& entry : j["support"]) {
    const auto idx = entry[0].get<Eigen::Index>();
    REQUIRE(idx >= 1);
    const cplx c = sol.coefficients.c_tilde[idx - 1];
    CHECK(entry[1].get<double>() == c.real());
    CHECK(entry[2].get<double>() == c.imag());
  }
}
