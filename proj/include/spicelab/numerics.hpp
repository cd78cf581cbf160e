#pragma once

// Dense complex linear algebra used throughout spicelab: Hermitian
// positive-definite factorization with a diagonal-jitter fallback, solves,
// and a handful of norms.

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace spicelab {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Diagonal loading applied when a Cholesky sweep breaks down. The first
/// retry adds `initial_scale * trace(M) / dim` to the diagonal; each further
/// retry multiplies the load by `growth`, for at most `max_escalations`
/// escalations after the first retry.
struct JitterPolicy {
  double initial_scale = 1e-12;
  double growth = 10.0;
  int max_escalations = 3;
};

/// Lower Cholesky factor L with L L^H = M + jitter_applied * I.
class HermitianFactorization {
 public:
  HermitianFactorization() = default;
  HermitianFactorization(CMatrix lower, double jitter_applied)
      : lower_(std::move(lower)), jitter_(jitter_applied) {}

  const CMatrix& factor() const noexcept { return lower_; }
  double jitter_applied() const noexcept { return jitter_; }
  Eigen::Index dim() const noexcept { return lower_.rows(); }

  /// Reconstructs L L^H (the jittered input).
  CMatrix reconstruct() const;

 private:
  CMatrix lower_;
  double jitter_ = 0.0;
};

/// Factors a Hermitian positive-definite matrix. Throws NotHermitian when the
/// input is not conjugate-symmetric to 1e-12 relative, and NonFactorizable
/// when breakdown persists after the last jitter escalation.
HermitianFactorization factor_hpd(const CMatrix& m, const JitterPolicy& policy = {});

/// Solves (L L^H) x = b. Throws DimensionMismatch on shape disagreement.
CVector solve_hpd(const HermitianFactorization& f, const CVector& b);
CMatrix solve_hpd(const HermitianFactorization& f, const CMatrix& b);

/// b^H (L L^H)^{-1} b, computed as ||L^{-1} b||^2 so it is real and >= 0.
double inverse_quadratic_form(const HermitianFactorization& f, const CVector& b);

/// Relative Frobenius distance ||a - b||_F / ||b||_F (absolute if b = 0).
double relative_frobenius_error(const CMatrix& a, const CMatrix& b);

/// Largest |M_ij - conj(M_ji)| relative to the largest |M_ij|.
double hermitian_defect(const CMatrix& m);

double l1_norm(const CVector& v);

}  // namespace spicelab
