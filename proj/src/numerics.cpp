#include "spicelab/numerics.hpp"

#include <cmath>
#include <string>

#include "spicelab/error.hpp"

namespace spicelab {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyGrid: return "EmptyGrid";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::NonFactorizable: return "NonFactorizable";
    case ErrorKind::ZeroMeasurement: return "ZeroMeasurement";
    case ErrorKind::ZeroWeight: return "ZeroWeight";
    case ErrorKind::ZeroRho: return "ZeroRho";
    case ErrorKind::EmptySupport: return "EmptySupport";
    case ErrorKind::AllZeroCoefficients: return "AllZeroCoefficients";
    case ErrorKind::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorKind::InconsistentSolution: return "InconsistentSolution";
    case ErrorKind::NonFiniteResult: return "NonFiniteResult";
  }
  return "Unknown";
}

bool is_config_error(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DimensionMismatch:
    case ErrorKind::EmptyGrid:
    case ErrorKind::NonFiniteInput:
    case ErrorKind::IndexOutOfRange:
    case ErrorKind::NonPositiveVariance:
    case ErrorKind::InvalidConfig:
    case ErrorKind::Io:
      return true;
    default:
      return false;
  }
}

CMatrix HermitianFactorization::reconstruct() const {
  return lower_ * lower_.adjoint();
}

double hermitian_defect(const CMatrix& m) {
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = j; i < m.rows(); ++i)
      worst = std::max(worst, std::abs(m(i, j) - std::conj(m(j, i))));
  return worst / scale;
}

HermitianFactorization factor_hpd(const CMatrix& m, const JitterPolicy& policy) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw Error(ErrorKind::DimensionMismatch, "factor_hpd needs a non-empty square matrix");
  if (!m.allFinite()) throw Error(ErrorKind::NonFiniteInput, "factor_hpd input has NaN/Inf");
  if (hermitian_defect(m) > 1e-12)
    throw Error(ErrorKind::NotHermitian, "factor_hpd input is not conjugate-symmetric");

  const auto n = m.rows();
  Eigen::LLT<CMatrix, Eigen::Lower> llt(m);
  if (llt.info() == Eigen::Success) return {llt.matrixL(), 0.0};

  const double mean_diag = m.diagonal().real().sum() / static_cast<double>(n);
  double jitter = policy.initial_scale * std::abs(mean_diag);
  if (jitter == 0.0) jitter = policy.initial_scale;
  CMatrix loaded = m;
  for (int attempt = 0; attempt <= policy.max_escalations; ++attempt) {
    loaded.diagonal() = m.diagonal().array() + jitter;
    llt.compute(loaded);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
    jitter *= policy.growth;
  }
  throw Error(ErrorKind::NonFactorizable,
              "Cholesky breakdown persists after diagonal loading of " +
                  std::to_string(jitter / policy.growth));
}

CVector solve_hpd(const HermitianFactorization& f, const CVector& b) {
  if (b.size() != f.dim())
    throw Error(ErrorKind::DimensionMismatch, "solve_hpd: rhs length differs from matrix dimension");
  CVector x = f.factor().triangularView<Eigen::Lower>().solve(b);
  f.factor().triangularView<Eigen::Lower>().adjoint().solveInPlace(x);
  return x;
}

CMatrix solve_hpd(const HermitianFactorization& f, const CMatrix& b) {
  if (b.rows() != f.dim())
    throw Error(ErrorKind::DimensionMismatch, "solve_hpd: rhs rows differ from matrix dimension");
  CMatrix x = f.factor().triangularView<Eigen::Lower>().solve(b);
  f.factor().triangularView<Eigen::Lower>().adjoint().solveInPlace(x);
  return x;
}

double inverse_quadratic_form(const HermitianFactorization& f, const CVector& b) {
  if (b.size() != f.dim())
    throw Error(ErrorKind::DimensionMismatch, "inverse_quadratic_form: length mismatch");
  const CVector half = f.factor().triangularView<Eigen::Lower>().solve(b);
  return half.squaredNorm();
}

double relative_frobenius_error(const CMatrix& a, const CMatrix& b) {
  const double denom = b.norm();
  const double diff = (a - b).norm();
  return denom > 0.0 ? diff / denom : diff;
}

double l1_norm(const CVector& v) { return v.cwiseAbs().sum(); }

}  // namespace spicelab
