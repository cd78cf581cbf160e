#pragma once

// Sinusoidal dictionary, measurement simulation, SPICE weights and the
// scaled-atom view of the extended dictionary.
//
// Index conventions: C++ vectors are 0-based. The extended atom list is
// [a_0 ... a_{K-1}, e_0 ... e_{N-1}], so extended index K + j is the noise
// channel of sample j. User-facing grid indices (ActiveAtom::grid_index,
// CSV/JSON output) are 1-based, matching omega_k = 2*pi*k / resolution for
// k = 1..K stored in column k - 1.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "spicelab/numerics.hpp"

namespace spicelab {

class Dictionary {
 public:
  Dictionary(RVector time_samples, RVector freq_grid, CMatrix atoms)
      : times_(std::move(time_samples)), freqs_(std::move(freq_grid)), atoms_(std::move(atoms)) {}

  Eigen::Index num_samples() const noexcept { return atoms_.rows(); }  // N
  Eigen::Index num_atoms() const noexcept { return atoms_.cols(); }    // K
  Eigen::Index num_extended() const noexcept { return atoms_.rows() + atoms_.cols(); }

  const RVector& time_samples() const noexcept { return times_; }
  const RVector& freq_grid() const noexcept { return freqs_; }
  /// N x K matrix with columns a_k; the identity extension is implicit.
  const CMatrix& atoms() const noexcept { return atoms_; }

  /// ||a_k||^2 for extended index k: N for sinusoids (unit-modulus entries), 1 for e_j.
  double atom_norm_sq(Eigen::Index k) const noexcept;
  bool is_noise_index(Eigen::Index k) const noexcept { return k >= num_atoms(); }

 private:
  RVector times_;
  RVector freqs_;
  CMatrix atoms_;
};

/// atoms(n, k) = exp(j * freq_grid[k] * time_samples[n]).
Dictionary build_dictionary(std::span<const double> time_samples, std::span<const double> freq_grid);

/// omega_k = 2*pi*k / resolution for k = 1..grid_size.
std::vector<double> frequency_grid(std::size_t grid_size, double resolution = 1000.0);

/// Portable generator: the engine output sequence is fixed by the standard and
/// the uniform/normal transforms are implemented here, so draws are
/// bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// N samples drawn uniformly on [0, horizon], sorted ascending.
std::vector<double> uniform_time_samples(std::size_t n, double horizon, std::uint64_t seed);

struct ActiveAtom {
  std::size_t grid_index;  // 1-based
  double amplitude;        // |s_k|
};

struct GroundTruth {
  std::vector<ActiveAtom> active;
  std::vector<double> phases;  // phase_k per active atom, in [0, 2*pi)
  CVector noise;
};

struct Measurement {
  CVector y;
  std::optional<GroundTruth> truth;
  std::uint64_t seed = 0;
};

/// y = sum_k a_k |s_k| e^{j phase_k} + noise, noise_n ~ CN(0, variance_n).
Measurement simulate_measurement(const Dictionary& dict, std::span<const ActiveAtom> active,
                                 std::span<const double> noise_variances, std::uint64_t seed);

/// w_k = ||a_k||^2 / ||y||^2 over all K + N extended atoms.
struct Weights {
  RVector w;
};

Weights compute_weights(const Dictionary& dict, const CVector& y);

/// Extended scaled atoms a~_k = w_k^{-1/2} a_k. `phi` holds the K sinusoid
/// columns (the regressor matrix of the Lasso forms, regressor_row_n = row n
/// of phi); the identity part is the diagonal `identity_scale` (a~_{K+j} =
/// identity_scale[j] * e_j).
struct ScaledAtoms {
  CMatrix phi;
  RVector identity_scale;

  Eigen::Index num_samples() const noexcept { return identity_scale.size(); }
  Eigen::Index num_atoms() const noexcept { return phi.cols(); }
  /// Dense N x (K + N) matrix [phi, diag(identity_scale)]; for tests and small problems.
  CMatrix dense() const;
  /// Computes A~^H c for an extended coefficient vector c (length K + N).
  CVector synthesize(const CVector& c_full) const;
};

ScaledAtoms scaled_atoms(const Dictionary& dict, const Weights& w);

/// Measurement CSV: header `index,t,re,im`, one row per sample, 1-based index.
void write_measurement_csv(const std::filesystem::path& path, std::span<const double> time_samples,
                           const CVector& y);

struct MeasurementFile {
  std::vector<double> time_samples;
  CVector y;
};

MeasurementFile read_measurement_csv(const std::filesystem::path& path);

}  // namespace spicelab
