#pragma once

// Experiment runner behind the `spicelab` CLI: builds (or ingests) a
// measurement, runs SPICE and the matching L1 route, and emits plot-ready
// spectra, JSON reports and benchmark tables.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spicelab/equivalence.hpp"
#include "spicelab/model.hpp"
#include "spicelab/sparse_solvers.hpp"
#include "spicelab/spice.hpp"

namespace spicelab {

/// Defaults reproduce the spectral-line simulation: 100 samples uniform on
/// [0, 200], grid omega_k = 2*pi*k/1000 for k = 1..1000, lines
/// {145: 3, 310: 10, 315: 10}, noise covariance 0.25 I, 100 SPICE iterations.
struct ExperimentConfig {
  std::size_t num_samples = 100;
  std::size_t grid_size = 1000;
  double grid_resolution = 1000.0;
  double time_horizon = 200.0;
  std::vector<ActiveAtom> active{{145, 3.0}, {310, 10.0}, {315, 10.0}};
  /// One value (broadcast) or one per sample.
  std::vector<double> noise_variance{0.25};
  NoiseModel variant = NoiseModel::heteroscedastic;
  std::uint64_t seed = 1;
  std::size_t spice_iters = 100;
  double spice_rel_tol = 1e-8;
  SolverConfig solver{};
  double support_threshold = 1e-6;
  /// When set, the measurement is read from this CSV instead of simulated.
  std::optional<std::filesystem::path> measurement_csv;
  std::filesystem::path output_dir = "spicelab_out";
  std::vector<std::pair<std::size_t, std::size_t>> bench_sizes{{50, 200}, {100, 1000}};
  bool bench_solver = true;
};

/// Throws InvalidConfig / IndexOutOfRange / NonPositiveVariance / EmptyGrid.
void validate(const ExperimentConfig& config);

/// Parses a flat JSON object. Unknown keys are rejected; missing keys keep
/// their defaults. The result is validated.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

/// Seeds derived from the configured seed: one stream for the sampling
/// instants, one for phases and noise.
std::uint64_t time_seed(std::uint64_t seed);
std::uint64_t measurement_seed(std::uint64_t seed);

struct Instance {
  Dictionary dict;
  Measurement measurement;
};

/// Simulates the configured instance, or ingests measurement_csv (the CSV
/// then fixes N and the sampling instants).
Instance make_instance(const ExperimentConfig& config);

struct SpectrumRow {
  std::size_t index;  // 1-based grid index
  double omega;
  double p_spice;
  double p_equiv;
  double ctilde_modulus;
  double amplitude_spice;  // |p_k a_k^H R^{-1} y|
  double amplitude_equiv;  // ||y|| |c~_k| / sqrt(N)
};

struct StageTimings {
  double simulate_seconds = 0.0;
  double spice_seconds = 0.0;
  double lasso_seconds = 0.0;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<SpectrumRow> spectrum;
  /// 1-based grid indices of the len(active) largest signal powers, ascending.
  std::vector<std::size_t> peaks_spice;
  std::vector<std::size_t> peaks_equiv;
  /// 1-based extended indices with w_k p_k above the support threshold.
  std::vector<std::size_t> support_spice;
  std::vector<std::size_t> support_equiv;
  double g_spice = 0.0;
  double g_equiv = 0.0;
  double noise_power_spice = 0.0;
  double noise_power_equiv = 0.0;
  bool spice_converged = false;
  std::size_t spice_iterations = 0;
  bool lasso_converged = false;
  std::size_t lasso_iterations = 0;
  std::optional<GroundTruth> truth;
  /// spice_state_json of the final SPICE state and lasso_solution_json of the
  /// normalized L1 solve.
  std::string spice_state;
  std::string lasso_solution;
  StageTimings timings;
};

RunReport run_experiment(const ExperimentConfig& config);

/// Header row of the spectrum CSV.
inline constexpr const char* kSpectrumHeader =
    "index,omega_rad,p_spice,p_equiv,ctilde_modulus,sqrt_p_spice,sqrt_p_equiv,amp_spice,amp_equiv";

std::string spectrum_csv(const RunReport& report);
/// Deterministic report (no wall-clock values).
std::string report_json(const RunReport& report);
std::string timings_json(const RunReport& report);

/// Writes spectrum.csv, report.json, timings.json, spice_state.json and
/// lasso_solution.json into `dir` (created if needed).
void write_run_outputs(const RunReport& report, const std::filesystem::path& dir);

struct BenchRow {
  std::size_t num_samples = 0;
  std::size_t grid_size = 0;
  std::size_t spice_iterations = 0;
  double spice_seconds = 0.0;
  double spice_seconds_per_iter = 0.0;
  double lasso_seconds = 0.0;
  std::size_t lasso_iterations = 0;
  bool ok = true;
  std::string error;
};

/// Runs spice_iters SPICE iterations (and, if bench_solver, the matching L1
/// solve) per size. Per-size numeric failures are recorded and the run
/// continues; an empty size list or a zero dimension is a configuration error.
std::vector<BenchRow> run_benchmark(const std::vector<std::pair<std::size_t, std::size_t>>& sizes,
                                    const ExperimentConfig& config);

std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace spicelab
