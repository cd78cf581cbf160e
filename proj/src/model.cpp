#include "spicelab/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>

#include "spicelab/error.hpp"

namespace spicelab {

double Dictionary::atom_norm_sq(Eigen::Index k) const noexcept {
  return is_noise_index(k) ? 1.0 : static_cast<double>(num_samples());
}

Dictionary build_dictionary(std::span<const double> time_samples, std::span<const double> freq_grid) {
  if (time_samples.empty()) throw Error(ErrorKind::EmptyGrid, "no time samples");
  if (freq_grid.empty()) throw Error(ErrorKind::EmptyGrid, "empty frequency grid");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(time_samples.begin(), time_samples.end(), finite) ||
      !std::all_of(freq_grid.begin(), freq_grid.end(), finite))
    throw Error(ErrorKind::NonFiniteInput, "time samples and frequencies must be finite");

  const auto n = static_cast<Eigen::Index>(time_samples.size());
  const auto k = static_cast<Eigen::Index>(freq_grid.size());
  RVector t = Eigen::Map<const RVector>(time_samples.data(), n);
  RVector w = Eigen::Map<const RVector>(freq_grid.data(), k);
  CMatrix atoms(n, k);
  for (Eigen::Index col = 0; col < k; ++col)
    for (Eigen::Index row = 0; row < n; ++row) atoms(row, col) = std::polar(1.0, w[col] * t[row]);
  return {std::move(t), std::move(w), std::move(atoms)};
}

std::vector<double> frequency_grid(std::size_t grid_size, double resolution) {
  if (grid_size == 0) throw Error(ErrorKind::EmptyGrid, "grid_size must be positive");
  if (!(resolution > 0.0)) throw Error(ErrorKind::InvalidConfig, "grid resolution must be positive");
  std::vector<double> omega(grid_size);
  for (std::size_t k = 0; k < grid_size; ++k)
    omega[k] = 2.0 * std::numbers::pi * static_cast<double>(k + 1) / resolution;
  return omega;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> uniform_time_samples(std::size_t n, double horizon, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::EmptyGrid, "need at least one time sample");
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw Error(ErrorKind::InvalidConfig, "time horizon must be positive and finite");
  Rng rng(seed);
  std::vector<double> t(n);
  for (auto& v : t) v = horizon * rng.uniform();
  std::sort(t.begin(), t.end());
  return t;
}

Measurement simulate_measurement(const Dictionary& dict, std::span<const ActiveAtom> active,
                                 std::span<const double> noise_variances, std::uint64_t seed) {
  const auto n = dict.num_samples();
  if (static_cast<Eigen::Index>(noise_variances.size()) != n)
    throw Error(ErrorKind::DimensionMismatch, "need one noise variance per sample");
  for (double v : noise_variances)
    if (!(v > 0.0) || !std::isfinite(v))
      throw Error(ErrorKind::NonPositiveVariance, "noise variances must be positive and finite");
  for (const auto& a : active) {
    if (a.grid_index < 1 || a.grid_index > static_cast<std::size_t>(dict.num_atoms()))
      throw Error(ErrorKind::IndexOutOfRange,
                  "active grid index " + std::to_string(a.grid_index) + " outside 1.." +
                      std::to_string(dict.num_atoms()));
    if (!(a.amplitude >= 0.0) || !std::isfinite(a.amplitude))
      throw Error(ErrorKind::NonFiniteInput, "amplitudes must be finite and nonnegative");
  }

  Rng rng(seed);
  GroundTruth truth;
  truth.active.assign(active.begin(), active.end());
  CVector y = CVector::Zero(n);
  for (const auto& a : active) {
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    truth.phases.push_back(phase);
    y += dict.atoms().col(static_cast<Eigen::Index>(a.grid_index - 1)) * std::polar(a.amplitude, phase);
  }
  truth.noise.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sd = std::sqrt(noise_variances[static_cast<std::size_t>(i)] / 2.0);
    const double re = sd * rng.normal();
    const double im = sd * rng.normal();
    truth.noise[i] = {re, im};
  }
  y += truth.noise;
  return {std::move(y), std::move(truth), seed};
}

Weights compute_weights(const Dictionary& dict, const CVector& y) {
  if (y.size() != dict.num_samples())
    throw Error(ErrorKind::DimensionMismatch, "measurement length differs from dictionary rows");
  const double y_sq = y.squaredNorm();
  if (!(y_sq > 0.0)) throw Error(ErrorKind::ZeroMeasurement, "||y|| = 0, weights undefined");
  if (!std::isfinite(y_sq)) throw Error(ErrorKind::NonFiniteInput, "measurement has NaN/Inf");
  Weights out;
  out.w.resize(dict.num_extended());
  for (Eigen::Index k = 0; k < dict.num_extended(); ++k) out.w[k] = dict.atom_norm_sq(k) / y_sq;
  return out;
}

CMatrix ScaledAtoms::dense() const {
  const auto n = num_samples();
  CMatrix out = CMatrix::Zero(n, phi.cols() + n);
  out.leftCols(phi.cols()) = phi;
  out.rightCols(n).diagonal() = identity_scale.cast<cplx>();
  return out;
}

CVector ScaledAtoms::synthesize(const CVector& c_full) const {
  if (c_full.size() != num_atoms() + num_samples())
    throw Error(ErrorKind::DimensionMismatch, "coefficient vector must have K + N entries");
  return phi * c_full.head(num_atoms()) +
         identity_scale.cast<cplx>().cwiseProduct(c_full.tail(num_samples()));
}

ScaledAtoms scaled_atoms(const Dictionary& dict, const Weights& w) {
  if (w.w.size() != dict.num_extended())
    throw Error(ErrorKind::DimensionMismatch, "weights must have K + N entries");
  if ((w.w.array() <= 0.0).any()) throw Error(ErrorKind::ZeroWeight, "all weights must be positive");
  const auto k = dict.num_atoms();
  ScaledAtoms out;
  const RVector inv_sqrt = w.w.cwiseSqrt().cwiseInverse();
  out.phi = dict.atoms() * inv_sqrt.head(k).cast<cplx>().asDiagonal();
  out.identity_scale = inv_sqrt.tail(dict.num_samples());
  return out;
}

void write_measurement_csv(const std::filesystem::path& path, std::span<const double> time_samples,
                           const CVector& y) {
  if (static_cast<Eigen::Index>(time_samples.size()) != y.size())
    throw Error(ErrorKind::DimensionMismatch, "time samples and measurement differ in length");
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << "index,t,re,im\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < y.size(); ++i)
    out << (i + 1) << ',' << time_samples[static_cast<std::size_t>(i)] << ',' << y[i].real() << ','
        << y[i].imag() << '\n';
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

namespace {

double parse_field(std::string_view field, std::size_t line_no) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw Error(ErrorKind::InvalidConfig,
                "measurement CSV line " + std::to_string(line_no) + ": bad number '" + std::string(field) + "'");
  if (!std::isfinite(value))
    throw Error(ErrorKind::NonFiniteInput, "measurement CSV line " + std::to_string(line_no));
  return value;
}

}  // namespace

MeasurementFile read_measurement_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::InvalidConfig, "measurement CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "index,t,re,im")
    throw Error(ErrorKind::InvalidConfig, "measurement CSV header must be 'index,t,re,im'");

  std::vector<double> t;
  std::vector<cplx> y;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos;) {
      fields.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    fields.push_back(rest);
    if (fields.size() != 4)
      throw Error(ErrorKind::InvalidConfig, "measurement CSV line " + std::to_string(line_no) + " needs 4 fields");
    const double index = parse_field(fields[0], line_no);
    if (index != static_cast<double>(t.size() + 1))
      throw Error(ErrorKind::InvalidConfig, "measurement CSV rows must be indexed 1..N in order");
    t.push_back(parse_field(fields[1], line_no));
    y.emplace_back(parse_field(fields[2], line_no), parse_field(fields[3], line_no));
  }
  if (t.empty()) throw Error(ErrorKind::EmptyGrid, "measurement CSV has no rows");
  MeasurementFile out;
  out.time_samples = std::move(t);
  out.y = Eigen::Map<const CVector>(y.data(), static_cast<Eigen::Index>(y.size()));
  return out;
}

}  // namespace spicelab
