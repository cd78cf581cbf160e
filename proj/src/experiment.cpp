#include "spicelab/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "spicelab/error.hpp"

namespace spicelab {

using nlohmann::json;
using nlohmann::ordered_json;

void validate(const ExperimentConfig& c) {
  if (c.num_samples == 0 && !c.measurement_csv) throw Error(ErrorKind::InvalidConfig, "num_samples must be >= 1");
  if (c.grid_size == 0) throw Error(ErrorKind::EmptyGrid, "grid_size must be >= 1");
  if (!(c.grid_resolution > 0.0) || !std::isfinite(c.grid_resolution))
    throw Error(ErrorKind::InvalidConfig, "grid_resolution must be positive");
  if (!(c.time_horizon > 0.0) || !std::isfinite(c.time_horizon))
    throw Error(ErrorKind::InvalidConfig, "time_horizon must be positive");
  for (const auto& a : c.active) {
    if (a.grid_index < 1 || a.grid_index > c.grid_size)
      throw Error(ErrorKind::IndexOutOfRange, "active index " + std::to_string(a.grid_index) +
                                                  " outside 1.." + std::to_string(c.grid_size));
    if (!(a.amplitude >= 0.0) || !std::isfinite(a.amplitude))
      throw Error(ErrorKind::InvalidConfig, "active amplitudes must be finite and >= 0");
  }
  if (c.noise_variance.empty()) throw Error(ErrorKind::InvalidConfig, "noise_variance is empty");
  if (c.noise_variance.size() != 1 && c.noise_variance.size() != c.num_samples)
    throw Error(ErrorKind::InvalidConfig, "noise_variance needs 1 or num_samples entries");
  for (double v : c.noise_variance)
    if (!(v > 0.0) || !std::isfinite(v))
      throw Error(ErrorKind::NonPositiveVariance, "noise variances must be positive");
  if (c.spice_iters == 0) throw Error(ErrorKind::InvalidConfig, "spice_iters must be >= 1");
  if (!(c.spice_rel_tol >= 0.0)) throw Error(ErrorKind::InvalidConfig, "spice_rel_tol must be >= 0");
  if (!(c.solver.penalty > 0.0) || !(c.solver.relaxation > 0.0 && c.solver.relaxation < 2.0))
    throw Error(ErrorKind::InvalidConfig, "solver_penalty must be > 0 and solver_relaxation in (0, 2)");
  if (c.solver.max_iters == 0) throw Error(ErrorKind::InvalidConfig, "solver_max_iters must be >= 1");
  if (!(c.support_threshold >= 0.0)) throw Error(ErrorKind::InvalidConfig, "support_threshold must be >= 0");
  for (const auto& [n, k] : c.bench_sizes)
    if (n == 0 || k == 0) throw Error(ErrorKind::EmptyGrid, "bench sizes need N >= 1 and grid_size >= 1");
}

namespace {

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::InvalidConfig, "config key '" + key + "' has the wrong type");
  }
}

std::size_t get_count(const json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    throw Error(ErrorKind::InvalidConfig, "config key '" + key + "' must be a nonnegative integer");
  return j.get<std::size_t>();
}

std::vector<ActiveAtom> parse_active(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::InvalidConfig, "'active' must be a list of [index, amplitude]");
  std::vector<ActiveAtom> out;
  for (const auto& item : j) {
    if (!item.is_array() || item.size() != 2 || !item[1].is_number())
      throw Error(ErrorKind::InvalidConfig, "'active' entries must be [index, amplitude]");
    out.push_back({get_count(item[0], "active"), item[1].get<double>()});
  }
  return out;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "config must be a JSON object");

  ExperimentConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "num_samples") c.num_samples = get_count(value, key);
    else if (key == "grid_size") c.grid_size = get_count(value, key);
    else if (key == "grid_resolution") c.grid_resolution = get_as<double>(value, key);
    else if (key == "time_horizon") c.time_horizon = get_as<double>(value, key);
    else if (key == "active") c.active = parse_active(value);
    else if (key == "noise_variance") {
      if (value.is_number()) c.noise_variance = {value.get<double>()};
      else c.noise_variance = get_as<std::vector<double>>(value, key);
    }
    else if (key == "variant") c.variant = parse_noise_model(get_as<std::string>(value, key));
    else if (key == "seed") c.seed = get_as<std::uint64_t>(value, key);
    else if (key == "spice_iters") c.spice_iters = get_count(value, key);
    else if (key == "spice_rel_tol") c.spice_rel_tol = get_as<double>(value, key);
    else if (key == "solver_max_iters") c.solver.max_iters = get_count(value, key);
    else if (key == "solver_eps_abs") c.solver.eps_abs = get_as<double>(value, key);
    else if (key == "solver_eps_rel") c.solver.eps_rel = get_as<double>(value, key);
    else if (key == "solver_penalty") c.solver.penalty = get_as<double>(value, key);
    else if (key == "solver_relaxation") c.solver.relaxation = get_as<double>(value, key);
    else if (key == "solver_kkt_tol") c.solver.kkt_tol = get_as<double>(value, key);
    else if (key == "support_threshold") c.support_threshold = get_as<double>(value, key);
    else if (key == "measurement_csv") {
      if (value.is_null()) c.measurement_csv.reset();
      else c.measurement_csv = get_as<std::string>(value, key);
    }
    else if (key == "output_dir") c.output_dir = get_as<std::string>(value, key);
    else if (key == "bench_sizes") c.bench_sizes = get_as<std::vector<std::pair<std::size_t, std::size_t>>>(value, key);
    else if (key == "bench_solver") c.bench_solver = get_as<bool>(value, key);
    else throw Error(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["num_samples"] = c.num_samples;
  j["grid_size"] = c.grid_size;
  j["grid_resolution"] = c.grid_resolution;
  j["time_horizon"] = c.time_horizon;
  auto active = ordered_json::array();
  for (const auto& a : c.active) active.push_back({a.grid_index, a.amplitude});
  j["active"] = std::move(active);
  j["noise_variance"] = c.noise_variance;
  j["variant"] = std::string(to_string(c.variant));
  j["seed"] = c.seed;
  j["spice_iters"] = c.spice_iters;
  j["spice_rel_tol"] = c.spice_rel_tol;
  j["solver_max_iters"] = c.solver.max_iters;
  j["solver_eps_abs"] = c.solver.eps_abs;
  j["solver_eps_rel"] = c.solver.eps_rel;
  j["solver_penalty"] = c.solver.penalty;
  j["solver_relaxation"] = c.solver.relaxation;
  j["solver_kkt_tol"] = c.solver.kkt_tol;
  j["support_threshold"] = c.support_threshold;
  j["measurement_csv"] = c.measurement_csv ? json(c.measurement_csv->string()) : json(nullptr);
  j["output_dir"] = c.output_dir.string();
  j["bench_sizes"] = c.bench_sizes;
  j["bench_solver"] = c.bench_solver;
  return j.dump(2);
}

std::uint64_t time_seed(std::uint64_t seed) { return seed; }
std::uint64_t measurement_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

Instance make_instance(const ExperimentConfig& config) {
  validate(config);
  const auto omega = frequency_grid(config.grid_size, config.grid_resolution);
  if (config.measurement_csv) {
    MeasurementFile file = read_measurement_csv(*config.measurement_csv);
    Dictionary dict = build_dictionary(file.time_samples, omega);
    Measurement m;
    m.y = std::move(file.y);
    m.seed = config.seed;
    return {std::move(dict), std::move(m)};
  }
  const auto t = uniform_time_samples(config.num_samples, config.time_horizon, time_seed(config.seed));
  Dictionary dict = build_dictionary(t, omega);
  std::vector<double> variances = config.noise_variance;
  if (variances.size() == 1) variances.assign(config.num_samples, config.noise_variance.front());
  Measurement m = simulate_measurement(dict, config.active, variances, measurement_seed(config.seed));
  return {std::move(dict), std::move(m)};
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::size_t> top_indices(const RVector& signal, std::size_t count) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(signal.size()));
  std::iota(idx.begin(), idx.end(), 0);
  count = std::min(count, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
                      return signal[ia] > signal[ib] || (signal[ia] == signal[ib] && a < b);
                    });
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  for (auto& i : idx) ++i;
  return idx;
}

std::vector<std::size_t> one_based(const std::vector<Eigen::Index>& v) {
  std::vector<std::size_t> out;
  for (auto i : v) out.push_back(static_cast<std::size_t>(i) + 1);
  return out;
}

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config) {
  RunReport rep;
  rep.config = config;

  auto t0 = std::chrono::steady_clock::now();
  Instance inst = make_instance(config);
  rep.timings.simulate_seconds = seconds_since(t0);
  const Dictionary& dict = inst.dict;
  const CVector& y = inst.measurement.y;
  rep.truth = inst.measurement.truth;
  const Weights w = compute_weights(dict, y);
  const auto k = dict.num_atoms();
  const auto n = dict.num_samples();

  t0 = std::chrono::steady_clock::now();
  SpiceConfig spice_cfg;
  spice_cfg.variant = config.variant;
  spice_cfg.max_iters = config.spice_iters;
  spice_cfg.rel_tol = config.spice_rel_tol;
  const SpiceState state = spice_run(dict, y, spice_cfg);
  const CVector z = solve_hpd(state.covariance, y);
  const RVector amp_spice =
      state.powers.p.head(k).cwiseProduct((dict.atoms().adjoint() * z).cwiseAbs());
  rep.timings.spice_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const ConstrainedL1Result l1 = solve_constrained_l1(scaled_atoms(dict, w), y, config.variant, config.solver);
  const PowerEstimate p_equiv = config.variant == NoiseModel::heteroscedastic
                                    ? theorem1_transform(l1.normalized, dict, y)
                                    : theorem2_transform(l1.normalized, dict, y);
  rep.timings.lasso_seconds = seconds_since(t0);

  rep.g_spice = state.g_value;
  rep.g_equiv = cost_g(assemble_covariance(dict, p_equiv), y, w, p_equiv);
  rep.spice_converged = state.converged;
  rep.spice_iterations = state.iteration;
  rep.lasso_converged = l1.normalized.converged;
  rep.lasso_iterations = l1.normalized.iterations;
  rep.noise_power_spice = state.powers.noise(k).mean();
  rep.noise_power_equiv = p_equiv.noise(k).mean();
  rep.peaks_spice = top_indices(state.powers.signal(k), config.active.size());
  rep.peaks_equiv = top_indices(p_equiv.signal(k), config.active.size());
  rep.support_spice = one_based(support_set(state.powers, w, config.support_threshold));
  rep.support_equiv = one_based(support_set(p_equiv, w, config.support_threshold));
  rep.spice_state = spice_state_json(state);
  rep.lasso_solution = lasso_solution_json(l1.normalized);

  const double amp_scale = y.norm() / std::sqrt(static_cast<double>(n));
  rep.spectrum.reserve(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    SpectrumRow row{static_cast<std::size_t>(i) + 1,
                    dict.freq_grid()[i],
                    state.powers.p[i],
                    p_equiv.p[i],
                    std::abs(l1.coefficients.c_tilde[i]),
                    amp_spice[i],
                    amp_scale * std::abs(l1.coefficients.c_tilde[i])};
    for (double v : {row.p_spice, row.p_equiv, row.ctilde_modulus, row.amplitude_spice, row.amplitude_equiv})
      if (!std::isfinite(v))
        throw Error(ErrorKind::NonFiniteResult, "non-finite spectrum value at index " + std::to_string(row.index));
    rep.spectrum.push_back(row);
  }
  return rep;
}

std::string spectrum_csv(const RunReport& report) {
  std::string out = kSpectrumHeader;
  out += '\n';
  for (const auto& r : report.spectrum) {
    out += std::to_string(r.index);
    for (double v : {r.omega, r.p_spice, r.p_equiv, r.ctilde_modulus, std::sqrt(r.p_spice), std::sqrt(r.p_equiv),
                     r.amplitude_spice, r.amplitude_equiv}) {
      out += ',';
      out += num(v);
    }
    out += '\n';
  }
  return out;
}

std::string report_json(const RunReport& report) {
  ordered_json j;
  j["config"] = ordered_json::parse(config_to_json(report.config));
  j["variant"] = std::string(to_string(report.config.variant));
  j["peaks_spice"] = report.peaks_spice;
  j["peaks_equiv"] = report.peaks_equiv;
  j["support_spice"] = report.support_spice;
  j["support_equiv"] = report.support_equiv;
  j["g_spice"] = report.g_spice;
  j["g_equiv"] = report.g_equiv;
  j["noise_power_spice"] = report.noise_power_spice;
  j["noise_power_equiv"] = report.noise_power_equiv;
  j["spice_converged"] = report.spice_converged;
  j["spice_iterations"] = report.spice_iterations;
  j["lasso_converged"] = report.lasso_converged;
  j["lasso_iterations"] = report.lasso_iterations;
  if (report.truth) {
    ordered_json truth;
    auto active = ordered_json::array();
    for (std::size_t i = 0; i < report.truth->active.size(); ++i)
      active.push_back({{"index", report.truth->active[i].grid_index},
                        {"amplitude", report.truth->active[i].amplitude},
                        {"phase", report.truth->phases[i]}});
    truth["active"] = std::move(active);
    j["truth"] = std::move(truth);
  }
  return j.dump(2);
}

std::string timings_json(const RunReport& report) {
  ordered_json j;
  j["simulate_seconds"] = report.timings.simulate_seconds;
  j["spice_seconds"] = report.timings.spice_seconds;
  j["lasso_seconds"] = report.timings.lasso_seconds;
  return j.dump(2);
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace

void write_run_outputs(const RunReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "spectrum.csv", spectrum_csv(report));
  write_text(dir / "report.json", report_json(report) + "\n");
  write_text(dir / "timings.json", timings_json(report) + "\n");
  write_text(dir / "spice_state.json", report.spice_state + "\n");
  write_text(dir / "lasso_solution.json", report.lasso_solution + "\n");
}

std::vector<BenchRow> run_benchmark(const std::vector<std::pair<std::size_t, std::size_t>>& sizes,
                                    const ExperimentConfig& config) {
  if (sizes.empty()) throw Error(ErrorKind::InvalidConfig, "benchmark needs at least one size");
  for (const auto& [n, k] : sizes)
    if (n == 0 || k == 0) throw Error(ErrorKind::EmptyGrid, "bench sizes need N >= 1 and grid_size >= 1");

  std::vector<BenchRow> rows;
  for (const auto& [n, k] : sizes) {
    BenchRow row;
    row.num_samples = n;
    row.grid_size = k;
    try {
      ExperimentConfig c = config;
      c.num_samples = n;
      c.grid_size = k;
      c.measurement_csv.reset();
      c.noise_variance = {config.noise_variance.front()};
      std::erase_if(c.active, [&](const ActiveAtom& a) { return a.grid_index > k; });
      const Instance inst = make_instance(c);

      SpiceConfig spice_cfg;
      spice_cfg.variant = c.variant;
      spice_cfg.max_iters = c.spice_iters;
      spice_cfg.rel_tol = 0.0;
      auto t0 = std::chrono::steady_clock::now();
      const SpiceState state = spice_run(inst.dict, inst.measurement.y, spice_cfg);
      row.spice_seconds = seconds_since(t0);
      row.spice_iterations = state.iteration;
      row.spice_seconds_per_iter = row.spice_seconds / static_cast<double>(std::max<std::size_t>(state.iteration, 1));

      if (c.bench_solver) {
        t0 = std::chrono::steady_clock::now();
        const Weights w = compute_weights(inst.dict, inst.measurement.y);
        const auto l1 = solve_constrained_l1(scaled_atoms(inst.dict, w), inst.measurement.y, c.variant, c.solver);
        row.lasso_seconds = seconds_since(t0);
        row.lasso_iterations = l1.normalized.iterations;
      }
    } catch (const Error& e) {
      row.ok = false;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out =
      "num_samples,grid_size,spice_iterations,spice_seconds,spice_seconds_per_iter,lasso_seconds,lasso_iterations,"
      "ok,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += std::to_string(r.num_samples) + ',' + std::to_string(r.grid_size) + ',' +
           std::to_string(r.spice_iterations) + ',' + num(r.spice_seconds) + ',' + num(r.spice_seconds_per_iter) +
           ',' + num(r.lasso_seconds) + ',' + std::to_string(r.lasso_iterations) + ',' + (r.ok ? "1" : "0") + ',' +
           err + '\n';
  }
  return out;
}

}  // namespace spicelab
