#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "spicelab/equivalence.hpp"
#include "spicelab/error.hpp"
#include "spicelab/experiment.hpp"
#include "spicelab/sparse_solvers.hpp"
#include "spicelab/spice.hpp"

namespace py = pybind11;
using namespace spicelab;

namespace {

RVector to_rvector(const std::vector<double>& v) { return Eigen::Map<const RVector>(v.data(), std::ssize(v)); }

py::list one_based(const std::vector<Eigen::Index>& idx) {
  py::list out;
  for (auto i : idx) out.append(i + 1);
  return out;
}

py::dict lasso_dict(const LassoSolution& s) {
  py::dict d;
  d["c_tilde"] = s.coefficients.c_tilde;
  if (s.coefficients.c_full) d["c_full"] = *s.coefficients.c_full;
  d["residual"] = s.residual;
  d["objective"] = s.objective;
  d["iterations"] = s.iterations;
  d["kkt_violation"] = s.kkt_violation;
  d["converged"] = s.converged;
  return d;
}

}  // namespace

PYBIND11_MODULE(_spicelab, m) {
  m.doc() = "Sparse spectral estimation by covariance fitting and its L1 equivalents";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<Error>(m, "SpicelabError", PyExc_RuntimeError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object inst = type(e.what());
      inst.attr("kind") = std::string(to_string(e.kind()));
      inst.attr("config_error") = is_config_error(e.kind());
      PyErr_SetObject(type.ptr(), inst.ptr());
    }
  });

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("max_iters", &SolverConfig::max_iters)
      .def_readwrite("eps_abs", &SolverConfig::eps_abs)
      .def_readwrite("eps_rel", &SolverConfig::eps_rel)
      .def_readwrite("penalty", &SolverConfig::penalty)
      .def_readwrite("relaxation", &SolverConfig::relaxation)
      .def_readwrite("kkt_tol", &SolverConfig::kkt_tol);

  py::class_<Dictionary>(m, "Dictionary")
      .def(py::init([](const std::vector<double>& t, const std::vector<double>& omega) {
             return build_dictionary(t, omega);
           }),
           py::arg("time_samples"), py::arg("freq_grid"))
      .def_property_readonly("num_samples", &Dictionary::num_samples)
      .def_property_readonly("num_atoms", &Dictionary::num_atoms)
      .def_property_readonly("time_samples", &Dictionary::time_samples)
      .def_property_readonly("freq_grid", &Dictionary::freq_grid)
      .def_property_readonly("atoms", &Dictionary::atoms);

  m.def(
      "frequency_grid", [](std::size_t k, double res) { return to_rvector(frequency_grid(k, res)); },
      py::arg("grid_size"), py::arg("resolution") = 1000.0);
  m.def(
      "uniform_time_samples",
      [](std::size_t n, double horizon, std::uint64_t seed) { return to_rvector(uniform_time_samples(n, horizon, seed)); },
      py::arg("n"), py::arg("horizon"), py::arg("seed"));

  m.def(
      "simulate",
      [](const Dictionary& dict, const std::vector<std::pair<std::size_t, double>>& active,
         const std::vector<double>& noise_variance, std::uint64_t seed) {
        std::vector<ActiveAtom> atoms;
        for (const auto& [idx, amp] : active) atoms.push_back({idx, amp});
        std::vector<double> var = noise_variance;
        if (var.size() == 1) var.assign(static_cast<std::size_t>(dict.num_samples()), var.front());
        return simulate_measurement(dict, atoms, var, seed).y;
      },
      py::arg("dictionary"), py::arg("active"), py::arg("noise_variance"), py::arg("seed"),
      "Measurement y for 1-based (grid_index, amplitude) pairs; a single variance is broadcast.");

  m.def(
      "weights", [](const Dictionary& dict, const CVector& y) { return compute_weights(dict, y).w; },
      py::arg("dictionary"), py::arg("y"));

  m.def(
      "spice",
      [](const Dictionary& dict, const CVector& y, const std::string& variant, std::size_t max_iters, double rel_tol) {
        SpiceConfig cfg;
        cfg.variant = parse_noise_model(variant);
        cfg.max_iters = max_iters;
        cfg.rel_tol = rel_tol;
        const auto s = spice_run(dict, y, cfg);
        py::dict d;
        d["p"] = s.powers.p;
        d["iteration"] = s.iteration;
        d["g_value"] = s.g_value;
        d["converged"] = s.converged;
        return d;
      },
      py::arg("dictionary"), py::arg("y"), py::arg("variant") = "hetero", py::arg("max_iters") = 5000,
      py::arg("rel_tol") = 1e-8);

  m.def(
      "solve_lad_lasso",
      [](const CMatrix& phi, const CVector& y, const SolverConfig& cfg) { return lasso_dict(solve_lad_lasso(phi, y, cfg)); },
      py::arg("phi"), py::arg("y"), py::arg("config") = SolverConfig{});
  m.def(
      "solve_sqrt_lasso",
      [](const CMatrix& phi, const CVector& y, const SolverConfig& cfg) { return lasso_dict(solve_sqrt_lasso(phi, y, cfg)); },
      py::arg("phi"), py::arg("y"), py::arg("config") = SolverConfig{});
  m.def("lad_objective", &lad_objective, py::arg("phi"), py::arg("y"), py::arg("c"));
  m.def("sqrt_lasso_objective", &sqrt_lasso_objective, py::arg("phi"), py::arg("y"), py::arg("c"));

  m.def(
      "certify",
      [](const Dictionary& dict, const CVector& y, const std::string& variant) {
        const auto r = certify_equivalence(dict, y, parse_noise_model(variant));
        py::dict d;
        d["support_spice"] = one_based(r.support_spice);
        d["support_lasso"] = one_based(r.support_lasso);
        d["g_spice"] = r.g_spice;
        d["g_lasso"] = r.g_lasso;
        d["p_spice"] = r.p_spice.p;
        d["p_lasso"] = r.p_lasso.p;
        d["linf_power_gap"] = r.linf_power_gap;
        d["noise_power_spice"] = r.noise_power_spice;
        d["noise_power_lasso"] = r.noise_power_lasso;
        d["json"] = certification_json(r, false);
        return d;
      },
      py::arg("dictionary"), py::arg("y"), py::arg("variant") = "hetero");

  m.def("default_config", [] { return config_to_json(ExperimentConfig{}); });
  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const auto r = run_experiment(config_from_json(config_json));
        const auto n = r.spectrum.size();
        RVector omega(n), ps(n), pe(n), cm(n);
        for (std::size_t i = 0; i < n; ++i) {
          const auto& row = r.spectrum[i];
          omega[i] = row.omega;
          ps[i] = row.p_spice;
          pe[i] = row.p_equiv;
          cm[i] = row.ctilde_modulus;
        }
        py::dict d;
        d["omega"] = omega;
        d["p_spice"] = ps;
        d["p_equiv"] = pe;
        d["ctilde_modulus"] = cm;
        d["peaks_spice"] = r.peaks_spice;
        d["peaks_equiv"] = r.peaks_equiv;
        d["g_spice"] = r.g_spice;
        d["g_equiv"] = r.g_equiv;
        d["report_json"] = report_json(r);
        d["spectrum_csv"] = spectrum_csv(r);
        return d;
      },
      py::arg("config_json"), "Runs both estimators on the instance described by a flat JSON config.");
}
