// spicelab command-line driver.
//
//   spicelab simulate  write the configured measurement as CSV
//   spicelab run       SPICE + L1 spectra, report and state files
//   spicelab certify   equivalence certificate for the configured instance
//   spicelab bench     per-size timing table

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "spicelab/error.hpp"
#include "spicelab/experiment.hpp"

namespace {

using namespace spicelab;

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::string> out;
  std::optional<std::size_t> iters;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--variant", o.variant, "noise model")->check(CLI::IsMember({"hetero", "equal"}));
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--iters", o.iters, "SPICE iterations");
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.variant) c.variant = parse_noise_model(*o.variant);
  if (o.out) c.output_dir = *o.out;
  if (o.iters) c.spice_iters = *o.iters;
  validate(c);
  return c;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error(ErrorKind::Io, "cannot write " + path.string());
}

void make_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

int cmd_simulate(const ExperimentConfig& c) {
  const Instance inst = make_instance(c);
  make_dir(c.output_dir);
  const auto& t = inst.dict.time_samples();
  const auto path = c.output_dir / "measurement.csv";
  write_measurement_csv(path, {t.data(), static_cast<std::size_t>(t.size())}, inst.measurement.y);
  write_file(c.output_dir / "config.json", config_to_json(c) + "\n");
  std::cout << "wrote " << path.string() << " (" << t.size() << " samples)\n";
  return 0;
}

void print_list(const char* label, const std::vector<std::size_t>& v) {
  std::cout << label;
  for (auto i : v) std::cout << ' ' << i;
  std::cout << '\n';
}

int cmd_run(const ExperimentConfig& c) {
  const RunReport r = run_experiment(c);
  write_run_outputs(r, c.output_dir);
  print_list("peaks spice:", r.peaks_spice);
  print_list("peaks equiv:", r.peaks_equiv);
  std::printf("g spice %.12g  g equiv %.12g\n", r.g_spice, r.g_equiv);
  std::printf("spice %zu iters (%.3f s), l1 %zu iters (%.3f s)%s\n", r.spice_iterations, r.timings.spice_seconds,
              r.lasso_iterations, r.timings.lasso_seconds, r.lasso_converged ? "" : " [l1 not converged]");
  std::cout << "outputs in " << c.output_dir.string() << '\n';
  return 0;
}

int cmd_certify(const ExperimentConfig& c, bool iters_given) {
  const Instance inst = make_instance(c);
  CertifyConfig cc;
  cc.spice.variant = c.variant;
  if (iters_given) cc.spice.max_iters = c.spice_iters;
  cc.support_threshold = c.support_threshold;
  const CertificationReport rep = certify_equivalence(inst.dict, inst.measurement.y, c.variant, cc);
  make_dir(c.output_dir);
  write_file(c.output_dir / "certification.json", certification_json(rep) + "\n");
  std::printf("supports %s, g relative gap %.3e, mass gap %.3e\n", rep.supports_agree() ? "agree" : "differ",
              rep.g_relative_gap(), rep.linf_power_gap);
  std::cout << "wrote " << (c.output_dir / "certification.json").string() << '\n';
  return 0;
}

int cmd_bench(const ExperimentConfig& c) {
  const auto rows = run_benchmark(c.bench_sizes, c);
  const std::string csv = bench_csv(rows);
  make_dir(c.output_dir);
  write_file(c.output_dir / "bench.csv", csv);
  std::cout << csv;
  for (const auto& r : rows)
    if (!r.ok) return kExitNumeric;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse spectral estimation by covariance fitting and L1 regression"};
  app.require_subcommand(1);

  CommonOptions opts;
  auto* simulate = app.add_subcommand("simulate", "simulate a measurement and write it as CSV");
  auto* run = app.add_subcommand("run", "run SPICE and the L1 route, write spectra and reports");
  auto* certify = app.add_subcommand("certify", "certify SPICE / L1 equivalence on one instance");
  auto* bench = app.add_subcommand("bench", "time SPICE and the L1 solver across sizes");
  for (auto* cmd : {simulate, run, certify, bench}) add_common(cmd, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    const ExperimentConfig config = resolve(opts);
    if (*simulate) return cmd_simulate(config);
    if (*run) return cmd_run(config);
    if (*certify) return cmd_certify(config, opts.iters.has_value());
    return cmd_bench(config);
  } catch (const Error& e) {
    std::cerr << "spicelab: " << e.what() << '\n';
    return is_config_error(e.kind()) ? kExitConfig : kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "spicelab: " << e.what() << '\n';
    return 1;
  }
}
