// Command-line front end: run, compare, symmetry, kz.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tfim/tfim.hpp"

namespace {

using tfim::io::format_number;

int cmd_run(const std::string& config_path) {
  const tfim::io::RunConfig cfg = tfim::io::load_config(config_path);
  const tfim::io::ResultFile result = tfim::io::run(cfg);
  const std::string out = tfim::io::output_path(cfg);
  tfim::io::save_result(out, result);
  std::cout << "wrote " << out << " (" << result.series.size() << " records, status " << result.series.meta.status
            << ")\n";
  if (!result.series.meta.note.empty()) std::cout << "note: " << result.series.meta.note << '\n';
  return 0;
}

int cmd_compare(const std::string& a, const std::string& b, const std::vector<double>& times) {
  const auto fa = tfim::io::load_result(a);
  const auto fb = tfim::io::load_result(b);
  std::cout << "t\teps_z\teps_zz\n";
  for (const auto& r : tfim::io::compare(fa.series, fb.series, times))
    std::cout << format_number(r.t) << '\t' << format_number(r.eps_z) << '\t'
              << (r.eps_zz ? format_number(*r.eps_zz) : std::string("undefined")) << '\n';
  return 0;
}

int cmd_symmetry(const std::string& file, const std::string& cls_name, double xi, double threshold) {
  const auto cls = cls_name == "mag" ? tfim::diag::ObservableClass::magnetization
                                     : tfim::diag::ObservableClass::correlation;
  if (xi <= 0.0) xi = tfim::diag::default_xi(cls);
  const auto f = tfim::io::load_result(file);
  const auto summary = tfim::io::symmetry(f.series, cls, xi, threshold);
  std::cout << "t\teps_max\teps_rel_max\tconverged\n";
  for (const auto& row : summary.rows)
    std::cout << format_number(row.t) << '\t' << format_number(row.report.eps_max) << '\t'
              << format_number(row.report.eps_rel_max) << '\t' << (row.report.converged ? 1 : 0) << '\n';
  std::cout << "# converged_until: " << format_number(summary.converged_until) << '\n';
  return 0;
}

int cmd_kz(const std::vector<std::string>& files, const std::vector<double>& taus, double tc, double dt,
           const tfim::diag::KZExponents& e) {
  std::vector<tfim::ObservableSeries> runs;
  for (const auto& f : files) runs.push_back(tfim::io::load_result(f).series);
  const auto set = tfim::io::kz(runs, taus, tc, dt, e);
  std::cout << "tau\tdelta\tC\tx\ty\n";
  for (std::size_t i = 0; i < set.raw.size(); ++i)
    for (std::size_t k = 0; k < set.x[i].size(); ++k)
      std::cout << format_number(set.raw[i].tau) << '\t' << format_number(set.raw[i].delta[k]) << '\t'
                << format_number(set.raw[i].C[k]) << '\t' << format_number(set.x[i][k]) << '\t'
                << format_number(set.y[i][k]) << '\n';
  std::cout << "# collapse_quality: " << format_number(tfim::diag::collapse_quality(set)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transverse-field Ising dynamics toolkit"};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "Run one simulation from a JSON config");
  run->add_option("--config", config, "Config file")->required();

  std::string file_a, file_b;
  std::vector<double> times;
  auto* compare = app.add_subcommand("compare", "eps_z and eps_zz between two result files");
  compare->add_option("--a", file_a, "Reference result (A1)")->required();
  compare->add_option("--b", file_b, "Compared result (A2)")->required();
  compare->add_option("--t", times, "Times to compare (default: every record of --a)")->delimiter(',');

  std::string sym_file, sym_class;
  double xi = 0.0, threshold = 0.4;
  auto* symmetry = app.add_subcommand("symmetry", "D4 symmetry error per record and convergence horizon");
  symmetry->add_option("--file", sym_file, "Result file")->required();
  symmetry->add_option("--class", sym_class, "Observable class")->required()->check(CLI::IsMember({"mag", "corr"}));
  symmetry->add_option("--xi", xi, "Regulariser (default 0.01 for mag, 0.005 for corr)");
  symmetry->add_option("--threshold", threshold, "Relative-error threshold");

  std::vector<std::string> kz_files;
  std::vector<double> taus;
  double tc = 0.0, kz_dt = 0.0;
  tfim::diag::KZExponents exps;
  auto* kz = app.add_subcommand("kz", "Kibble-Zurek rescaling and collapse quality");
  kz->add_option("--files", kz_files, "Result files")->required()->delimiter(',');
  kz->add_option("--tau", taus, "Ramp time per file")->required()->delimiter(',');
  kz->add_option("--tc", tc, "Critical time")->required();
  kz->add_option("--dt", kz_dt, "Offset from the critical time")->required();
  kz->add_option("--nu", exps.nu, "Correlation-length exponent");
  kz->add_option("--z", exps.z, "Dynamical exponent");
  kz->add_option("--eta", exps.eta, "Anomalous dimension");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : tfim::exit_code(tfim::ErrorCategory::config);
  }

  try {
    if (*run) return cmd_run(config);
    if (*compare) return cmd_compare(file_a, file_b, times);
    if (*symmetry) return cmd_symmetry(sym_file, sym_class, xi, threshold);
    if (*kz) return cmd_kz(kz_files, taus, tc, kz_dt, exps);
  } catch (const tfim::Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", tfim::category_name(e.category()), e.what());
    return tfim::exit_code(e.category());
  } catch (const std::bad_alloc&) {
    std::fprintf(stderr, "error: memory-guard: allocation failed\n");
    return tfim::exit_code(tfim::ErrorCategory::memory_guard);
  }
  return 0;
}
