// qsed: command-line runner for the QM vs SED third-order moment experiments.

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

#include "qsed/scenario.hpp"

namespace {

void add_overrides(CLI::App* cmd, qsed::Overrides& o) {
  cmd->add_option("--paths", o.paths, "Number of stochastic paths")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--dt", o.dt, "Integration step")->check(CLI::PositiveNumber);
  cmd->add_option("--batches", o.batches, "Number of batches for batch-means errors")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", o.threads, "Worker threads (0: all cores)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_flag("--full", o.full, "Use the full-scale path count of the config");
}

int load(const std::string& path, const qsed::Overrides& o, qsed::ScenarioConfig& c) {
  try {
    c = qsed::load_scenario(path);
  } catch (const qsed::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return qsed::exit_code::config;
  }
  qsed::apply(o, c);
  return qsed::exit_code::ok;
}

int read_rows(const std::string& path, std::vector<qsed::EnsembleCsvRow>& rows) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "config error: cannot open '" << path << "'\n";
    return qsed::exit_code::config;
  }
  try {
    rows = qsed::read_ensemble_csv(in);
  } catch (const qsed::Error& e) {
    std::cerr << "config error: " << path << ": " << e.what() << '\n';
    return qsed::exit_code::config;
  }
  return qsed::exit_code::ok;
}

int print_crystals(const std::string& file) {
  qsed::CrystalTable table;
  try {
    table = file.empty() ? qsed::builtin_crystal_table() : qsed::load_crystal_table(file);
  } catch (const qsed::Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return qsed::exit_code::config;
  }
  std::cout << std::setprecision(4);
  for (const auto& p : table.crystals) {
    const auto k = qsed::crystal_to_coupling(p.spec);
    std::cout << p.spec.name << "\n"
              << "  d_eff = " << p.spec.d_eff << " pm/V, lambda_pump = " << p.spec.lambda_pump
              << " m, V = " << p.spec.mode_volume() << " m^3, T = " << p.spec.transmission << "\n"
              << "  computed:  G = " << k.G << " s^-1, Gamma = " << k.Gamma << " s^-1, g = " << k.g << "\n"
              << "  published: G = " << p.reference.G << " s^-1, Gamma = " << p.reference.Gamma
              << " s^-1, g = " << p.reference.g << "\n"
              << "  published external moments: QM = " << p.reference_qm_external
              << ", SED = " << p.reference_sed_external << "; n(S=1) = " << p.reference_sample_size << "\n";
  }
  return qsed::exit_code::ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Third-order quadrature moments of the parametric oscillator: quantum (positive-P) vs SED"};
  app.require_subcommand(1);
  qsed::Overrides o;

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run a scenario config");
  run->add_option("config", config_path, "Scenario file (.ini)")->required();
  add_overrides(run, o);

  auto* sweep = app.add_subcommand("sweep", "Run a scenario once per value of a parameter");
  sweep->add_option("config", config_path, "Scenario file (.ini)")->required();
  std::string axis, values;
  sweep->add_option("--axis", axis, "g, gamma, N, tau_f or n_paths (default: the [sweep] section)");
  sweep->add_option("--values", values, "Comma list, linspace(a, b, n) or logspace(a, b, n)");
  add_overrides(sweep, o);

  auto* cmp = app.add_subcommand("compare", "Difference report of two result CSVs");
  std::string csv_a, csv_b;
  cmp->add_option("a", csv_a, "First result CSV (e.g. QM)")->required();
  cmp->add_option("b", csv_b, "Second result CSV (e.g. SED)")->required();
  cmp->add_option("--out", o.out, "Write compare.csv into this directory instead of stdout");

  auto* preset = app.add_subcommand("preset", "Run a built-in figure or table preset");
  std::string preset_name;
  bool print_only = false, list = false;
  preset->add_option("name", preset_name, "Preset name");
  preset->add_flag("--print", print_only, "Print the preset config and exit");
  preset->add_flag("--list", list, "List the presets and exit");
  add_overrides(preset, o);

  auto* crystals = app.add_subcommand("crystals", "Show the crystal presets and their couplings");
  std::string crystal_file;
  crystals->add_option("--file", crystal_file, "Crystal table JSON (default: built-in)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return qsed::exit_code::config;
  }

  if (*run) {
    qsed::ScenarioConfig c;
    if (int rc = load(config_path, o, c)) return rc;
    return qsed::run(c, std::cout, std::cerr);
  }
  if (*sweep) {
    qsed::ScenarioConfig c;
    if (int rc = load(config_path, o, c)) return rc;
    qsed::SweepSpec s;
    try {
      if (!axis.empty() || !values.empty()) {
        if (axis.empty() && !c.sweep) throw qsed::ConfigError("--values needs --axis");
        s.axis = axis.empty() ? c.sweep->axis : qsed::sweep_axis_from_string(axis);
        s.values = qsed::parse_value_list(values);
      } else if (c.sweep) {
        s = *c.sweep;
      } else {
        throw qsed::ConfigError("no sweep given: pass --axis and --values or add a [sweep] section");
      }
    } catch (const qsed::ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return qsed::exit_code::config;
    }
    return qsed::sweep(c, s, std::cout, std::cerr);
  }
  if (*cmp) {
    std::vector<qsed::EnsembleCsvRow> a, b;
    if (int rc = read_rows(csv_a, a)) return rc;
    if (int rc = read_rows(csv_b, b)) return rc;
    try {
      const auto report = qsed::compare(a, b);
      if (o.out) {
        std::filesystem::create_directories(*o.out);
        std::ofstream os(std::filesystem::path(*o.out) / "compare.csv");
        qsed::write_compare_csv(os, report);
      } else {
        qsed::write_compare_csv(std::cout, report);
      }
      for (const auto& v : report.verdicts) std::cerr << "verdict: " << v << '\n';
    } catch (const qsed::GridMismatch& e) {
      std::cerr << "grid mismatch: " << e.what() << '\n';
      return qsed::exit_code::config;
    }
    return qsed::exit_code::ok;
  }
  if (*preset) {
    if (list) {
      for (const auto& n : qsed::preset_names()) std::cout << n << '\n';
      return qsed::exit_code::ok;
    }
    if (preset_name.empty()) {
      std::cerr << "config error: preset name required (see --list)\n";
      return qsed::exit_code::config;
    }
    if (print_only) {
      try {
        std::cout << qsed::preset_text(preset_name);
      } catch (const qsed::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return qsed::exit_code::config;
      }
      return qsed::exit_code::ok;
    }
    return qsed::run_preset(preset_name, o, std::cout, std::cerr);
  }
  return print_crystals(crystal_file);
}
