#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "qsed/analytic.hpp"
#include "qsed/estimators.hpp"
#include "qsed/io.hpp"
#include "qsed/scenario.hpp"

namespace py = pybind11;
using namespace qsed;

namespace {

std::vector<std::size_t> nodes_for(const TimeGrid& grid, const std::vector<double>& taus) {
  std::vector<std::size_t> nodes;
  for (double t : taus) {
    const auto k = grid.node_at(t);
    if (!k) throw InvalidParam("tau " + format_double(t) + " is not a grid node");
    nodes.push_back(*k);
  }
  return nodes;
}

EnsembleSpec make_spec(std::size_t paths, std::size_t batches, std::uint64_t seed, unsigned threads,
                       const std::string& scheme) {
  EnsembleSpec s;
  s.n_paths = paths;
  s.n_batches = batches;
  s.seed = seed;
  s.threads = threads;
  if (scheme == "euler") s.integrator.scheme = Scheme::EulerMaruyama;
  else if (scheme != "midpoint") throw InvalidParam("scheme must be 'midpoint' or 'euler'");
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Third-order quadrature moments of a nondegenerate parametric oscillator: QM (positive-P) vs SED.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidParam>(m, "InvalidParam", PyExc_ValueError);
  py::register_exception<UnequalDamping>(m, "UnequalDamping", base.ptr());
  py::register_exception<DegenerateEnsemble>(m, "DegenerateEnsemble", base.ptr());
  py::register_exception<WindowOutOfRange>(m, "WindowOutOfRange", base.ptr());
  py::register_exception<GridMismatch>(m, "GridMismatch", base.ptr());
  py::register_exception<NonFinite>(m, "NonFinite", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::enum_<Theory>(m, "Theory").value("QM", Theory::QM).value("SED", Theory::SED);

  py::class_<SystemParams>(m, "SystemParams")
      .def(py::init([](double g, double gamma, std::complex<double> epsilon, double Gamma) {
             return SystemParams::equal_damping(g, gamma, epsilon, Gamma);
           }),
           py::arg("g") = 0.1, py::arg("gamma") = 1.0, py::arg("epsilon") = std::complex<double>(1.0),
           py::arg("Gamma") = 1.0)
      .def_readwrite("g", &SystemParams::g)
      .def_readwrite("gamma1", &SystemParams::gamma1)
      .def_readwrite("gamma2", &SystemParams::gamma2)
      .def_readwrite("gamma3", &SystemParams::gamma3)
      .def_readwrite("epsilon", &SystemParams::epsilon)
      .def_readwrite("Gamma", &SystemParams::Gamma)
      .def_property_readonly("N", &SystemParams::photon_number)
      .def("__repr__", [](const SystemParams& p) {
        std::ostringstream os;
        os << "SystemParams(g=" << p.g << ", gamma=(" << p.gamma1 << ", " << p.gamma2 << ", " << p.gamma3
           << "), epsilon=" << p.epsilon << ", Gamma=" << p.Gamma << ")";
        return os.str();
      });

  py::class_<PhaseAngles>(m, "PhaseAngles")
      .def(py::init([](std::array<double, 3> theta, std::array<double, 3> theta_bar) {
             return PhaseAngles{theta, theta_bar};
           }),
           py::arg("theta") = std::array<double, 3>{}, py::arg("theta_bar") = std::array<double, 3>{})
      .def_readwrite("theta", &PhaseAngles::theta)
      .def_readwrite("theta_bar", &PhaseAngles::theta_bar);

  py::class_<HomodyneParams>(m, "HomodyneParams")
      .def(py::init([](double e, double A, double eta, double E) { return HomodyneParams{e, A, eta, E}; }),
           py::arg("e_charge") = 1.0, py::arg("amp_A") = 1.0, py::arg("eta") = 1.0, py::arg("E_lo") = 1.0)
      .def_readwrite("e_charge", &HomodyneParams::e_charge)
      .def_readwrite("amp_A", &HomodyneParams::amp_A)
      .def_readwrite("eta", &HomodyneParams::eta)
      .def_readwrite("E_lo", &HomodyneParams::E_lo);

  // analytic
  m.def("qm_triple_intracavity", &qm_triple_intracavity, py::arg("tau"), py::arg("params"));
  m.def("sed_triple_intracavity", &sed_triple_intracavity, py::arg("tau"), py::arg("params"));
  m.def("qm_moment_M", &qm_moment_M, py::arg("tau"), py::arg("params"), py::arg("angles") = PhaseAngles{});
  m.def("sed_moment_M", &sed_moment_M, py::arg("tau"), py::arg("params"), py::arg("angles") = PhaseAngles{});
  m.def("qm_external", &qm_external, py::arg("tau_f"), py::arg("params"), py::arg("homodyne") = HomodyneParams{});
  m.def("sed_external", &sed_external, py::arg("tau_f"), py::arg("params"), py::arg("homodyne") = HomodyneParams{});
  m.def("signal_to_noise", &signal_to_noise, py::arg("n"), py::arg("eta"), py::arg("g"), py::arg("tau_f"));
  m.def("samples_for_snr", &samples_for_snr, py::arg("target"), py::arg("eta"), py::arg("g"), py::arg("tau_f"));

  m.def("crystals", [] {
    py::list out;
    for (const auto& c : builtin_crystal_table().crystals) {
      const auto x = crystal_to_coupling(c.spec);
      py::dict d;
      d["name"] = c.spec.name;
      d["G"] = x.G;
      d["Gamma"] = x.Gamma;
      d["g"] = x.g;
      d["published"] = py::dict(py::arg("G") = c.reference.G, py::arg("Gamma") = c.reference.Gamma,
                                py::arg("g") = c.reference.g, py::arg("qm_external") = c.reference_qm_external,
                                py::arg("sed_external") = c.reference_sed_external,
                                py::arg("sample_size_snr1") = c.reference_sample_size);
      out.append(d);
    }
    return out;
  });

  // estimators
  py::class_<MomentEstimate>(m, "MomentEstimate")
      .def_readonly("mean", &MomentEstimate::mean)
      .def_readonly("std_error", &MomentEstimate::std_error)
      .def_readonly("std_error_imag", &MomentEstimate::std_error_imag)
      .def_readonly("n_paths", &MomentEstimate::n_paths)
      .def_readonly("n_batches", &MomentEstimate::n_batches)
      .def_property_readonly("imag_diagnostic", &MomentEstimate::imag_diagnostic)
      .def("__repr__", [](const MomentEstimate& e) {
        std::ostringstream os;
        os << "MomentEstimate(mean=" << e.mean << ", std_error=" << e.std_error << ", n_paths=" << e.n_paths << ")";
        return os.str();
      });

  m.def(
      "triple_central_moment",
      [](const std::vector<Triple>& values, std::size_t n_batches) { return triple_central_moment(values, n_batches); },
      py::arg("values"), py::arg("n_batches") = 100);

  py::class_<EnsembleResult>(m, "EnsembleResult")
      .def_readonly("taus", &EnsembleResult::taus)
      .def_readonly("moments", &EnsembleResult::moments)
      .def_readonly("theory", &EnsembleResult::theory)
      .def_readonly("seed", &EnsembleResult::seed)
      .def_property_readonly("warnings", [](const EnsembleResult& r) { return r.validation.warnings; })
      .def("to_csv", [](const EnsembleResult& r) {
        std::ostringstream os;
        write_ensemble_csv(os, r);
        return os.str();
      });

  m.def(
      "run_intracavity_experiment",
      [](Theory theory, const SystemParams& p, const std::vector<double>& taus, std::size_t paths, std::uint64_t seed,
         const PhaseAngles& angles, double dt, std::size_t batches, unsigned threads, const std::string& scheme) {
        double t_end = 0.0;
        for (double t : taus) t_end = std::max(t_end, t);
        if (taus.empty()) throw InvalidParam("taus must not be empty");
        const TimeGrid grid(0.0, t_end, dt);
        const auto nodes = nodes_for(grid, taus);
        const auto spec = make_spec(paths, batches, seed, threads, scheme);
        py::gil_scoped_release release;
        return run_intracavity_experiment(theory, p, angles, grid, spec, nodes);
      },
      py::arg("theory"), py::arg("params"), py::arg("taus"), py::arg("paths") = 100000, py::arg("seed") = 0,
      py::arg("angles") = PhaseAngles{}, py::arg("dt") = TimeGrid::default_dt, py::arg("batches") = 100,
      py::arg("threads") = 0, py::arg("scheme") = "midpoint");

  m.def(
      "run_external_experiment",
      [](Theory theory, const SystemParams& p, double tau_f, std::size_t paths, std::uint64_t seed,
         const HomodyneParams& h, const PhaseAngles& angles, double dt, std::size_t batches, unsigned threads) {
        const auto spec = make_spec(paths, batches, seed, threads, "midpoint");
        py::gil_scoped_release release;
        return run_external_experiment(theory, p, h, angles, tau_f, dt, spec);
      },
      py::arg("theory"), py::arg("params"), py::arg("tau_f"), py::arg("paths") = 100000, py::arg("seed") = 0,
      py::arg("homodyne") = HomodyneParams{}, py::arg("angles") = PhaseAngles{}, py::arg("dt") = TimeGrid::default_dt,
      py::arg("batches") = 100, py::arg("threads") = 0);

  // scenarios
  m.def("preset_names", &preset_names);
  m.def("preset_text", [](const std::string& name) { return std::string(preset_text(name)); }, py::arg("name"));
  m.def(
      "run_preset",
      [](const std::string& name, const std::string& out, std::optional<std::size_t> paths,
         std::optional<std::uint64_t> seed) {
        Overrides o;
        o.out = out;
        o.paths = paths;
        o.seed = seed;
        std::ostringstream log, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_preset(name, o, log, err);
        }
        return py::make_tuple(code, log.str(), err.str());
      },
      py::arg("name"), py::arg("out") = "out", py::arg("paths") = py::none(), py::arg("seed") = py::none(),
      "Runs a built-in preset; returns (exit_code, log, errors).");
}
