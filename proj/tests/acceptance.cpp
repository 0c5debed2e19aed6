// Acceptance suite: one PASS/FAIL line per criterion, details indented above it.
// Usage: qsed_acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qsed/analytic.hpp"
#include "qsed/estimators.hpp"
#include "qsed/io.hpp"
#include "support.hpp"

using namespace qsed;
using qsed::test::Sample;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    details.push_back(std::string(ok ? "ok   " : "MISS ") + what);
    pass = pass && ok;
  }
  void note(const std::string& what) { details.push_back("note " + what); }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(double value, double ref) { return (value - ref) / ref; }

EnsembleSpec spec_of(std::size_t paths, std::uint64_t seed) {
  EnsembleSpec s;
  s.n_paths = paths;
  s.n_batches = 100;
  s.seed = seed;
  return s;
}

const TimeGrid unit_grid(0.0, 1.0, 0.0025);

std::vector<std::size_t> nodes_at(std::initializer_list<double> taus) {
  std::vector<std::size_t> out;
  for (double t : taus) out.push_back(*unit_grid.node_at(t));
  return out;
}

// Desk-scale g = 0.1, N = 1 runs are shared by criteria 4 and 6.
const EnsembleResult& small_g_run(Theory t) {
  static std::map<Theory, EnsembleResult> cache;
  auto it = cache.find(t);
  if (it == cache.end()) {
    const auto p = SystemParams::equal_damping(0.1, 1.0, 1.0);
    it = cache
             .emplace(t, run_intracavity_experiment(t, p, PhaseAngles{}, unit_grid,
                                                    spec_of(100000, t == Theory::QM ? 4001 : 4002),
                                                    nodes_at({0.25, 0.5, 1.0})))
             .first;
  }
  return it->second;
}

// ---------------------------------------------------------------------------

Outcome table1() {
  Outcome o;
  const auto& table = builtin_crystal_table();
  for (const auto& c : table.crystals) {
    const auto x = crystal_to_coupling(c.spec);
    const double dG = rel(x.G, c.reference.G);
    const double dg = rel(x.g, c.reference.g);
    o.check(std::abs(dG) <= 0.05, fmt("%s G = %.4g /s (published %.2g, %+.2f%%)", c.spec.name.c_str(), x.G,
                                      c.reference.G, 100 * dG));
    if (c.spec.name == "AgGaSe2") {
      const double dGam = rel(x.Gamma, c.reference.Gamma);
      o.check(std::abs(dGam) <= 0.05, fmt("%s Gamma = %.4g /s (published %.2g, %+.2f%%)", c.spec.name.c_str(),
                                          x.Gamma, c.reference.Gamma, 100 * dGam));
    }
    o.check(std::abs(dg) <= 0.05, fmt("%s g = %.4g (published %.2g, %+.2f%%)", c.spec.name.c_str(), x.g,
                                      c.reference.g, 100 * dg));
  }
  return o;
}

Outcome table2() {
  Outcome o;
  const auto& table = builtin_crystal_table();
  for (const auto& c : table.crystals) {
    const auto p = external_params(c, table.external);
    const auto h = external_homodyne(table.external);
    const double qm = qm_external(table.external.tau_f, p, h);
    const double sed = sed_external(table.external.tau_f, p, h);
    const double dq = rel(qm, c.reference_qm_external);
    const double ds = rel(sed, c.reference_sed_external);
    o.check(std::abs(dq) <= 0.03, fmt("%s QM external = %.4g (published %.2g, %+.2f%%)", c.spec.name.c_str(), qm,
                                      c.reference_qm_external, 100 * dq));
    o.check(std::abs(ds) <= 0.03, fmt("%s SED external = %.4g (published %.2g, %+.2f%%)", c.spec.name.c_str(),
                                      sed, c.reference_sed_external, 100 * ds));
  }
  return o;
}

Outcome sample_sizes() {
  Outcome o;
  for (const auto& c : builtin_crystal_table().crystals) {
    const double n = samples_for_snr(1.0, 1.0, c.reference.g, 0.1);
    const double d = rel(n, c.reference_sample_size);
    o.check(std::abs(d) <= 0.05, fmt("%s S = 1 at n = %.4g (published %.2g, %+.2f%%)", c.spec.name.c_str(), n,
                                     c.reference_sample_size, 100 * d));
  }
  return o;
}

Outcome intracavity_vs_analytic() {
  Outcome o;
  const auto p = SystemParams::equal_damping(0.1, 1.0, 1.0);
  for (Theory t : {Theory::QM, Theory::SED}) {
    const auto& r = small_g_run(t);
    for (std::size_t i = 0; i < r.taus.size(); ++i) {
      const double tau = r.taus[i];
      const auto& m = r.moments[i];
      const double ref = t == Theory::QM ? qm_moment_M(tau, p, PhaseAngles{}) : sed_moment_M(tau, p, PhaseAngles{});
      const double z = (m.mean.real() - ref) / m.std_error;
      o.check(std::abs(z) <= 3.0, fmt("%s tau=%.2f: sim %.4e +- %.2e, analytic %.4e, z = %+.2f",
                                      std::string(to_string(t)).c_str(), tau, m.mean.real(), m.std_error, ref, z));
    }
  }
  return o;
}

Outcome sign_opposition() {
  Outcome o;
  const auto nodes = nodes_at({0.1, 1.0});
  for (double N : {1.0, 10.0}) {
    const auto p = SystemParams::equal_damping(1.0, 1.0, std::sqrt(N));
    for (Theory t : {Theory::QM, Theory::SED}) {
      const std::uint64_t seed = 5000 + static_cast<std::uint64_t>(N) * 10 + (t == Theory::QM ? 1 : 2);
      const auto r = run_intracavity_experiment(t, p, PhaseAngles{}, unit_grid, spec_of(100000, seed), nodes);
      const auto& m = r.moments[1];
      const double z = m.mean.real() / m.std_error;
      const bool ok = t == Theory::QM ? z <= -3.0 : z >= 3.0;
      const std::string name(to_string(t));
      o.check(ok, fmt("N=%g %s at tau=1: %.4e +- %.2e (%+.1f SE)", N, name.c_str(), m.mean.real(), m.std_error, z));
      if (!ok) {
        const auto& e = r.moments[0];
        o.note(fmt("N=%g %s at tau=0.1: %.4e +- %.2e; at g=1 the pump is above the gain threshold (g*sqrt(N) > gamma) "
                   "and the amplified SED fields reverse the sign well before tau=1",
                   N, name.c_str(), e.mean.real(), e.std_error));
      }
    }
  }
  return o;
}

Outcome order_in_g() {
  Outcome o;
  const PhaseAngles a;
  for (double lambda : {2.0, 0.5, 10.0}) {
    const auto p1 = SystemParams::equal_damping(0.1, 1.0, 1.0);
    const auto p2 = SystemParams::equal_damping(0.1 * lambda, 1.0, 1.0);
    const double rq = qm_moment_M(1.0, p2, a) / qm_moment_M(1.0, p1, a);
    const double rs = sed_moment_M(1.0, p2, a) / sed_moment_M(1.0, p1, a);
    o.check(std::abs(rq / (lambda * lambda * lambda) - 1.0) < 1e-12 && std::abs(rs / lambda - 1.0) < 1e-12,
            fmt("analytic lambda=%g: qm ratio %.15g, sed ratio %.15g", lambda, rq, rs));
  }
  const auto& lo = small_g_run(Theory::QM).moments.back();
  const auto p = SystemParams::equal_damping(0.2, 1.0, 1.0);
  const auto hi_run =
      run_intracavity_experiment(Theory::QM, p, PhaseAngles{}, unit_grid, spec_of(100000, 6001), nodes_at({1.0}));
  const auto& hi = hi_run.moments[0];
  const double zl = std::abs(lo.mean.real()) / lo.std_error;
  const double zh = std::abs(hi.mean.real()) / hi.std_error;
  o.check(zl >= 3.0 && zh >= 3.0, fmt("significance at tau=1: g=0.1 %.1f SE, g=0.2 %.1f SE", zl, zh));
  const double ratio = hi.mean.real() / lo.mean.real();
  const double se = std::abs(ratio) * std::hypot(lo.std_error / lo.mean.real(), hi.std_error / hi.mean.real());
  o.check(ratio >= 6.0 && ratio <= 10.0, fmt("simulated QM(g=0.2)/QM(g=0.1) = %.3f +- %.3f", ratio, se));
  return o;
}

// Leading order in g, exact in tau_f, for gamma = 1: the external QM moment
// is (formula at tau_f -> 0) * I(T) / (T^6/24), with
//   I(T) = int_0^T F(s)^2 (1 - e^{-(T-s)}) ds,
//   F(s) = int_0^T e^{-(t+s)} (e^{min(t,s)} - 1) dt.
double qm_external_finite_window_factor(double T) {
  auto F = [T](double s) {
    const double es = std::exp(-s);
    return es * (s - 1.0 + es) + (1.0 - es) * (es - std::exp(-T));
  };
  auto f = [&](double s) {
    const double v = F(s);
    return v * v * -std::expm1(-(T - s));
  };
  const int n = 4000;
  const double h = T / n;
  double sum = f(0.0) + f(T);
  for (int k = 1; k < n; ++k) sum += f(k * h) * (k % 2 ? 4.0 : 2.0);
  return sum * h / 3.0 / (std::pow(T, 6) / 24.0);
}

Outcome external_oracle() {
  Outcome o;
  const auto p = SystemParams::equal_damping(0.1, 1.0, 1.0);
  const HomodyneParams h;
  const double tau_f = 0.1;
  const double dt = 0.0025;

  const auto qm = run_external_experiment(Theory::QM, p, h, PhaseAngles{}, tau_f, dt, spec_of(1000000, 7001));
  const double q_ref = qm_external(tau_f, p, h);
  const double zq = (qm.mean.real() - q_ref) / qm.std_error;
  o.check(std::abs(zq) <= 3.0,
          fmt("QM external: sim %.5e +- %.2e, formula %.5e, z = %+.1f", qm.mean.real(), qm.std_error, q_ref, zq));
  const double factor = qm_external_finite_window_factor(tau_f);
  const double q_exact = q_ref * factor;
  o.note(fmt("QM: the formula is the tau_f -> 0 limit; the O(g^3) term integrated exactly over the window is "
             "%.5f x formula = %.5e, sim z = %+.2f against it",
             factor, q_exact, (qm.mean.real() - q_exact) / qm.std_error));

  const auto sed = run_external_experiment(Theory::SED, p, h, PhaseAngles{}, tau_f, dt, spec_of(1000000, 7002));
  const double s_ref = sed_external(tau_f, p, h);
  const double zs = (sed.mean.real() - s_ref) / sed.std_error;
  o.check(std::abs(zs) <= 3.0,
          fmt("SED external: sim %.5e +- %.2e, formula %.5e, z = %+.2f", sed.mean.real(), sed.std_error, s_ref, zs));

  const auto sed2 =
      run_external_experiment(Theory::SED, p, h, PhaseAngles{}, 2.0 * tau_f, dt, spec_of(1000000, 7003));
  const double ratio = sed2.mean.real() / sed.mean.real();
  const double se = std::abs(ratio) * std::hypot(sed.std_error / sed.mean.real(), sed2.std_error / sed2.mean.real());
  o.check(std::abs(ratio - 16.0) <= 4.0 * se,
          fmt("SED tau_f^4 scaling: M(0.2)/M(0.1) = %.3f +- %.3f (z = %+.2f against 16)", ratio, se,
              (ratio - 16.0) / se));
  return o;
}

template <std::size_t K, class Gen>
double max_covariance_z(Gen&& gen, std::size_t draws, const std::array<std::array<double, K>, K>& plain,
                        const std::array<std::array<double, K>, K>& conj) {
  std::array<std::array<Sample, K>, K> pr{}, pi{}, cr{}, ci{};
  for (std::size_t n = 0; n < draws; ++n) {
    const auto w = gen();
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) {
        const cplx a = w[i] * w[j];
        const cplx b = w[i] * std::conj(w[j]);
        pr[i][j].add(a.real());
        pi[i][j].add(a.imag());
        cr[i][j].add(b.real());
        ci[i][j].add(b.imag());
      }
  }
  double zmax = 0.0;
  auto take = [&](const Sample& s, double target) {
    if (s.variance() > 0.0) zmax = std::max(zmax, s.z(target));
  };
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) {
      take(pr[i][j], plain[i][j]);
      take(pi[i][j], 0.0);
      take(cr[i][j], conj[i][j]);
      take(ci[i][j], 0.0);
    }
  return zmax;
}

Outcome engine_oracles() {
  Outcome o;
  {
    const test::OuModel ou;
    Sample re, im, var;
    const double m = std::exp(-1.0);
    for (std::uint64_t s = 0; s < 100000; ++s) {
      const auto traj = integrate_path(ou, unit_grid, IntegratorConfig{}, path_seed(8001, s));
      const cplx x = traj.points.back()[0];
      re.add(x.real());
      im.add(x.imag());
      var.add(std::norm(x - m));
    }
    const double v_ref = 0.5 * -std::expm1(-2.0);
    o.check(re.z(m) <= 4.0 && im.z(0.0) <= 4.0 && var.z(v_ref) <= 4.0,
            fmt("OU at t=1: mean z = %.2f (re), %.2f (im); variance %.5f vs %.5f, z = %.2f", re.z(m), im.z(0.0),
                var.mean(), v_ref, var.z(v_ref)));
  }
  {
    const test::DecayModel decay;
    const auto traj = integrate_path(decay, unit_grid, IntegratorConfig{}, 1);
    double err = 0.0;
    for (std::size_t k = 0; k < traj.points.size(); ++k)
      err = std::max(err, std::abs(traj.points[k][0] - std::exp(-unit_grid.time(k))));
    o.check(err < 1e-5, fmt("deterministic decay: max global error %.2e at dt = 0.0025", err));
  }
  {
    const double dt = 0.0025;
    Rng rng = make_rng(8002);
    std::array<std::array<double, 4>, 4> plain{}, conj{};
    plain[noise_col::xi1][noise_col::xi2] = plain[noise_col::xi2][noise_col::xi1] = dt;
    plain[noise_col::xi1p][noise_col::xi2p] = plain[noise_col::xi2p][noise_col::xi1p] = dt;
    for (std::size_t i = 0; i < 4; ++i) conj[i][i] = dt;
    const double zpp = max_covariance_z<4>([&] { return gen_pp_noise(rng, dt).dw; }, 1000000, plain, conj);
    std::array<std::array<double, 3>, 3> splain{}, sconj{};
    for (std::size_t i = 0; i < 3; ++i) sconj[i][i] = dt;
    const double zsed = max_covariance_z<3>([&] { return gen_sed_noise(rng, dt).dw; }, 1000000, splain, sconj);
    o.check(zpp < 5.0 && zsed < 5.0,
            fmt("noise covariances at 1e6 draws: max |z| %.2f (positive-P), %.2f (SED)", zpp, zsed));
  }
  {
    const auto p = SystemParams::equal_damping(1.0, 1.0, 1.0);
    auto csv = [&](Theory t, unsigned threads) {
      EnsembleSpec s = spec_of(2000, 8003);
      s.threads = threads;
      std::ostringstream os;
      write_ensemble_csv(os, run_intracavity_experiment(t, p, PhaseAngles{}, unit_grid, s, nodes_at({0.5, 1.0})));
      return os.str();
    };
    for (Theory t : {Theory::QM, Theory::SED}) {
      const std::string a = csv(t, 1);
      const std::string b = csv(t, 1);
      const std::string c = csv(t, 4);
      o.check(a == b && a == c, fmt("%s rerun with the same seed is byte-identical (1 and 4 threads, %zu bytes)",
                                    std::string(to_string(t)).c_str(), a.size()));
    }
  }
  return o;
}

MomentEstimate conj(MomentEstimate m) {
  m.mean = std::conj(m.mean);
  for (auto& b : m.batch_means) b = std::conj(b);
  return m;
}

// Paths with real epsilon can keep some products exactly real, so both the
// spread and the mean of a part may be pure round-off.
double part_z(double value, double se, double scale) {
  if (std::abs(value) <= MomentEstimate::roundoff_floor * scale) return 0.0;
  return se > 0.0 ? std::abs(value) / se : std::numeric_limits<double>::infinity();
}

double worst_z(const MomentEstimate& m, double scale) {
  return std::max(part_z(m.mean.real(), m.std_error, scale), part_z(m.mean.imag(), m.std_error_imag, scale));
}

Outcome symmetry() {
  Outcome o;
  const auto p = SystemParams::equal_damping(1.0, 1.0, 1.0);
  const auto nodes = nodes_at({0.25, 0.5, 0.75, 1.0});
  const auto stats = ensemble_triple_stats<PositivePModel>(
      PositivePModel(p), unit_grid, nodes, spec_of(100000, 9001), 3,
      [](const PositivePState& x, std::span<Triple> out) {
        out[0] = {quadrature(x, 1, 0.0), quadrature(x, 2, 0.0), quadrature(x, 3, 0.0)};
        out[1] = {x[pp::a1], x[pp::a2], x[pp::a3]};
        out[2] = {x[pp::a1p], x[pp::a2p], x[pp::a3p]};
      });
  double worst_mean = 0.0, worst_imag = 0.0, worst_pair = 0.0;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& a = stats[1][n].mean[i];
      const auto& ap = stats[2][n].mean[i];
      const auto d = paired_difference(ap, conj(a));
      const double scale = std::max(a.std_error, a.std_error_imag);
      worst_mean = std::max({worst_mean, worst_z(a, scale), worst_z(ap, scale), worst_z(d, scale)});
    }
    worst_imag = std::max(worst_imag, stats[0][n].central.imag_diagnostic());
    const auto& c = stats[1][n].central;
    const auto pair = paired_difference(stats[2][n].central, conj(c));
    worst_pair = std::max(worst_pair, worst_z(pair, std::abs(c.mean) + c.std_error));
  }
  const bool means_ok = worst_mean <= 4.0, imag_ok = worst_imag <= 4.0, pair_ok = worst_pair <= 4.0;
  o.check(means_ok, fmt("<a_i>, <a_i+> and <a_i+> - <a_i>* vanish (i = 1, 2; 4 nodes): worst %.2f SE", worst_mean));
  o.check(imag_ok, fmt("QM moment imaginary part: worst %.2f SE over 4 nodes", worst_imag));
  o.check(pair_ok, fmt("<Da1+ Da2+ Da3+> - conj<Da1 Da2 Da3>: worst %.2f SE over 4 nodes", worst_pair));
  const auto& last = stats[1].back().central;
  o.note(fmt("<Da1 Da2 Da3>(tau=1) = %.4e %+.4ei", last.mean.real(), last.mean.imag()));
  return o;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "Table 1 couplings within 5%", table1},
      {2, "Table 2 external moments within 3%", table2},
      {3, "sample sizes for S = 1 within 5%", sample_sizes},
      {4, "intracavity QM/SED vs analytic at g = 0.1 within 3 SE", intracavity_vs_analytic},
      {5, "sign opposition at g = 1, N in {1, 10}", sign_opposition},
      {6, "order in g (analytic exact, simulated ratio in [6, 10])", order_in_g},
      {7, "external estimator vs closed forms at 1e6 paths", external_oracle},
      {8, "engine oracles (OU, decay, noise covariance, determinism)", engine_oracles},
      {9, "positive-P symmetry suite", symmetry},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.contains(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
    std::printf("%s %d %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, sec);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
