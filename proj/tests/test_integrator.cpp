#include <doctest.h>

#include <cmath>
#include <cstring>

#include "qsed/estimators.hpp"
#include "qsed/integrator.hpp"
#include "qsed/models.hpp"
#include "support.hpp"

using namespace qsed;
using namespace qsed::test;

namespace {

double decay_error(double dt, double t_end, Scheme scheme = Scheme::SemiImplicitMidpoint) {
  DecayModel m;
  IntegratorConfig cfg;
  cfg.scheme = scheme;
  const auto traj = integrate_path(m, TimeGrid(0.0, t_end, dt), cfg, 0);
  return std::abs(traj.points.back()[0] - std::exp(-t_end));
}

}  // namespace

TEST_CASE("deterministic decay reaches exp(-1) within 1e-5") {
  DecayModel m;
  const auto traj = integrate_path(m, TimeGrid(0.0, 1.0, 0.0025), IntegratorConfig{}, 1);
  REQUIRE(traj.points.size() == 401);
  CHECK(std::abs(traj.points.back()[0] - 0.36787944117144233) < 1e-5);
  CHECK(std::abs(traj.points.back()[0].imag()) == 0.0);
}

TEST_CASE("deterministic limit is second order") {
  const double e1 = decay_error(0.01, 1.0);
  const double e2 = decay_error(0.005, 1.0);
  const double e3 = decay_error(0.0025, 1.0);
  CHECK(e1 / e2 >= 3.5);
  CHECK(e2 / e3 >= 3.5);
  // Euler is first order and much less accurate at the same step.
  CHECK(decay_error(0.0025, 1.0, Scheme::EulerMaruyama) > 10.0 * e3);
}

TEST_CASE("more midpoint iterations do not change the converged decay") {
  DecayModel m;
  IntegratorConfig c1, c8;
  c1.midpoint_iterations = 1;
  c8.midpoint_iterations = 8;
  const TimeGrid grid(0.0, 1.0, 0.0025);
  const double a1 = integrate_path(m, grid, c1, 0).points.back()[0].real();
  const double a8 = integrate_path(m, grid, c8, 0).points.back()[0].real();
  CHECK(std::abs(a1 - std::exp(-1.0)) < 1e-4);
  CHECK(std::abs(a8 - std::exp(-1.0)) < 1e-5);
}

TEST_CASE("zero model leaves the state bit-exact") {
  ZeroModel m;
  Rng rng = make_rng(3);
  const auto x0 = m.sample_initial(rng);
  auto x = x0;
  for (int k = 0; k < 1000; ++k) x = step_semi_implicit(m, x, m.sample_noise(rng, 0.01), IntegratorConfig{});
  CHECK(std::memcmp(&x, &x0, sizeof x) == 0);
  for (int k = 0; k < 1000; ++k) x = step_euler(m, x, m.sample_noise(rng, 0.01));
  CHECK(std::memcmp(&x, &x0, sizeof x) == 0);
}

TEST_CASE("Ornstein-Uhlenbeck moments match the exact solution") {
  // b(0) = 1: <b(t)> = e^{-t}, <|b - <b>|^2> = (1 - e^{-2t})/2.
  OuModel m;
  const TimeGrid grid(0.0, 2.0, 0.0025);
  for (Scheme scheme : {Scheme::SemiImplicitMidpoint, Scheme::EulerMaruyama}) {
    CAPTURE(static_cast<int>(scheme));
    IntegratorConfig cfg;
    cfg.scheme = scheme;
    const std::size_t n = scheme == Scheme::EulerMaruyama ? 20000 : 100000;
    Sample re, im, var;
    std::vector<cplx> end(n);
    for (std::size_t p = 0; p < n; ++p) {
      cplx last;
      integrate_path(m, grid, cfg, path_seed(11, p), [&](std::size_t k, const OuModel::State& x) {
        if (k == grid.steps()) last = x[0];
      });
      end[p] = last;
      re.add(last.real());
      im.add(last.imag());
    }
    const double mean_exact = std::exp(-2.0);
    for (const auto& z : end) var.add(std::norm(z - cplx(mean_exact, 0.0)));
    CHECK(re.z(mean_exact) < 4.0);
    CHECK(im.z(0.0) < 4.0);
    CHECK(var.z(0.5 * (1.0 - std::exp(-4.0))) < 4.0);
  }
}

TEST_CASE("pure-damping SED model: mean decays exactly, vacuum variance stays 1/2") {
  const auto p = SystemParams::equal_damping(0.0, 1.0, 1.0);
  SedModel m(p);
  const TimeGrid grid(0.0, 1.0, 0.0025);
  Sample b3re, b3im, v1_start, v1_end;
  for (std::size_t i = 0; i < 100000; ++i) {
    integrate_path(m, grid, IntegratorConfig{}, path_seed(17, i), [&](std::size_t k, const SedState& x) {
      if (k == 0) v1_start.add(std::norm(x[0]));
      if (k == grid.steps()) {
        b3re.add(x[2].real());
        b3im.add(x[2].imag());
        v1_end.add(std::norm(x[0]));
      }
    });
  }
  CHECK(b3re.z(std::exp(-1.0)) < 3.0);
  CHECK(b3im.z(0.0) < 3.0);
  CHECK(v1_start.z(0.5) < 4.0);
  CHECK(v1_end.z(0.5) < 4.0);
}

TEST_CASE("decoupled positive-P pump follows eps exp(-gamma3 t) exactly") {
  auto p = SystemParams::equal_damping(0.0, 1.0, cplx(2.0, 0.5));
  p.gamma3 = 0.7;
  PositivePModel m(p);
  const TimeGrid grid(0.0, 2.0, 0.0025);
  const auto traj = integrate_path(m, grid, IntegratorConfig{}, 99);
  double worst = 0.0;
  for (std::size_t k = 0; k < traj.points.size(); ++k) {
    const double t = grid.time(k);
    const cplx exact = p.epsilon * std::exp(-0.7 * t);
    worst = std::max(worst, std::abs(traj.points[k][pp::a3] - exact) / std::abs(exact));
    CHECK(traj.points[k][pp::a3p] == std::conj(traj.points[k][pp::a3]));
    CHECK(traj.points[k][pp::a1] == cplx{});
  }
  // Only the midpoint discretization error remains.
  CHECK(worst < 1e-5);
}

TEST_CASE("paths are reproducible from the seed") {
  const auto p = SystemParams::equal_damping(0.5, 1.0, 2.0);
  PositivePModel m(p);
  const TimeGrid grid(0.0, 1.0, 0.0025);
  const auto a = integrate_path(m, grid, IntegratorConfig{}, 1234);
  const auto b = integrate_path(m, grid, IntegratorConfig{}, 1234);
  const auto c = integrate_path(m, grid, IntegratorConfig{}, 1235);
  REQUIRE(a.points.size() == b.points.size());
  CHECK(std::memcmp(a.points.data(), b.points.data(), a.points.size() * sizeof(PositivePState)) == 0);
  CHECK(a.points.back() != c.points.back());
}

TEST_CASE("overflow raises NonFinite with the step index") {
  BlowUpModel m;
  const TimeGrid grid(0.0, 1.0, 0.01);
  try {
    integrate_path(m, grid, IntegratorConfig{}, 0);
    FAIL("expected NonFinite");
  } catch (const NonFinite& e) {
    CHECK(e.step() < grid.steps());
    CHECK(e.step() > 0);
  }
}

TEST_CASE("integrator config validation") {
  IntegratorConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.midpoint_iterations = 0;
  CHECK_THROWS_AS(validate(cfg), InvalidParam);
}

TEST_CASE("ensemble results do not depend on the thread count") {
  const auto p = SystemParams::equal_damping(0.5, 1.0, 1.0);
  const TimeGrid grid(0.0, 0.5, 0.0025);
  EnsembleSpec spec;
  spec.n_paths = 400;
  spec.n_batches = 20;
  spec.seed = 77;
  for (Theory t : {Theory::QM, Theory::SED}) {
    spec.threads = 1;
    const auto a = run_intracavity_experiment(t, p, PhaseAngles{}, grid, spec);
    spec.threads = 5;
    const auto b = run_intracavity_experiment(t, p, PhaseAngles{}, grid, spec);
    REQUIRE(a.moments.size() == b.moments.size());
    for (std::size_t i = 0; i < a.moments.size(); ++i) {
      CHECK(a.moments[i].mean == b.moments[i].mean);
      CHECK(a.moments[i].std_error == b.moments[i].std_error);
    }
  }
}
