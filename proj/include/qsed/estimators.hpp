#ifndef QSED_ESTIMATORS_HPP
#define QSED_ESTIMATORS_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "qsed/analytic.hpp"
#include "qsed/core.hpp"
#include "qsed/integrator.hpp"
#include "qsed/models.hpp"
#include "qsed/noise.hpp"

namespace qsed {

using Triple = std::array<cplx, 3>;

/// Ensemble mean with batch-means standard errors (real and imaginary parts
/// estimated separately).
struct MomentEstimate {
  cplx mean{};
  double std_error = 0.0;
  double std_error_imag = 0.0;
  std::size_t n_paths = 0;
  std::size_t n_batches = 0;
  std::vector<cplx> batch_means;

  /// Relative size below which a part of the mean is treated as round-off.
  static constexpr double roundoff_floor = 1e-12;

  /// |Im mean| / SE(Im); zero when Im mean is round-off relative to the real
  /// part or the real standard error.
  double imag_diagnostic() const;
  /// |Re mean| / SE(Re); zero when both vanish.
  double significance() const;
};

/// Difference a - b of two estimates over the same batches; the standard
/// error comes from the batch-wise differences, so correlations are kept.
MomentEstimate paired_difference(const MomentEstimate& a, const MomentEstimate& b);

MomentEstimate scaled(MomentEstimate m, double factor);

/// Third central moment <(v1 - m1)(v2 - m2)(v3 - m3)> with grand means m_i.
/// The estimate is a single path-order pass and does not depend on n_batches;
/// batches (contiguous path ranges) only feed the standard error.
MomentEstimate triple_central_moment(std::span<const Triple> values, std::size_t n_batches);

// ---------------------------------------------------------------------------
// Quadratures

/// Positive-P: (a e^{-i theta} + a+ e^{i theta}) / 2, complex per path.
cplx quadrature(const PositivePState& x, int mode, double theta);
/// SED: (b e^{-i theta} + b* e^{i theta}) / 2, real per path.
cplx quadrature(const SedState& x, int mode, double theta);
cplx quadrature(const PhasePoint& x, int mode, double theta);

/// Trapezoid rule over uniformly spaced samples.
cplx trapezoid(std::span<const cplx> samples, double dt);

/// K_i = integral of the mode-i quadrature over [t0, t1] by the trapezoid rule.
/// Both ends must be grid nodes; WindowOutOfRange otherwise.
template <class State>
cplx integrated_quadrature(const Trajectory<State>& traj, int mode, double theta_bar, double t0,
                           double t1) {
  const auto k0 = traj.grid.node_at(t0);
  const auto k1 = traj.grid.node_at(t1);
  if (!k0 || !k1 || *k1 < *k0 || *k1 >= traj.points.size())
    throw WindowOutOfRange("integration window is not a node range of the trajectory grid");
  std::vector<cplx> x;
  x.reserve(*k1 - *k0 + 1);
  for (std::size_t k = *k0; k <= *k1; ++k) x.push_back(quadrature(traj.points[k], mode, theta_bar));
  return trapezoid(x, traj.grid.dt());
}

template <class State>
cplx integrated_quadrature(const Trajectory<State>& traj, int mode, double theta_bar, double tau_f) {
  return integrated_quadrature(traj, mode, theta_bar, 0.0, tau_f);
}

// ---------------------------------------------------------------------------
// Ensembles

struct EnsembleSpec {
  std::size_t n_paths = 100000;
  std::size_t n_batches = 100;
  std::uint64_t seed = 0;
  IntegratorConfig integrator{};
  unsigned threads = 0;  // 0: hardware concurrency
};

void validate(const EnsembleSpec& spec);

/// Runs fn(batch) for every batch on a worker pool. Batches are claimed in
/// increasing order; after a failure no new batch starts, and the exception
/// of the lowest failing batch is rethrown.
void run_batches(std::size_t n_batches, unsigned threads, const std::function<void(std::size_t)>& fn);

/// Streaming sums of shifted values u = v - shift for one batch.
struct ShiftedTripleSums {
  std::array<cplx, 3> s{};   // sum u_i
  std::array<cplx, 3> s2{};  // sum u1u2, u1u3, u2u3
  cplx s123{};
  std::size_t count = 0;

  void add(const Triple& u) {
    s[0] += u[0];
    s[1] += u[1];
    s[2] += u[2];
    const cplx u12 = u[0] * u[1];
    s2[0] += u12;
    s2[1] += u[0] * u[2];
    s2[2] += u[1] * u[2];
    s123 += u12 * u[2];
    ++count;
  }
};

/// Central third moment and component means at one time node.
struct TripleStats {
  MomentEstimate central;
  std::array<MomentEstimate, 3> mean;
};

TripleStats finalize_triple_stats(const Triple& shift, std::span<const ShiftedTripleSums> batches);

/// Per-path observable: writes one Triple per observable for a state.
template <class State>
using TripleObservable = std::function<void(const State&, std::span<Triple>)>;

/// Integrates spec.n_paths paths (path p uses seed path_seed(spec.seed, p)),
/// and at each node in `nodes` accumulates every observable's triple.
/// Returns stats indexed [observable][node]. Thread count never changes results.
template <SdeModel M>
std::vector<std::vector<TripleStats>> ensemble_triple_stats(
    const M& model, const TimeGrid& grid, std::span<const std::size_t> nodes,
    const EnsembleSpec& spec, std::size_t n_obs,
    const TripleObservable<typename M::State>& obs) {
  using State = typename M::State;
  validate(spec);
  validate(spec.integrator);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] >= grid.node_count() || (i > 0 && nodes[i] <= nodes[i - 1]))
      throw InvalidParam("observation nodes must be strictly increasing grid indices");
  }
  const std::size_t n_nodes = nodes.size();
  const std::size_t cells = n_obs * n_nodes;
  const std::size_t batch_size = spec.n_paths / spec.n_batches;

  auto observe_path = [&](std::uint64_t seed, auto&& sink) {
    std::vector<Triple> buf(n_obs);
    std::size_t next = 0;
    integrate_path(model, grid, spec.integrator, seed, [&](std::size_t k, const State& x) {
      if (next < n_nodes && nodes[next] == k) {
        obs(x, buf);
        for (std::size_t o = 0; o < n_obs; ++o) sink(o * n_nodes + next, buf[o]);
        ++next;
      }
    });
  };

  // Shift by the first path's values so the power sums stay well conditioned.
  std::vector<Triple> shift(cells);
  const std::uint64_t pilot_seed = path_seed(spec.seed, 0);
  try {
    observe_path(pilot_seed, [&](std::size_t cell, const Triple& v) { shift[cell] = v; });
  } catch (const NonFinite& e) {
    throw NonFinite(e.step(), 0, pilot_seed);
  }

  std::vector<ShiftedTripleSums> sums(spec.n_batches * cells);
  run_batches(spec.n_batches, spec.threads, [&](std::size_t b) {
    ShiftedTripleSums* mine = sums.data() + b * cells;
    for (std::size_t p = b * batch_size; p < (b + 1) * batch_size; ++p) {
      const std::uint64_t seed = path_seed(spec.seed, p);
      try {
        observe_path(seed, [&](std::size_t cell, const Triple& v) {
          const Triple& c = shift[cell];
          mine[cell].add(Triple{v[0] - c[0], v[1] - c[1], v[2] - c[2]});
        });
      } catch (const NonFinite& e) {
        throw NonFinite(e.step(), p, seed);
      }
    }
  });

  std::vector<std::vector<TripleStats>> out(n_obs, std::vector<TripleStats>(n_nodes));
  std::vector<ShiftedTripleSums> column(spec.n_batches);
  for (std::size_t o = 0; o < n_obs; ++o) {
    for (std::size_t n = 0; n < n_nodes; ++n) {
      const std::size_t cell = o * n_nodes + n;
      for (std::size_t b = 0; b < spec.n_batches; ++b) column[b] = sums[b * cells + cell];
      out[o][n] = finalize_triple_stats(shift[cell], column);
    }
  }
  return out;
}

/// Evenly spaced node indices every `spacing` time units, always including
/// the first and last node. spacing <= 0 selects every node.
std::vector<std::size_t> sample_nodes(const TimeGrid& grid, double spacing);

struct EnsembleResult {
  TimeGrid grid;
  std::vector<std::size_t> nodes;
  std::vector<double> taus;
  std::vector<MomentEstimate> moments;  // <DX1 DX2 DX3> per node
  Theory theory = Theory::QM;
  SystemParams params;
  PhaseAngles angles;
  std::uint64_t seed = 0;
  ValidationReport validation;
  bool dominant_term_degenerate = false;
};

/// Third-order quadrature moment <DX1 DX2 DX3>(tau) at the requested nodes
/// (all nodes when empty). For QM the physical value is the real part; the
/// imaginary part is kept as a diagnostic.
EnsembleResult run_intracavity_experiment(Theory theory, const SystemParams& p,
                                          const PhaseAngles& angles, const TimeGrid& grid,
                                          const EnsembleSpec& spec,
                                          std::span<const std::size_t> nodes = {});

// ---------------------------------------------------------------------------
// External moments

/// (sqrt(2 Gamma) e A eta E / Gamma)^3 = 2^{3/2} (e A eta E)^3 Gamma^{-3/2}:
/// converts <DK1 DK2 DK3> of integrated intracavity quadratures into the
/// external homodyne moment. Vacuum inputs drop out of the cross moment.
double external_scale(const SystemParams& p, const HomodyneParams& h);

template <class State>
MomentEstimate external_moment_estimate(std::span<const Trajectory<State>> ensemble,
                                        const SystemParams& p, const HomodyneParams& h,
                                        const std::array<double, 3>& theta_bar, double tau_f,
                                        std::size_t n_batches) {
  validate(h);
  std::vector<Triple> k(ensemble.size());
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    for (int m = 0; m < 3; ++m)
      k[i][m] = integrated_quadrature(ensemble[i], m + 1, theta_bar[m], tau_f);
  }
  return scaled(triple_central_moment(k, n_batches), external_scale(p, h));
}

/// Simulates spec.n_paths paths on [0, tau_f] and returns the external
/// moment estimate (window start 0).
MomentEstimate run_external_experiment(Theory theory, const SystemParams& p,
                                       const HomodyneParams& h, const PhaseAngles& angles,
                                       double tau_f, double dt, const EnsembleSpec& spec);

}  // namespace qsed

#endif  // QSED_ESTIMATORS_HPP
