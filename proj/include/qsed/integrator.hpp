#ifndef QSED_INTEGRATOR_HPP
#define QSED_INTEGRATOR_HPP

#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "qsed/core.hpp"
#include "qsed/noise.hpp"

namespace qsed {

/// An Ito-form SDE  dx = A(x) dtau + B(x) dW  over complex state vectors.
///
/// A model supplies:
///   - `State`      : std::array<cplx, dimension>
///   - `Diffusion`  : std::array<std::array<cplx, noise_dimension>, dimension>
///   - `drift(x)`, `diffusion(x)` : pure functions of the state
///   - `sample_initial(rng)`      : initial condition (may ignore rng)
///   - `sample_noise(rng, dt)`    : one NoiseBlock with the model's correlations
///
/// A model may also provide `increment(x, noise)` returning A(x) dt + B(x) dW
/// directly (for sparse B); it must agree with the dense product.
template <class M>
concept SdeModel = requires(const M& m, const typename M::State& x, Rng& rng, double dt) {
  requires std::same_as<typename M::State, std::array<cplx, M::dimension>>;
  requires std::same_as<typename M::Diffusion,
                        std::array<std::array<cplx, M::noise_dimension>, M::dimension>>;
  { m.drift(x) } -> std::same_as<typename M::State>;
  { m.diffusion(x) } -> std::same_as<typename M::Diffusion>;
  { m.sample_initial(rng) } -> std::same_as<typename M::State>;
  { m.sample_noise(rng, dt) } -> std::same_as<NoiseBlock<M::noise_dimension>>;
};

enum class Scheme { SemiImplicitMidpoint, EulerMaruyama };

struct IntegratorConfig {
  int midpoint_iterations = 3;
  Scheme scheme = Scheme::SemiImplicitMidpoint;
};

void validate(const IntegratorConfig& cfg);

template <class State>
struct Trajectory {
  TimeGrid grid;
  std::vector<State> points;  // one per grid node
};

namespace detail {

template <std::size_t D>
bool all_finite(const std::array<cplx, D>& x) {
  for (const auto& z : x)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

template <class M>
concept HasFusedIncrement =
    requires(const M& m, const typename M::State& x, const NoiseBlock<M::noise_dimension>& n) {
      { m.increment(x, n) } -> std::same_as<typename M::State>;
    };

// A(y) dt + B(y) dW from the drift vector and the dense diffusion matrix.
template <SdeModel M>
typename M::State dense_increment(const M& model, const typename M::State& y,
                                  const NoiseBlock<M::noise_dimension>& noise) {
  const auto a = model.drift(y);
  const auto b = model.diffusion(y);
  typename M::State out;
  for (std::size_t i = 0; i < M::dimension; ++i) {
    cplx acc = a[i] * noise.dt;
    for (std::size_t j = 0; j < M::noise_dimension; ++j) acc += b[i][j] * noise.dw[j];
    out[i] = acc;
  }
  return out;
}

template <SdeModel M>
typename M::State increment(const M& model, const typename M::State& y,
                            const NoiseBlock<M::noise_dimension>& noise) {
  if constexpr (HasFusedIncrement<M>)
    return model.increment(y, noise);
  else
    return dense_increment(model, y, noise);
}

}  // namespace detail

/// One semi-implicit midpoint step: the midpoint is found by fixed-point
/// iteration  m <- x + (A(m) dt + B(m) dW)/2  starting from m = x, then
/// x_next = x + A(m) dt + B(m) dW. Throws NonFinite (step unknown) on overflow.
template <SdeModel M>
typename M::State step_semi_implicit(const M& model, const typename M::State& x,
                                     const NoiseBlock<M::noise_dimension>& noise,
                                     const IntegratorConfig& cfg) {
  typename M::State mid = x;
  for (int p = 0; p < cfg.midpoint_iterations; ++p) {
    const auto inc = detail::increment(model, mid, noise);
    for (std::size_t i = 0; i < M::dimension; ++i) mid[i] = x[i] + 0.5 * inc[i];
    if (!detail::all_finite(mid)) throw NonFinite(NonFinite::unknown_step);
  }
  const auto inc = detail::increment(model, mid, noise);
  typename M::State next;
  for (std::size_t i = 0; i < M::dimension; ++i) next[i] = x[i] + inc[i];
  if (!detail::all_finite(next)) throw NonFinite(NonFinite::unknown_step);
  return next;
}

template <SdeModel M>
typename M::State step_euler(const M& model, const typename M::State& x,
                             const NoiseBlock<M::noise_dimension>& noise) {
  const auto inc = detail::increment(model, x, noise);
  typename M::State next;
  for (std::size_t i = 0; i < M::dimension; ++i) next[i] = x[i] + inc[i];
  if (!detail::all_finite(next)) throw NonFinite(NonFinite::unknown_step);
  return next;
}

template <SdeModel M>
typename M::State step(const M& model, const typename M::State& x,
                       const NoiseBlock<M::noise_dimension>& noise, const IntegratorConfig& cfg) {
  return cfg.scheme == Scheme::EulerMaruyama ? step_euler(model, x, noise)
                                             : step_semi_implicit(model, x, noise, cfg);
}

/// Integrates one path, calling `observe(node_index, state)` at every grid
/// node (including node 0). The path is a pure function of (model, grid, cfg, seed).
/// NonFinite is rethrown carrying the index of the failing step.
template <SdeModel M, class Observer>
void integrate_path(const M& model, const TimeGrid& grid, const IntegratorConfig& cfg,
                    std::uint64_t seed, Observer&& observe) {
  Rng rng = make_rng(seed);
  typename M::State x = model.sample_initial(rng);
  if (!detail::all_finite(x)) throw NonFinite(0);
  observe(std::size_t{0}, static_cast<const typename M::State&>(x));
  const double dt = grid.dt();
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const auto noise = model.sample_noise(rng, dt);
    try {
      x = step(model, x, noise, cfg);
    } catch (const NonFinite&) {
      throw NonFinite(k);
    }
    observe(k + 1, static_cast<const typename M::State&>(x));
  }
}

template <SdeModel M>
Trajectory<typename M::State> integrate_path(const M& model, const TimeGrid& grid,
                                             const IntegratorConfig& cfg, std::uint64_t seed) {
  Trajectory<typename M::State> traj{grid, {}};
  traj.points.reserve(grid.node_count());
  integrate_path(model, grid, cfg, seed,
                 [&](std::size_t, const typename M::State& x) { traj.points.push_back(x); });
  return traj;
}

}  // namespace qsed

#endif  // QSED_INTEGRATOR_HPP
