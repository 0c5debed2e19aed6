#ifndef QSED_MODELS_HPP
#define QSED_MODELS_HPP

#include <cmath>

#include "qsed/core.hpp"
#include "qsed/integrator.hpp"
#include "qsed/noise.hpp"

namespace qsed {

/// Principal square root, branch cut along the negative real axis with the
/// sign of a signed-zero imaginary part respected (same branch as std::sqrt).
inline cplx principal_sqrt(cplx z) {
  const double a = z.real();
  const double b = z.imag();
  if (a == 0.0 && b == 0.0) return cplx(0.0, b);
  const double r = std::sqrt(a * a + b * b);
  if (a >= 0.0) {
    const double t = std::sqrt(0.5 * (r + a));
    return cplx(t, b / (2.0 * t));
  }
  const double t = std::sqrt(0.5 * (r - a));
  return cplx(std::abs(b) / (2.0 * t), std::copysign(t, b));
}

/// Positive-P equations of the damped nondegenerate parametric oscillator.
///
/// State rows follow pp::Component (a1, a1+, a2, a2+, a3, a3+); noise columns
/// follow noise_col (xi1, xi1+, xi2, xi2+). The pump rows carry no noise.
/// Multiplicative noise uses the principal branch of sqrt(g*a3).
class PositivePModel {
 public:
  static constexpr std::size_t dimension = 6;
  static constexpr std::size_t noise_dimension = 4;
  using State = PositivePState;
  using Diffusion = std::array<std::array<cplx, noise_dimension>, dimension>;

  explicit PositivePModel(const SystemParams& p) : p_(p) {}

  const SystemParams& params() const { return p_; }

  State drift(const State& x) const;
  Diffusion diffusion(const State& x) const;

  /// Deterministic: signal and idler in vacuum, pump coherent at epsilon.
  State sample_initial(Rng&) const;
  PositivePNoise sample_noise(Rng& rng, double dt) const { return gen_pp_noise(rng, dt); }

  /// drift(x) dt + diffusion(x) dW without forming the sparse matrix.
  State increment(const State& x, const PositivePNoise& noise) const;

 private:
  SystemParams p_;
};

/// Stochastic-electrodynamics equations: classical coupled-mode equations
/// plus additive vacuum noise sqrt(gamma_i) xi_i.
class SedModel {
 public:
  static constexpr std::size_t dimension = 3;
  static constexpr std::size_t noise_dimension = 3;
  using State = SedState;
  using Diffusion = std::array<std::array<cplx, noise_dimension>, dimension>;

  explicit SedModel(const SystemParams& p) : p_(p) {}

  const SystemParams& params() const { return p_; }

  State drift(const State& x) const;
  Diffusion diffusion(const State& x) const;

  /// Means (0, 0, epsilon) plus independent N(0, 1/4) real and imaginary parts.
  State sample_initial(Rng& rng) const;
  SedNoise sample_noise(Rng& rng, double dt) const { return gen_sed_noise(rng, dt); }

  State increment(const State& x, const SedNoise& noise) const;

 private:
  SystemParams p_;
};

static_assert(SdeModel<PositivePModel>);
static_assert(SdeModel<SedModel>);

// Free-function forms operating on the PhasePoint variant.
PositivePState pp_drift(const SystemParams& p, const PositivePPoint& x);
PositivePModel::Diffusion pp_diffusion(const SystemParams& p, const PositivePPoint& x);
SedState sed_drift(const SystemParams& p, const SedPoint& x);
SedModel::Diffusion sed_diffusion(const SystemParams& p, const SedPoint& x);
SedPoint sed_sample_initial(const SystemParams& p, Rng& rng);

}  // namespace qsed

#endif  // QSED_MODELS_HPP
