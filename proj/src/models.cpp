#include "qsed/models.hpp"

#include <cmath>

#include <boost/random/normal_distribution.hpp>

namespace qsed {

PositivePModel::State PositivePModel::drift(const State& x) const {
  using namespace pp;
  const double g = p_.g;
  return State{
      -p_.gamma1 * x[a1] + g * x[a2p] * x[a3],
      -p_.gamma1 * x[a1p] + g * x[a2] * x[a3p],
      -p_.gamma2 * x[a2] + g * x[a1p] * x[a3],
      -p_.gamma2 * x[a2p] + g * x[a1] * x[a3p],
      -p_.gamma3 * x[a3] - g * x[a1] * x[a2],
      -p_.gamma3 * x[a3p] - g * x[a1p] * x[a2p],
  };
}

PositivePModel::Diffusion PositivePModel::diffusion(const State& x) const {
  using namespace pp;
  const cplx s = principal_sqrt(p_.g * x[a3]);
  const cplx sp = principal_sqrt(p_.g * x[a3p]);
  Diffusion b{};
  b[a1][noise_col::xi1] = s;
  b[a1p][noise_col::xi1p] = sp;
  b[a2][noise_col::xi2] = s;
  b[a2p][noise_col::xi2p] = sp;
  return b;
}

PositivePModel::State PositivePModel::increment(const State& x, const PositivePNoise& noise) const {
  using namespace pp;
  const double dt = noise.dt;
  const cplx s = principal_sqrt(p_.g * x[a3]);
  const cplx sp = principal_sqrt(p_.g * x[a3p]);
  State d = drift(x);
  for (auto& z : d) z *= dt;
  d[a1] += s * noise.dw[noise_col::xi1];
  d[a1p] += sp * noise.dw[noise_col::xi1p];
  d[a2] += s * noise.dw[noise_col::xi2];
  d[a2p] += sp * noise.dw[noise_col::xi2p];
  return d;
}

PositivePModel::State PositivePModel::sample_initial(Rng&) const {
  State x{};
  x[pp::a3] = p_.epsilon;
  x[pp::a3p] = std::conj(p_.epsilon);
  return x;
}

SedModel::State SedModel::drift(const State& x) const {
  const double g = p_.g;
  return State{
      -p_.gamma1 * x[0] + g * std::conj(x[1]) * x[2],
      -p_.gamma2 * x[1] + g * std::conj(x[0]) * x[2],
      -p_.gamma3 * x[2] - g * x[0] * x[1],
  };
}

SedModel::Diffusion SedModel::diffusion(const State&) const {
  Diffusion b{};
  b[0][0] = std::sqrt(p_.gamma1);
  b[1][1] = std::sqrt(p_.gamma2);
  b[2][2] = std::sqrt(p_.gamma3);
  return b;
}

SedModel::State SedModel::increment(const State& x, const SedNoise& noise) const {
  const double dt = noise.dt;
  State d = drift(x);
  d[0] = d[0] * dt + std::sqrt(p_.gamma1) * noise.dw[0];
  d[1] = d[1] * dt + std::sqrt(p_.gamma2) * noise.dw[1];
  d[2] = d[2] * dt + std::sqrt(p_.gamma3) * noise.dw[2];
  return d;
}

SedModel::State SedModel::sample_initial(Rng& rng) const {
  boost::random::normal_distribution<double> normal(0.0, 0.5);  // variance 1/4
  State x{cplx{}, cplx{}, p_.epsilon};
  for (auto& z : x) {
    const double re = normal(rng);
    const double im = normal(rng);
    z += cplx(re, im);
  }
  return x;
}

PositivePState pp_drift(const SystemParams& p, const PositivePPoint& x) {
  return PositivePModel(p).drift(x.x);
}

PositivePModel::Diffusion pp_diffusion(const SystemParams& p, const PositivePPoint& x) {
  return PositivePModel(p).diffusion(x.x);
}

SedState sed_drift(const SystemParams& p, const SedPoint& x) { return SedModel(p).drift(x.x); }

SedModel::Diffusion sed_diffusion(const SystemParams& p, const SedPoint& x) {
  return SedModel(p).diffusion(x.x);
}

SedPoint sed_sample_initial(const SystemParams& p, Rng& rng) {
  return SedPoint{SedModel(p).sample_initial(rng)};
}

}  // namespace qsed
