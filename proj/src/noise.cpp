#include "qsed/noise.hpp"

#include <cmath>

#include <boost/random/normal_distribution.hpp>

namespace qsed {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void check_dt(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParam("noise step dt must be finite and > 0");
}

}  // namespace

std::uint64_t path_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

PositivePNoise gen_pp_noise(Rng& rng, double dt) {
  check_dt(dt);
  boost::random::normal_distribution<double> normal(0.0, std::sqrt(dt));
  const double x = normal(rng);
  const double y = normal(rng);
  const double u = normal(rng);
  const double v = normal(rng);
  constexpr double s = 0.70710678118654752440;
  PositivePNoise n;
  n.dt = dt;
  n.dw[noise_col::xi1] = cplx(x, y) * s;
  n.dw[noise_col::xi2] = cplx(x, -y) * s;
  n.dw[noise_col::xi1p] = cplx(u, v) * s;
  n.dw[noise_col::xi2p] = cplx(u, -v) * s;
  return n;
}

SedNoise gen_sed_noise(Rng& rng, double dt) {
  check_dt(dt);
  boost::random::normal_distribution<double> normal(0.0, std::sqrt(dt));
  constexpr double s = 0.70710678118654752440;
  SedNoise n;
  n.dt = dt;
  for (auto& w : n.dw) {
    const double x = normal(rng);
    const double y = normal(rng);
    w = cplx(x, y) * s;
  }
  return n;
}

}  // namespace qsed
