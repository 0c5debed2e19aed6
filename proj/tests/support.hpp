#ifndef QSED_TESTS_SUPPORT_HPP
#define QSED_TESTS_SUPPORT_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "qsed/integrator.hpp"

namespace qsed::test {

// Sample mean and standard error of the mean for real data.
struct Sample {
  double sum = 0.0;
  double sum2 = 0.0;
  std::size_t n = 0;

  void add(double x) {
    sum += x;
    sum2 += x * x;
    ++n;
  }
  double mean() const { return sum / static_cast<double>(n); }
  double variance() const {
    const double m = mean();
    return (sum2 - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
  }
  double se() const { return std::sqrt(variance() / static_cast<double>(n)); }
  // |mean - target| in units of the standard error.
  double z(double target) const { return std::abs(mean() - target) / se(); }
};

// d a = -lambda a dt, no noise.
struct DecayModel {
  static constexpr std::size_t dimension = 1;
  static constexpr std::size_t noise_dimension = 1;
  using State = std::array<cplx, 1>;
  using Diffusion = std::array<std::array<cplx, 1>, 1>;
  double lambda = 1.0;
  cplx x0{1.0, 0.0};

  State drift(const State& x) const { return {-lambda * x[0]}; }
  Diffusion diffusion(const State&) const { return {}; }
  State sample_initial(Rng&) const { return {x0}; }
  NoiseBlock<1> sample_noise(Rng&, double dt) const { return {{}, dt}; }
};

// d b = -gamma b dt + sqrt(gamma) dW with complex dW, <dW dW*> = dt.
struct OuModel {
  static constexpr std::size_t dimension = 1;
  static constexpr std::size_t noise_dimension = 1;
  using State = std::array<cplx, 1>;
  using Diffusion = std::array<std::array<cplx, 1>, 1>;
  double gamma = 1.0;
  cplx x0{1.0, 0.0};

  State drift(const State& x) const { return {-gamma * x[0]}; }
  Diffusion diffusion(const State&) const { return {{{cplx(std::sqrt(gamma), 0.0)}}}; }
  State sample_initial(Rng&) const { return {x0}; }
  NoiseBlock<1> sample_noise(Rng& rng, double dt) const {
    const auto n = gen_sed_noise(rng, dt);
    return {{n.dw[0]}, dt};
  }
};

// No drift, no diffusion, random-looking start.
struct ZeroModel {
  static constexpr std::size_t dimension = 2;
  static constexpr std::size_t noise_dimension = 2;
  using State = std::array<cplx, 2>;
  using Diffusion = std::array<std::array<cplx, 2>, 2>;

  State drift(const State&) const { return {}; }
  Diffusion diffusion(const State&) const { return {}; }
  State sample_initial(Rng&) const { return {cplx(0.1234567890123, -7.5), cplx(1e-300, 3e200)}; }
  NoiseBlock<2> sample_noise(Rng& rng, double dt) const {
    const auto n = gen_sed_noise(rng, dt);
    return {{n.dw[0], n.dw[1]}, dt};
  }
};

// Grows without bound: dx = x^2 dt.
struct BlowUpModel {
  static constexpr std::size_t dimension = 1;
  static constexpr std::size_t noise_dimension = 1;
  using State = std::array<cplx, 1>;
  using Diffusion = std::array<std::array<cplx, 1>, 1>;

  State drift(const State& x) const { return {x[0] * x[0]}; }
  Diffusion diffusion(const State&) const { return {}; }
  State sample_initial(Rng&) const { return {cplx(10.0, 0.0)}; }
  NoiseBlock<1> sample_noise(Rng&, double dt) const { return {{}, dt}; }
};

}  // namespace qsed::test

#endif  // QSED_TESTS_SUPPORT_HPP
