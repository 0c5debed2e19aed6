#ifndef QSED_NOISE_HPP
#define QSED_NOISE_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>

#include "qsed/core.hpp"

namespace qsed {

using Rng = std::mt19937_64;

/// Seed for path `index` of an ensemble with master seed `master`.
/// Counter-based: depends only on (master, index), never on scheduling.
std::uint64_t path_seed(std::uint64_t master, std::uint64_t index) noexcept;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Complex Wiener increments for one step.
template <std::size_t K>
struct NoiseBlock {
  std::array<cplx, K> dw{};
  double dt = 0.0;
};

/// Positive-P increments, column order (dxi1, dxi1+, dxi2, dxi2+).
/// <dxi1 dxi2> = <dxi1+ dxi2+> = dt; every other second moment vanishes,
/// including <dxi_i dxi_i> and all mixed plus/non-plus pairs.
using PositivePNoise = NoiseBlock<4>;

/// SED increments (dxi1, dxi2, dxi3), <dxi_i dxi_j*> = delta_ij dt, <dxi_i dxi_j> = 0.
using SedNoise = NoiseBlock<3>;

namespace noise_col {
enum : std::size_t { xi1 = 0, xi1p = 1, xi2 = 2, xi2p = 3 };
}

PositivePNoise gen_pp_noise(Rng& rng, double dt);
SedNoise gen_sed_noise(Rng& rng, double dt);

}  // namespace qsed

#endif  // QSED_NOISE_HPP
