#include <doctest.h>

#include <array>
#include <set>

#include "qsed/noise.hpp"
#include "support.hpp"

using namespace qsed;
using qsed::test::Sample;

namespace {

// Checks every entry of E[w_i w_j] and E[w_i conj(w_j)] against its target
// within 5 sigma of the sampling distribution (real and imaginary parts).
template <std::size_t K, class Gen>
void check_covariances(Gen&& gen, std::size_t draws, const std::array<std::array<double, K>, K>& plain,
                       const std::array<std::array<double, K>, K>& conj) {
  std::array<std::array<Sample, K>, K> pr{}, pi{}, cr{}, ci{};
  std::array<Sample, K> mr{}, mi{};
  for (std::size_t n = 0; n < draws; ++n) {
    const auto w = gen();
    for (std::size_t i = 0; i < K; ++i) {
      mr[i].add(w[i].real());
      mi[i].add(w[i].imag());
      for (std::size_t j = 0; j < K; ++j) {
        const cplx a = w[i] * w[j];
        const cplx b = w[i] * std::conj(w[j]);
        pr[i][j].add(a.real());
        pi[i][j].add(a.imag());
        cr[i][j].add(b.real());
        ci[i][j].add(b.imag());
      }
    }
  }
  for (std::size_t i = 0; i < K; ++i) {
    CAPTURE(i);
    CHECK(mr[i].z(0.0) < 5.0);
    CHECK(mi[i].z(0.0) < 5.0);
    for (std::size_t j = 0; j < K; ++j) {
      CAPTURE(j);
      CHECK(pr[i][j].z(plain[i][j]) < 5.0);
      if (pi[i][j].variance() > 0.0) CHECK(pi[i][j].z(0.0) < 5.0);
      CHECK(cr[i][j].z(conj[i][j]) < 5.0);
      if (ci[i][j].variance() > 0.0) CHECK(ci[i][j].z(0.0) < 5.0);
    }
  }
}

}  // namespace

TEST_CASE("positive-P increments have the required correlation table") {
  const double dt = 0.01;
  Rng rng = make_rng(101);
  std::array<std::array<double, 4>, 4> plain{};
  plain[noise_col::xi1][noise_col::xi2] = plain[noise_col::xi2][noise_col::xi1] = dt;
  plain[noise_col::xi1p][noise_col::xi2p] = plain[noise_col::xi2p][noise_col::xi1p] = dt;
  std::array<std::array<double, 4>, 4> conj{};
  for (std::size_t i = 0; i < 4; ++i) conj[i][i] = dt;
  check_covariances<4>([&] { return gen_pp_noise(rng, dt).dw; }, 1000000, plain, conj);
}

TEST_CASE("positive-P increment construction is exact per draw") {
  Rng rng = make_rng(7);
  for (int n = 0; n < 100; ++n) {
    const auto b = gen_pp_noise(rng, 0.0025);
    CHECK(b.dt == 0.0025);
    CHECK(b.dw[noise_col::xi2] == std::conj(b.dw[noise_col::xi1]));
    CHECK(b.dw[noise_col::xi2p] == std::conj(b.dw[noise_col::xi1p]));
  }
}

TEST_CASE("SED increments are independent with <dw dw*> = dt") {
  const double dt = 0.0025;
  Rng rng = make_rng(202);
  std::array<std::array<double, 3>, 3> plain{};
  std::array<std::array<double, 3>, 3> conj{};
  for (std::size_t i = 0; i < 3; ++i) conj[i][i] = dt;
  check_covariances<3>([&] { return gen_sed_noise(rng, dt).dw; }, 1000000, plain, conj);
}

TEST_CASE("noise rejects non-positive steps") {
  Rng rng = make_rng(1);
  CHECK_THROWS_AS(gen_pp_noise(rng, 0.0), InvalidParam);
  CHECK_THROWS_AS(gen_sed_noise(rng, -1.0), InvalidParam);
}

TEST_CASE("path seeds are deterministic and distinct") {
  CHECK(path_seed(42, 0) == path_seed(42, 0));
  std::set<std::uint64_t> seen;
  for (std::uint64_t master : {0ull, 1ull, 42ull})
    for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(path_seed(master, i));
  CHECK(seen.size() == 30000);
  Rng a = make_rng(path_seed(5, 9)), b = make_rng(path_seed(5, 9));
  CHECK(gen_pp_noise(a, 0.1).dw == gen_pp_noise(b, 0.1).dw);
}
