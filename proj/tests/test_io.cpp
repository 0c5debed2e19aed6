#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "qsed/io.hpp"
#include "qsed/models.hpp"

using namespace qsed;

namespace {

EnsembleResult small_result(std::uint64_t seed) {
  const TimeGrid grid(0.0, 0.5, 0.0025);
  EnsembleSpec spec;
  spec.n_paths = 400;
  spec.n_batches = 10;
  spec.seed = seed;
  const auto p = SystemParams::equal_damping(0.5, 1.0, 1.0);
  return run_intracavity_experiment(Theory::QM, p, PhaseAngles{}, grid, spec, sample_nodes(grid, 0.125));
}

}  // namespace

TEST_CASE("shortest round-trip formatting") {
  CHECK(format_double(0.25) == "0.25");
  CHECK(format_double(1e-300) == "1e-300");
  CHECK(format_double(-3.0) == "-3");
  const double x = 0.1 + 0.2;
  CHECK(std::stod(format_double(x)) == x);
}

TEST_CASE("ensemble CSV round trip") {
  const auto r = small_result(42);
  std::stringstream ss;
  write_ensemble_csv(ss, r);
  const std::string text = ss.str();
  CHECK(text.rfind(std::string(ensemble_csv_header) + "\n", 0) == 0);

  const auto rows = read_ensemble_csv(ss);
  REQUIRE(rows.size() == r.taus.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].tau == r.taus[i]);
    CHECK(rows[i].mean_re == r.moments[i].mean.real());
    CHECK(rows[i].mean_im == r.moments[i].mean.imag());
    CHECK(rows[i].std_error == r.moments[i].std_error);
    CHECK(rows[i].n_paths == 400);
    CHECK(rows[i].theory == Theory::QM);
    CHECK(rows[i].g == 0.5);
    CHECK(rows[i].N == 1.0);
    CHECK(rows[i].seed == 42);
  }
  std::stringstream again;
  write_ensemble_rows(again, rows);
  CHECK(again.str() == text);
}

TEST_CASE("same seed gives byte-identical CSV") {
  std::stringstream a, b, c;
  write_ensemble_csv(a, small_result(7));
  write_ensemble_csv(b, small_result(7));
  write_ensemble_csv(c, small_result(8));
  CHECK(a.str() == b.str());
  CHECK(a.str() != c.str());
}

TEST_CASE("CSV reader reports the offending line") {
  const std::string header = std::string(ensemble_csv_header) + "\n";
  auto fails_with = [](const std::string& text, const std::string& needle) {
    std::istringstream is(text);
    try {
      read_ensemble_csv(is);
    } catch (const InvalidParam& e) {
      CAPTURE(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
      return;
    }
    FAIL("no exception for: " << text);
  };
  fails_with("", "empty");
  fails_with("tau,mean\n", "line 1");
  fails_with(header + "0,1,2,3,4,QM,1,1,1,5\n0,1,x,3,4,QM,1,1,1,5\n", "line 3: column 'mean_im'");
  fails_with(header + "0,1,2,3\n", "line 2: expected 10 columns");
  fails_with(header + "0,1,2,3,4,classical,1,1,1,5\n", "line 2");
  std::istringstream crlf(header + "0.5,1,2,3,4,SED,1,1,1,5\r\n");
  const auto rows = read_ensemble_csv(crlf);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].theory == Theory::SED);
}

TEST_CASE("trajectory dump round trip") {
  const TimeGrid grid(0.0, 0.1, 0.0025);
  const PositivePModel model(SystemParams::equal_damping(0.3, 1.0, 2.0));
  std::vector<Trajectory<PositivePState>> paths;
  for (std::uint64_t s = 0; s < 3; ++s) paths.push_back(integrate_path(model, grid, IntegratorConfig{}, s));
  paths[1].points[5][2] = cplx(-0.0, std::numeric_limits<double>::denorm_min());

  std::stringstream ss;
  write_trajectory_dump<PositivePState>(ss, paths);
  CHECK(ss.str().size() == 3 * grid.node_count() * 6 * 16);
  const auto back = read_trajectory_dump<PositivePState>(ss, 3, grid.node_count());
  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t k = 0; k < grid.node_count(); ++k)
      for (std::size_t i = 0; i < 6; ++i) {
        CHECK(std::bit_cast<std::uint64_t>(back[p][k][i].real()) ==
              std::bit_cast<std::uint64_t>(paths[p].points[k][i].real()));
        CHECK(std::bit_cast<std::uint64_t>(back[p][k][i].imag()) ==
              std::bit_cast<std::uint64_t>(paths[p].points[k][i].imag()));
      }

  std::stringstream le;
  detail::write_f64_le(le, 1.0);
  CHECK(le.str() == std::string("\0\0\0\0\0\0\xf0\x3f", 8));

  std::stringstream truncated(ss.str().substr(0, 100));
  CHECK_THROWS_AS(read_trajectory_dump<PositivePState>(truncated, 3, grid.node_count()), InvalidParam);
}

TEST_CASE("manifest") {
  Manifest m;
  m.set("run", "name", "demo");
  m.set("system", "g", 0.1);
  m.set("run", "exit_code", "0");
  m.set("run", "name", "demo2");
  REQUIRE(m.get("system", "g"));
  CHECK(*m.get("system", "g") == "0.1");
  CHECK(*m.get("run", "name") == "demo2");
  CHECK(m.get("run", "missing") == nullptr);
  std::ostringstream os;
  m.write(os);
  CHECK(os.str() == "[run]\nname = demo2\nexit_code = 0\n\n[system]\ng = 0.1\n");
}
