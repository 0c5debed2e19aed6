#ifndef QSED_CORE_HPP
#define QSED_CORE_HPP

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace qsed {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParam : public Error {
 public:
  using Error::Error;
};

class UnequalDamping : public Error {
 public:
  using Error::Error;
};

class DegenerateEnsemble : public Error {
 public:
  using Error::Error;
};

class WindowOutOfRange : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// Raised when a trajectory leaves the representable range. For the positive-P
/// model this usually means the run is outside the regime where the
/// equations hold.
class NonFinite : public Error {
 public:
  static constexpr std::size_t unknown_step = static_cast<std::size_t>(-1);

  explicit NonFinite(std::size_t step, std::optional<std::size_t> path = std::nullopt,
                     std::optional<std::uint64_t> path_seed = std::nullopt);

  std::size_t step() const noexcept { return step_; }
  std::optional<std::size_t> path() const noexcept { return path_; }
  std::optional<std::uint64_t> path_seed() const noexcept { return path_seed_; }

 private:
  std::size_t step_;
  std::optional<std::size_t> path_;
  std::optional<std::uint64_t> path_seed_;
};

// ---------------------------------------------------------------------------
// Domain types

/// Dimensionless oscillator configuration. Time is measured in units of
/// 1/Gamma; Gamma itself is only used to restore units on external moments.
struct SystemParams {
  double g = 0.1;
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  double gamma3 = 1.0;
  cplx epsilon{1.0, 0.0};
  double Gamma = 1.0;

  static SystemParams equal_damping(double g, double gamma, cplx epsilon, double Gamma = 1.0) {
    return SystemParams{g, gamma, gamma, gamma, epsilon, Gamma};
  }

  /// Mean initial pump photon number N = |epsilon|^2.
  double photon_number() const { return std::norm(epsilon); }
  bool has_equal_damping() const { return gamma1 == gamma2 && gamma2 == gamma3; }
  double gamma_min() const;

  /// Common damping; throws UnequalDamping unless all three ratios are identical.
  double common_gamma() const;
};

struct PhaseAngles {
  std::array<double, 3> theta{0.0, 0.0, 0.0};      // intracavity quadrature phases
  std::array<double, 3> theta_bar{0.0, 0.0, 0.0};  // local-oscillator phases

  double Theta() const { return theta[0] + theta[1] + theta[2]; }
  double Phi() const { return theta[0] + theta[1] - theta[2]; }
};

/// Uniform grid tau_start + k*dt, k = 0..steps.
class TimeGrid {
 public:
  static constexpr double default_dt = 0.0025;

  TimeGrid(double t_start, double t_end, double dt = default_dt);

  double t_start() const { return t_start_; }
  double t_end() const { return t_end_; }
  double dt() const { return dt_; }
  std::size_t steps() const { return steps_; }
  std::size_t node_count() const { return steps_ + 1; }

  /// Node time; the last node returns t_end exactly.
  double time(std::size_t k) const;

  /// Index of the node at time t, if t lies on the grid within 1e-9 (relative to dt).
  std::optional<std::size_t> node_at(double t) const;

  bool operator==(const TimeGrid&) const = default;

 private:
  double t_start_;
  double t_end_;
  double dt_;
  std::size_t steps_;
};

struct HomodyneParams {
  double e_charge = 1.0;
  double amp_A = 1.0;
  double eta = 1.0;
  double E_lo = 1.0;  // s^{-1/2}

  /// e * A * eta * E, the per-mode conversion from flux quadrature to current.
  double gain() const { return e_charge * amp_A * eta * E_lo; }
};

void validate(const HomodyneParams& h);

// Phase-space points. Component order is fixed and shared with the models'
// drift and diffusion rows.
namespace pp {
enum Component : std::size_t { a1 = 0, a1p = 1, a2 = 2, a2p = 3, a3 = 4, a3p = 5 };
}

using PositivePState = std::array<cplx, 6>;
using SedState = std::array<cplx, 3>;

struct PositivePPoint {
  PositivePState x{};
};

struct SedPoint {
  SedState x{};
};

using PhasePoint = std::variant<PositivePPoint, SedPoint>;

bool is_finite(const PhasePoint& p);

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
  std::vector<std::string> warnings;
  bool clean() const { return warnings.empty(); }
};

/// Throws InvalidParam on invariant violations. Returns warnings for runs
/// that are legal but where the positive-P boundary terms may not be small.
ValidationReport validate_params(const SystemParams& p, const TimeGrid& grid);

}  // namespace qsed

#endif  // QSED_CORE_HPP
