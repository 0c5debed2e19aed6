#include "qsed/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qsed {

namespace {

std::string nonfinite_message(std::size_t step, std::optional<std::size_t> path,
                              std::optional<std::uint64_t> seed) {
  std::ostringstream os;
  os << "non-finite state";
  if (step != NonFinite::unknown_step) os << " at step " << step;
  if (path) os << " on path " << *path;
  if (seed) os << " (path seed " << *seed << ")";
  return os.str();
}

void require_positive(double v, const char* name) {
  if (!std::isfinite(v) || v <= 0.0) {
    std::ostringstream os;
    os << name << " must be finite and > 0, got " << v;
    throw InvalidParam(os.str());
  }
}

}  // namespace

NonFinite::NonFinite(std::size_t step, std::optional<std::size_t> path,
                     std::optional<std::uint64_t> path_seed)
    : Error(nonfinite_message(step, path, path_seed)), step_(step), path_(path), path_seed_(path_seed) {}

double SystemParams::gamma_min() const { return std::min({gamma1, gamma2, gamma3}); }

double SystemParams::common_gamma() const {
  if (!has_equal_damping()) {
    std::ostringstream os;
    os << "formula requires gamma1 = gamma2 = gamma3, got " << gamma1 << ", " << gamma2 << ", "
       << gamma3;
    throw UnequalDamping(os.str());
  }
  return gamma1;
}

TimeGrid::TimeGrid(double t_start, double t_end, double dt) : t_start_(t_start), t_end_(t_end), dt_(dt) {
  if (!std::isfinite(t_start) || t_start < 0.0)
    throw InvalidParam("t_start must be finite and >= 0");
  if (!std::isfinite(t_end)) throw InvalidParam("t_end must be finite");
  require_positive(dt, "dt");
  const double span = (t_end - t_start) / dt;
  const double rounded = std::round(span);
  if (rounded < 1.0 || std::abs(span - rounded) > 1e-9 * std::max(1.0, rounded)) {
    std::ostringstream os;
    os << "(t_end - t_start)/dt must be a positive integer, got " << span;
    throw InvalidParam(os.str());
  }
  steps_ = static_cast<std::size_t>(rounded);
}

double TimeGrid::time(std::size_t k) const {
  if (k >= steps_) return k == steps_ ? t_end_ : t_start_ + static_cast<double>(k) * dt_;
  return t_start_ + static_cast<double>(k) * dt_;
}

std::optional<std::size_t> TimeGrid::node_at(double t) const {
  const double k = (t - t_start_) / dt_;
  const double r = std::round(k);
  if (r < 0.0 || r > static_cast<double>(steps_) || std::abs(k - r) > 1e-9 * std::max(1.0, r))
    return std::nullopt;
  return static_cast<std::size_t>(r);
}

void validate(const HomodyneParams& h) {
  require_positive(h.e_charge, "e_charge");
  require_positive(h.amp_A, "amp_A");
  if (!std::isfinite(h.eta) || h.eta <= 0.0 || h.eta > 1.0)
    throw InvalidParam("eta must lie in (0, 1]");
  require_positive(h.E_lo, "E_lo");
}

bool is_finite(const PhasePoint& p) {
  return std::visit(
      [](const auto& pt) {
        return std::all_of(pt.x.begin(), pt.x.end(),
                           [](cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
      },
      p);
}

ValidationReport validate_params(const SystemParams& p, const TimeGrid& grid) {
  if (!std::isfinite(p.g) || p.g < 0.0) throw InvalidParam("g must be finite and >= 0");
  require_positive(p.gamma1, "gamma1");
  require_positive(p.gamma2, "gamma2");
  require_positive(p.gamma3, "gamma3");
  require_positive(p.Gamma, "Gamma");
  if (!std::isfinite(p.epsilon.real()) || !std::isfinite(p.epsilon.imag()))
    throw InvalidParam("epsilon must be finite");
  // TimeGrid enforces its own invariants at construction.

  ValidationReport report;
  if (p.g >= 1.0) {
    report.warnings.emplace_back(
        "g >= 1: positive-P boundary terms may not be negligible; treat results with caution");
  }
  const double boundary = p.g * std::abs(p.epsilon) * grid.t_end() / p.gamma_min();
  if (boundary > 1.0) {
    std::ostringstream os;
    os << "g*|epsilon|*t_end/gamma_min = " << boundary
       << " exceeds 1: positive-P boundary terms may not be negligible";
    report.warnings.push_back(os.str());
  }
  return report;
}

}  // namespace qsed
