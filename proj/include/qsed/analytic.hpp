#ifndef QSED_ANALYTIC_HPP
#define QSED_ANALYTIC_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qsed/core.hpp"

namespace qsed {

/// CODATA 2018 exact/recommended values, SI units.
namespace constants {
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double epsilon0 = 8.8541878128e-12;     // F/m
inline constexpr double c_light = 299792458.0;           // m/s
inline constexpr double e_charge = 1.602176634e-19;      // C
}  // namespace constants

enum class Theory { QM, SED };
enum class Scope { Intracavity, External };

std::string_view to_string(Theory t);
Theory theory_from_string(std::string_view s);

struct AnalyticPrediction {
  double value = 0.0;
  Theory theory = Theory::QM;
  Scope scope = Scope::Intracavity;
  int leading_order_in_g = 3;
};

// ---------------------------------------------------------------------------
// Intracavity leading-order moments (equal damping gamma1 = gamma2 = gamma3).

/// Leading O(g^3) value of <a1 a2 Delta a3>:
///   -eps^2 g^3 e^{-3 gamma tau}/gamma^2 [e^{gamma tau}/gamma - 2 tau - e^{-gamma tau}/gamma].
/// The bracket equals 2(sinh(gamma tau) - gamma tau)/gamma; below
/// gamma*tau = qm_series_threshold a Taylor series replaces the subtraction.
cplx qm_triple_intracavity(double tau, const SystemParams& p);

inline constexpr double qm_series_threshold = 1e-2;

/// Closed form only, no series guard. Exposed for consistency tests.
cplx qm_triple_intracavity_closed(double tau, const SystemParams& p);
/// Series only. Exposed for consistency tests.
cplx qm_triple_intracavity_series(double tau, const SystemParams& p);

/// Quadrature moment <M>_QM ~ (1/4) Re[e^{-i Theta} <a1 a2 Delta a3>], which is
/// (1/4) cos(Theta) <a1 a2 Delta a3> for real epsilon.
double qm_moment_M(double tau, const SystemParams& p, const PhaseAngles& angles);

/// <Db1 Db2 Db3*> ~ (g / 12 gamma)(1 - e^{-3 gamma tau}).
double sed_triple_intracavity(double tau, const SystemParams& p);

/// <M>_SED ~ (1/4) cos(Phi) (g / 12 gamma)(1 - e^{-3 gamma tau}).
double sed_moment_M(double tau, const SystemParams& p, const PhaseAngles& angles);

/// True when the dominant-term approximation behind qm_moment_M is not
/// guaranteed, i.e. |cos Theta| < 1e-6.
bool qm_dominant_term_degenerate(const PhaseAngles& angles);

// ---------------------------------------------------------------------------
// External (homodyne, time-integrated) moments, local-oscillator phases zero,
// window [0, tau_f] with tau_f << 1. Units restored through p.Gamma.

/// -(sqrt2/48) g^3 Re(eps^2) (e A eta E)^3 Gamma^{-3/2} tau_f^6
double qm_external(double tau_f, const SystemParams& p, const HomodyneParams& h);

/// (sqrt2/16) g tau_f^4 (e A eta E)^3 Gamma^{-3/2}
double sed_external(double tau_f, const SystemParams& p, const HomodyneParams& h);

AnalyticPrediction intracavity_prediction(Theory t, double tau, const SystemParams& p,
                                          const PhaseAngles& angles);
AnalyticPrediction external_prediction(Theory t, double tau_f, const SystemParams& p,
                                       const HomodyneParams& h);

/// Signal-to-noise of the QM/SED difference of external sample moments for
/// n samples: sqrt(n - 1) eta^{3/2} g tau_f^{5/2} / 16. InvalidParam if n < 2.
double signal_to_noise(double n, double eta, double g, double tau_f);

/// Smallest n with signal_to_noise(n, ...) = target.
double samples_for_snr(double target, double eta, double g, double tau_f);

// ---------------------------------------------------------------------------
// Realistic crystal parameters

struct CrystalSpec {
  std::string name;
  double d_eff = 0.0;            // pm/V
  double lambda_pump = 0.0;      // m; signal and idler at 2*lambda_pump
  double cavity_length = 0.1;    // m
  double crystal_length = 0.1;   // m
  double volume = 0.0;           // m^3; if 0, pi * spot_size^2 * cavity_length
  double spot_size = 0.0;        // m
  double transmission = 0.01;

  double mode_volume() const;
};

void validate(const CrystalSpec& c);

struct Coupling {
  double G = 0.0;      // s^-1
  double Gamma = 0.0;  // s^-1
  double g = 0.0;
};

/// G = d_eff sqrt(2 hbar w1 w2 w3 / (eps0 V)) l/L,  Gamma = T c / (2L),  g = G/Gamma.
Coupling crystal_to_coupling(const CrystalSpec& c);

/// Homodyne settings used to evaluate the published external moments.
struct ExternalSetup {
  double eta = 1.0;
  double tau_f = 0.1;
  double E_lo = 1e9;         // s^{-1/2}
  double e_times_A = 1.0;    // A = 1/e
  double epsilon = 1e3;
};

struct CrystalPreset {
  CrystalSpec spec;
  Coupling reference;             // published G, Gamma, g
  double reference_qm_external = 0.0;
  double reference_sed_external = 0.0;
  double reference_sample_size = 0.0;  // n giving S = 1
};

struct CrystalTable {
  ExternalSetup external;
  std::vector<CrystalPreset> crystals;

  const CrystalPreset& find(std::string_view name) const;
};

/// Parses the crystal preset JSON document. Throws InvalidParam on schema errors.
CrystalTable parse_crystal_table(std::string_view json_text);
CrystalTable load_crystal_table(const std::string& path);
/// The preset table compiled into the library (data/crystals.json).
const CrystalTable& builtin_crystal_table();

/// SystemParams and HomodyneParams for the published external-moment setup,
/// using the preset's published (rounded) g and Gamma.
SystemParams external_params(const CrystalPreset& c, const ExternalSetup& s);
HomodyneParams external_homodyne(const ExternalSetup& s);

}  // namespace qsed

#endif  // QSED_ANALYTIC_HPP
