#include "qsed/analytic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "crystals_data.hpp"

namespace qsed {

namespace {

constexpr double sqrt2 = std::numbers::sqrt2;

void check_tau(double tau) {
  if (!std::isfinite(tau) || tau < 0.0) throw InvalidParam("tau must be finite and >= 0");
}

}  // namespace

std::string_view to_string(Theory t) { return t == Theory::QM ? "QM" : "SED"; }

Theory theory_from_string(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "qm") return Theory::QM;
  if (lower == "sed") return Theory::SED;
  throw InvalidParam("unknown theory '" + std::string(s) + "' (expected qm or sed)");
}

cplx qm_triple_intracavity_closed(double tau, const SystemParams& p) {
  check_tau(tau);
  const double gm = p.common_gamma();
  const cplx eps2 = p.epsilon * p.epsilon;
  const double g3 = p.g * p.g * p.g;
  // e^x - e^-x - 2x written with expm1 so the leading 1s cancel exactly
  const double x = gm * tau;
  const double bracket = (std::expm1(x) - std::expm1(-x) - 2.0 * x) / gm;
  return -eps2 * g3 * std::exp(-3.0 * gm * tau) / (gm * gm) * bracket;
}

cplx qm_triple_intracavity_series(double tau, const SystemParams& p) {
  check_tau(tau);
  const double gm = p.common_gamma();
  const cplx eps2 = p.epsilon * p.epsilon;
  const double g3 = p.g * p.g * p.g;
  const double x2 = (gm * tau) * (gm * tau);
  // (sinh x - x) / (x^3/6), five terms
  const double s = 1.0 + x2 / 20.0 * (1.0 + x2 / 42.0 * (1.0 + x2 / 72.0 * (1.0 + x2 / 110.0)));
  return -eps2 * g3 * std::exp(-3.0 * gm * tau) * (tau * tau * tau / 3.0) * s;
}

cplx qm_triple_intracavity(double tau, const SystemParams& p) {
  const double gm = p.common_gamma();
  return gm * tau < qm_series_threshold ? qm_triple_intracavity_series(tau, p)
                                        : qm_triple_intracavity_closed(tau, p);
}

double qm_moment_M(double tau, const SystemParams& p, const PhaseAngles& angles) {
  const cplx t = qm_triple_intracavity(tau, p);
  return 0.25 * std::real(std::polar(1.0, -angles.Theta()) * t);
}

double sed_triple_intracavity(double tau, const SystemParams& p) {
  check_tau(tau);
  const double gm = p.common_gamma();
  return p.g / (12.0 * gm) * -std::expm1(-3.0 * gm * tau);
}

double sed_moment_M(double tau, const SystemParams& p, const PhaseAngles& angles) {
  return 0.25 * std::cos(angles.Phi()) * sed_triple_intracavity(tau, p);
}

bool qm_dominant_term_degenerate(const PhaseAngles& angles) {
  return std::abs(std::cos(angles.Theta())) < 1e-6;
}

double qm_external(double tau_f, const SystemParams& p, const HomodyneParams& h) {
  check_tau(tau_f);
  const double gain = h.gain();
  const double eps2 = std::real(p.epsilon * p.epsilon);
  return -(sqrt2 / 48.0) * std::pow(p.g, 3) * eps2 * gain * gain * gain * std::pow(p.Gamma, -1.5) *
         std::pow(tau_f, 6);
}

double sed_external(double tau_f, const SystemParams& p, const HomodyneParams& h) {
  check_tau(tau_f);
  const double gain = h.gain();
  return (sqrt2 / 16.0) * p.g * std::pow(tau_f, 4) * gain * gain * gain * std::pow(p.Gamma, -1.5);
}

AnalyticPrediction intracavity_prediction(Theory t, double tau, const SystemParams& p,
                                          const PhaseAngles& angles) {
  if (t == Theory::QM) return {qm_moment_M(tau, p, angles), t, Scope::Intracavity, 3};
  return {sed_moment_M(tau, p, angles), t, Scope::Intracavity, 1};
}

AnalyticPrediction external_prediction(Theory t, double tau_f, const SystemParams& p,
                                       const HomodyneParams& h) {
  if (t == Theory::QM) return {qm_external(tau_f, p, h), t, Scope::External, 3};
  return {sed_external(tau_f, p, h), t, Scope::External, 1};
}

double signal_to_noise(double n, double eta, double g, double tau_f) {
  if (!(n >= 2.0)) throw InvalidParam("signal_to_noise requires sample size n >= 2");
  return std::sqrt(n - 1.0) * std::pow(eta, 1.5) * g * std::pow(tau_f, 2.5) / 16.0;
}

double samples_for_snr(double target, double eta, double g, double tau_f) {
  const double per_sample = std::pow(eta, 1.5) * g * std::pow(tau_f, 2.5) / 16.0;
  if (!(per_sample > 0.0)) throw InvalidParam("samples_for_snr requires eta, g, tau_f > 0");
  const double r = target / per_sample;
  return std::max(2.0, r * r + 1.0);
}

// ---------------------------------------------------------------------------

double CrystalSpec::mode_volume() const {
  if (volume > 0.0) return volume;
  return std::numbers::pi * spot_size * spot_size * cavity_length;
}

void validate(const CrystalSpec& c) {
  auto positive = [&](double v, const char* what) {
    if (!std::isfinite(v) || v <= 0.0)
      throw InvalidParam("crystal '" + c.name + "': " + what + " must be finite and > 0");
  };
  positive(c.d_eff, "d_eff");
  positive(c.lambda_pump, "lambda_pump");
  positive(c.cavity_length, "cavity_length");
  positive(c.crystal_length, "crystal_length");
  positive(c.mode_volume(), "volume (or spot_size)");
  positive(c.transmission, "transmission");
  if (c.crystal_length > c.cavity_length)
    throw InvalidParam("crystal '" + c.name + "': crystal_length exceeds cavity_length");
}

Coupling crystal_to_coupling(const CrystalSpec& c) {
  validate(c);
  using namespace constants;
  const double w3 = 2.0 * std::numbers::pi * c_light / c.lambda_pump;
  const double w1 = 0.5 * w3;
  const double w2 = 0.5 * w3;
  const double d = c.d_eff * 1e-12;
  Coupling out;
  out.G = d * std::sqrt(2.0 * hbar * w1 * w2 * w3 / (epsilon0 * c.mode_volume())) * c.crystal_length /
          c.cavity_length;
  out.Gamma = c.transmission * c_light / (2.0 * c.cavity_length);
  out.g = out.G / out.Gamma;
  return out;
}

const CrystalPreset& CrystalTable::find(std::string_view name) const {
  for (const auto& c : crystals)
    if (c.spec.name == name) return c;
  throw InvalidParam("no crystal preset named '" + std::string(name) + "'");
}

CrystalTable parse_crystal_table(std::string_view json_text) {
  using nlohmann::json;
  CrystalTable table;
  try {
    const json doc = json::parse(json_text);
    const auto& ext = doc.at("external_setup");
    table.external.eta = ext.at("eta").get<double>();
    table.external.tau_f = ext.at("tau_f").get<double>();
    table.external.E_lo = ext.at("E_lo").get<double>();
    table.external.e_times_A = ext.at("e_times_A").get<double>();
    table.external.epsilon = ext.at("epsilon").get<double>();
    for (const auto& item : doc.at("crystals")) {
      CrystalPreset c;
      c.spec.name = item.at("name").get<std::string>();
      c.spec.d_eff = item.at("d_eff_pm_per_V").get<double>();
      c.spec.lambda_pump = item.at("lambda_pump_m").get<double>();
      c.spec.cavity_length = item.at("cavity_length_m").get<double>();
      c.spec.crystal_length = item.at("crystal_length_m").get<double>();
      c.spec.volume = item.value("volume_m3", 0.0);
      c.spec.spot_size = item.value("spot_size_m", 0.0);
      c.spec.transmission = item.at("transmission").get<double>();
      const auto& ref = item.at("reference");
      c.reference.G = ref.at("G").get<double>();
      c.reference.Gamma = ref.at("Gamma").get<double>();
      c.reference.g = ref.at("g").get<double>();
      c.reference_qm_external = ref.at("qm_external").get<double>();
      c.reference_sed_external = ref.at("sed_external").get<double>();
      c.reference_sample_size = ref.at("sample_size_snr1").get<double>();
      validate(c.spec);
      table.crystals.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw InvalidParam(std::string("crystal table: ") + e.what());
  }
  return table;
}

CrystalTable load_crystal_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParam("cannot open crystal table '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_crystal_table(ss.str());
}

const CrystalTable& builtin_crystal_table() {
  static const CrystalTable table = parse_crystal_table(detail::crystals_json);
  return table;
}

SystemParams external_params(const CrystalPreset& c, const ExternalSetup& s) {
  return SystemParams::equal_damping(c.reference.g, 1.0, cplx(s.epsilon, 0.0), c.reference.Gamma);
}

HomodyneParams external_homodyne(const ExternalSetup& s) {
  return HomodyneParams{constants::e_charge, s.e_times_A / constants::e_charge, s.eta, s.E_lo};
}

}  // namespace qsed
