#ifndef QSED_SCENARIO_HPP
#define QSED_SCENARIO_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qsed/estimators.hpp"
#include "qsed/io.hpp"

namespace qsed {

/// Configuration problem, with the source line and field when known.
class ConfigError : public Error {
 public:
  ConfigError(std::string message, std::size_t line = 0, std::string field = {});
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

// ---------------------------------------------------------------------------
// Minimal INI document: [section] headers, key = value lines, ';' or '#'
// comments. Keeps line numbers for diagnostics.

struct IniEntry {
  std::string section;
  std::string key;
  std::string value;
  std::size_t line = 0;
};

struct IniDocument {
  std::vector<IniEntry> entries;
  std::vector<std::pair<std::string, std::size_t>> sections;  // name, line

  const IniEntry* find(std::string_view section, std::string_view key) const;
};

IniDocument parse_ini(std::string_view text);

/// Parses "a, b, c", "linspace(a, b, n)" or "logspace(e0, e1, n)".
std::vector<double> parse_value_list(std::string_view text);

// ---------------------------------------------------------------------------

enum class TheorySelection { QM, SED, Both };
enum class OutputSelection { Intracavity, External, Both };
enum class ScenarioKind { Simulate, Analytic, Table1, Table2, Snr };

enum class SweepAxis { g, gamma, N, tau_f, n_paths };
std::string_view to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(std::string_view s);

struct SweepSpec {
  SweepAxis axis = SweepAxis::g;
  std::vector<double> values;
};

struct ScenarioConfig {
  std::string name = "scenario";
  ScenarioKind kind = ScenarioKind::Simulate;
  TheorySelection theory = TheorySelection::Both;
  OutputSelection outputs = OutputSelection::Intracavity;

  SystemParams params;
  PhaseAngles angles;

  double t_start = 0.0;
  double t_end = 4.0;
  double dt = 0.0025;
  double sample_every = 0.25;
  std::vector<double> taus;  // overrides sample_every when non-empty

  HomodyneParams homodyne;
  double tau_f = 0.1;

  std::size_t n_paths = 100000;
  std::size_t full_paths = 1000000;
  std::size_t n_batches = 100;
  std::optional<std::uint64_t> seed;
  IntegratorConfig integrator;
  unsigned threads = 0;

  std::size_t dump_paths = 0;  // trajectories written to the binary dump

  // snr kind: sample sizes evaluated when not sweeping
  double snr_n_min = 1e9;
  double snr_n_max = 1e15;
  std::size_t snr_points = 61;

  std::optional<SweepSpec> sweep;
  std::string output_dir = "out";

  TimeGrid grid() const { return TimeGrid(t_start, t_end, dt); }
  EnsembleSpec ensemble() const;
};

ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::string& path);

/// Checks cross-field invariants; throws ConfigError.
void validate(const ScenarioConfig& c);

/// Command-line overrides applied on top of a parsed config.
struct Overrides {
  std::optional<std::size_t> paths;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<std::size_t> batches;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
  bool full = false;
};

void apply(const Overrides& o, ScenarioConfig& c);

std::vector<std::string> preset_names();
/// INI text of a built-in preset; ConfigError if unknown.
std::string_view preset_text(std::string_view name);

// ---------------------------------------------------------------------------
// Compare

struct CompareRow {
  double tau = 0.0;
  double a = 0.0;
  double b = 0.0;
  double difference = 0.0;
  double combined_se = 0.0;
  double se_a = 0.0;
  double se_b = 0.0;
  bool signs_differ = false;
};

struct CompareReport {
  Theory theory_a = Theory::QM;
  Theory theory_b = Theory::SED;
  double N = 0.0;
  double g = 0.0;
  std::vector<CompareRow> rows;
  std::vector<std::string> verdicts;
};

/// Per-time difference a - b of the real parts. GridMismatch unless both
/// row sets have identical tau columns.
CompareReport compare(std::span<const EnsembleCsvRow> a, std::span<const EnsembleCsvRow> b);
CompareReport compare(const EnsembleResult& a, const EnsembleResult& b);
void write_compare_csv(std::ostream& os, const CompareReport& r);

// ---------------------------------------------------------------------------
// Runner

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config = 2;
inline constexpr int non_finite = 3;
}  // namespace exit_code

/// Runs the scenario and writes its artifacts under c.output_dir.
/// Progress and verdict lines go to `log`, diagnostics to `err`.
int run(const ScenarioConfig& c, std::ostream& log, std::ostream& err);
/// Runs the scenario once per value of `s` and writes combined outputs.
int sweep(const ScenarioConfig& c, const SweepSpec& s, std::ostream& log, std::ostream& err);
/// Runs a preset: a sweep when it carries a [sweep] section, a plain run otherwise.
int run_preset(std::string_view name, const Overrides& o, std::ostream& log, std::ostream& err);

}  // namespace qsed

#endif  // QSED_SCENARIO_HPP
