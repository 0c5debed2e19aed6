#include "qsed/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "presets_data.hpp"

#ifndef QSED_VERSION
#define QSED_VERSION "unknown"
#endif

namespace qsed {

namespace fs = std::filesystem;

namespace {

std::string format_config_message(const std::string& message, std::size_t line, const std::string& field) {
  std::string s;
  if (line > 0) s += "line " + std::to_string(line) + ": ";
  if (!field.empty()) s += field + ": ";
  return s + message;
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

double to_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw ConfigError("'" + std::string(text) + "' is not a number");
  return v;
}

}  // namespace

ConfigError::ConfigError(std::string message, std::size_t line, std::string field)
    : Error(format_config_message(message, line, field)), line_(line), field_(std::move(field)) {}

// ---------------------------------------------------------------------------
// INI

const IniEntry* IniDocument::find(std::string_view section, std::string_view key) const {
  const IniEntry* hit = nullptr;
  for (const auto& e : entries)
    if (e.section == section && e.key == key) hit = &e;
  return hit;
}

IniDocument parse_ini(std::string_view text) {
  IniDocument doc;
  std::string section;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineno;
    if (const auto c = line.find_first_of(";#"); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty()) {
      if (eol == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ConfigError("malformed section header '" + std::string(line) + "'", lineno);
      section = lower(trim(line.substr(1, line.size() - 2)));
      for (const auto& [name, at] : doc.sections)
        if (name == section)
          throw ConfigError("section [" + section + "] repeats the one on line " + std::to_string(at), lineno);
      doc.sections.emplace_back(section, lineno);
    } else {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError("expected 'key = value', got '" + std::string(line) + "'", lineno);
      const std::string key(trim(line.substr(0, eq)));
      const std::string value(trim(line.substr(eq + 1)));
      if (key.empty()) throw ConfigError("missing key before '='", lineno);
      if (section.empty()) throw ConfigError("key outside of any section", lineno, key);
      if (const auto* prev = doc.find(section, key))
        throw ConfigError("duplicate key (first set on line " + std::to_string(prev->line) + ")", lineno,
                          "[" + section + "] " + key);
      doc.entries.push_back({section, key, value, lineno});
    }
    if (eol == text.size()) break;
  }
  return doc;
}

std::vector<double> parse_value_list(std::string_view text) {
  text = trim(text);
  std::vector<double> out;
  auto split = [](std::string_view s) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
      const auto comma = s.find(',', start);
      parts.push_back(trim(s.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return parts;
  };
  for (const std::string_view fn : {"linspace", "logspace"}) {
    if (!text.starts_with(fn)) continue;
    auto rest = trim(text.substr(fn.size()));
    if (rest.size() < 2 || rest.front() != '(' || rest.back() != ')')
      throw ConfigError(std::string(fn) + " expects (start, stop, count)");
    const auto args = split(rest.substr(1, rest.size() - 2));
    if (args.size() != 3) throw ConfigError(std::string(fn) + " expects (start, stop, count)");
    const double a = to_double(args[0]);
    const double b = to_double(args[1]);
    const double nd = to_double(args[2]);
    if (!(nd >= 1.0) || nd != std::floor(nd) || nd > 1e6)
      throw ConfigError(std::string(fn) + " count must be a positive integer");
    const auto n = static_cast<std::size_t>(nd);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
      out.push_back(fn == "logspace" ? std::pow(10.0, t) : t);
    }
    return out;
  }
  if (text.empty()) return out;
  for (auto part : split(text)) out.push_back(to_double(part));
  return out;
}

// ---------------------------------------------------------------------------
// Scenario config

std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::g: return "g";
    case SweepAxis::gamma: return "gamma";
    case SweepAxis::N: return "N";
    case SweepAxis::tau_f: return "tau_f";
    case SweepAxis::n_paths: return "n_paths";
  }
  return "?";
}

SweepAxis sweep_axis_from_string(std::string_view s) {
  for (auto a : {SweepAxis::g, SweepAxis::gamma, SweepAxis::N, SweepAxis::tau_f, SweepAxis::n_paths})
    if (s == to_string(a)) return a;
  throw ConfigError("unknown sweep axis '" + std::string(s) + "' (expected g, gamma, N, tau_f or n_paths)");
}

EnsembleSpec ScenarioConfig::ensemble() const {
  EnsembleSpec s;
  s.n_paths = n_paths;
  s.n_batches = n_batches;
  s.seed = seed.value_or(0);
  s.integrator = integrator;
  s.threads = threads;
  return s;
}

namespace {

class Reader {
 public:
  explicit Reader(const IniEntry& e) : e_(e) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(msg, e_.line, "[" + e_.section + "] " + e_.key);
  }

  double number() const {
    double v = 0.0;
    try {
      v = to_double(e_.value);
    } catch (const ConfigError&) {
      fail("'" + e_.value + "' is not a number");
    }
    if (!std::isfinite(v)) fail("value must be finite");
    return v;
  }

  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("value must be > 0");
    return v;
  }

  std::size_t count() const {
    const double v = number();
    if (v < 0.0 || v != std::floor(v) || v > 1e15) fail("value must be a non-negative integer");
    return static_cast<std::size_t>(v);
  }

  std::uint64_t seed() const {
    std::uint64_t v = 0;
    const auto& s = e_.value;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
      fail("seed must be an unsigned 64-bit integer");
    return v;
  }

  std::string choice(std::initializer_list<std::string_view> allowed) const {
    const std::string v = lower(e_.value);
    for (auto a : allowed)
      if (v == a) return v;
    std::string list;
    for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
    fail("'" + e_.value + "' is not one of: " + list);
  }

  std::vector<double> list() const {
    try {
      return parse_value_list(e_.value);
    } catch (const ConfigError& err) {
      fail(err.what());
    }
  }

  const std::string& text() const { return e_.value; }

 private:
  const IniEntry& e_;
};

}  // namespace

ScenarioConfig parse_scenario(std::string_view text) {
  const IniDocument doc = parse_ini(text);
  ScenarioConfig c;
  std::optional<double> gamma_all, n_photons, eps_re, eps_im;
  std::optional<std::size_t> gamma_line;
  std::optional<std::string> sweep_axis;
  std::optional<std::vector<double>> sweep_values;
  std::size_t sweep_line = 0;

  static const std::map<std::string, std::vector<std::string>> known = {
      {"scenario", {"name", "kind", "theory", "outputs"}},
      {"system", {"g", "gamma", "gamma1", "gamma2", "gamma3", "N", "epsilon", "epsilon_im", "Gamma"}},
      {"angles", {"theta1", "theta2", "theta3", "theta_bar1", "theta_bar2", "theta_bar3"}},
      {"grid", {"t_start", "t_end", "dt", "sample_every", "taus"}},
      {"homodyne", {"e_charge", "amp_A", "eta", "E_lo", "tau_f"}},
      {"ensemble", {"paths", "full_paths", "batches", "seed", "midpoint_iterations", "scheme", "threads"}},
      {"output", {"dir", "dump_paths"}},
      {"snr", {"n_min", "n_max", "points"}},
      {"sweep", {"axis", "values"}},
  };
  for (const auto& [name, line] : doc.sections)
    if (!known.contains(name)) throw ConfigError("unknown section", line, "[" + name + "]");

  for (const auto& e : doc.entries) {
    const auto& keys = known.at(e.section);
    if (std::find(keys.begin(), keys.end(), e.key) == keys.end())
      throw ConfigError("unknown key", e.line, "[" + e.section + "] " + e.key);
    const Reader r(e);
    const std::string& s = e.section;
    const std::string& k = e.key;
    if (s == "scenario") {
      if (k == "name") {
        if (e.value.empty() || e.value.find_first_of("/\\ \t") != std::string::npos)
          r.fail("name must be non-empty without spaces or path separators");
        c.name = e.value;
      } else if (k == "kind") {
        const auto v = r.choice({"simulate", "analytic", "table1", "table2", "snr"});
        c.kind = v == "simulate"  ? ScenarioKind::Simulate
                 : v == "analytic" ? ScenarioKind::Analytic
                 : v == "table1"   ? ScenarioKind::Table1
                 : v == "table2"   ? ScenarioKind::Table2
                                   : ScenarioKind::Snr;
      } else if (k == "theory") {
        const auto v = r.choice({"qm", "sed", "both"});
        c.theory = v == "qm" ? TheorySelection::QM : v == "sed" ? TheorySelection::SED : TheorySelection::Both;
      } else {
        const auto v = r.choice({"intracavity", "external", "both"});
        c.outputs = v == "intracavity" ? OutputSelection::Intracavity
                    : v == "external"  ? OutputSelection::External
                                       : OutputSelection::Both;
      }
    } else if (s == "system") {
      if (k == "g") c.params.g = r.number();
      else if (k == "gamma") gamma_all = r.positive(), gamma_line = e.line;
      else if (k == "gamma1") c.params.gamma1 = r.positive();
      else if (k == "gamma2") c.params.gamma2 = r.positive();
      else if (k == "gamma3") c.params.gamma3 = r.positive();
      else if (k == "N") {
        n_photons = r.number();
        if (*n_photons < 0.0) r.fail("photon number must be >= 0");
      } else if (k == "epsilon") eps_re = r.number();
      else if (k == "epsilon_im") eps_im = r.number();
      else c.params.Gamma = r.positive();
    } else if (s == "angles") {
      const int idx = k.back() - '1';
      (k.starts_with("theta_bar") ? c.angles.theta_bar : c.angles.theta)[static_cast<std::size_t>(idx)] =
          r.number();
    } else if (s == "grid") {
      if (k == "t_start") c.t_start = r.number();
      else if (k == "t_end") c.t_end = r.number();
      else if (k == "dt") c.dt = r.positive();
      else if (k == "sample_every") c.sample_every = r.number();
      else {
        c.taus = r.list();
        if (c.taus.empty()) r.fail("list is empty");
      }
    } else if (s == "homodyne") {
      if (k == "e_charge") c.homodyne.e_charge = r.positive();
      else if (k == "amp_A") c.homodyne.amp_A = r.positive();
      else if (k == "eta") c.homodyne.eta = r.positive();
      else if (k == "E_lo") c.homodyne.E_lo = r.positive();
      else c.tau_f = r.positive();
    } else if (s == "ensemble") {
      if (k == "paths") c.n_paths = r.count();
      else if (k == "full_paths") c.full_paths = r.count();
      else if (k == "batches") c.n_batches = r.count();
      else if (k == "seed") c.seed = r.seed();
      else if (k == "midpoint_iterations") {
        const auto n = r.count();
        if (n < 1 || n > 100) r.fail("must be in 1..100");
        c.integrator.midpoint_iterations = static_cast<int>(n);
      } else if (k == "scheme") {
        c.integrator.scheme =
            r.choice({"midpoint", "euler"}) == "midpoint" ? Scheme::SemiImplicitMidpoint : Scheme::EulerMaruyama;
      } else {
        const auto n = r.count();
        if (n > 4096) r.fail("thread count is unreasonably large");
        c.threads = static_cast<unsigned>(n);
      }
    } else if (s == "output") {
      if (k == "dir") {
        if (e.value.empty()) r.fail("directory must not be empty");
        c.output_dir = e.value;
      } else c.dump_paths = r.count();
    } else if (s == "snr") {
      if (k == "n_min") c.snr_n_min = r.positive();
      else if (k == "n_max") c.snr_n_max = r.positive();
      else {
        c.snr_points = r.count();
        if (c.snr_points < 2) r.fail("need at least 2 points");
      }
    } else if (s == "sweep") {
      if (k == "axis") {
        try {
          sweep_axis = std::string(to_string(sweep_axis_from_string(e.value)));
        } catch (const ConfigError& err) {
          r.fail(err.what());
        }
      } else {
        sweep_values = r.list();
        sweep_line = e.line;
      }
    }
  }

  if (gamma_all) {
    for (const char* k : {"gamma1", "gamma2", "gamma3"})
      if (doc.find("system", k))
        throw ConfigError("'gamma' and '" + std::string(k) + "' are mutually exclusive", *gamma_line,
                          "[system] gamma");
    c.params.gamma1 = c.params.gamma2 = c.params.gamma3 = *gamma_all;
  }
  if (n_photons && (eps_re || eps_im))
    throw ConfigError("'N' and 'epsilon' are mutually exclusive", doc.find("system", "N")->line, "[system] N");
  if (n_photons) c.params.epsilon = cplx(std::sqrt(*n_photons), 0.0);
  if (eps_re || eps_im) c.params.epsilon = cplx(eps_re.value_or(0.0), eps_im.value_or(0.0));

  if (sweep_axis || sweep_values) {
    if (!sweep_axis) throw ConfigError("missing key", sweep_line, "[sweep] axis");
    if (!sweep_values) throw ConfigError("missing key", doc.find("sweep", "axis")->line, "[sweep] values");
    c.sweep = SweepSpec{sweep_axis_from_string(*sweep_axis), *sweep_values};
  }
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

namespace {

bool wants_intracavity(const ScenarioConfig& c) { return c.outputs != OutputSelection::External; }
bool wants_external(const ScenarioConfig& c) { return c.outputs != OutputSelection::Intracavity; }

std::vector<Theory> theories(const ScenarioConfig& c) {
  switch (c.theory) {
    case TheorySelection::QM: return {Theory::QM};
    case TheorySelection::SED: return {Theory::SED};
    case TheorySelection::Both: return {Theory::QM, Theory::SED};
  }
  return {};
}

std::vector<std::size_t> observation_nodes(const ScenarioConfig& c, const TimeGrid& grid) {
  if (c.taus.empty()) return sample_nodes(grid, c.sample_every);
  std::vector<std::size_t> nodes;
  for (double t : c.taus) {
    const auto k = grid.node_at(t);
    if (!k) throw ConfigError("tau " + format_double(t) + " is not a grid node", 0, "[grid] taus");
    nodes.push_back(*k);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

std::vector<double> analytic_taus(const ScenarioConfig& c) {
  if (!c.taus.empty()) return c.taus;
  const TimeGrid grid(c.t_start, c.t_end, c.sample_every > 0.0 ? c.sample_every : c.dt);
  std::vector<double> t;
  for (std::size_t k = 0; k < grid.node_count(); ++k) t.push_back(grid.time(k));
  return t;
}

}  // namespace

void validate(const ScenarioConfig& c) {
  try {
    if (c.kind == ScenarioKind::Simulate) {
      if (!c.seed) throw ConfigError("a seed is required for simulations", 0, "[ensemble] seed");
      validate(c.integrator);
      validate(c.ensemble());
      if (wants_intracavity(c)) {
        const TimeGrid grid = c.grid();
        validate_params(c.params, grid);
        if (c.sample_every < 0.0) throw ConfigError("must be >= 0", 0, "[grid] sample_every");
        observation_nodes(c, grid);
      }
      if (wants_external(c)) {
        validate(c.homodyne);
        const TimeGrid ext(0.0, c.tau_f, c.dt);
        validate_params(c.params, ext);
      }
    } else if (c.kind == ScenarioKind::Analytic) {
      c.params.common_gamma();
      validate_params(c.params, TimeGrid(0.0, 1.0, 0.5));
      if (c.taus.empty()) {
        if (!(c.sample_every > 0.0)) throw ConfigError("must be > 0 for analytic curves", 0, "[grid] sample_every");
        analytic_taus(c);
      }
      for (double t : c.taus)
        if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("taus must be finite and >= 0", 0, "[grid] taus");
    } else if (c.kind == ScenarioKind::Snr) {
      if (!(c.snr_n_max > c.snr_n_min) || c.snr_n_min < 2.0)
        throw ConfigError("need 2 <= n_min < n_max", 0, "[snr]");
    }
    if (c.sweep) {
      const auto& s = *c.sweep;
      if (s.values.empty()) throw ConfigError("sweep has no values", 0, "[sweep] values");
      const bool ok = c.kind == ScenarioKind::Simulate ||
                      (c.kind == ScenarioKind::Analytic &&
                       (s.axis == SweepAxis::g || s.axis == SweepAxis::gamma || s.axis == SweepAxis::N)) ||
                      (c.kind == ScenarioKind::Snr && s.axis == SweepAxis::n_paths);
      if (!ok)
        throw ConfigError("axis '" + std::string(to_string(s.axis)) + "' cannot be swept for this scenario kind",
                          0, "[sweep] axis");
      if (c.kind == ScenarioKind::Simulate && s.axis == SweepAxis::tau_f && !wants_external(c))
        throw ConfigError("tau_f sweeps need external outputs", 0, "[sweep] axis");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
}

void apply(const Overrides& o, ScenarioConfig& c) {
  if (o.full) c.n_paths = c.full_paths;
  if (o.paths) c.n_paths = *o.paths;
  if (o.seed) c.seed = *o.seed;
  if (o.dt) c.dt = *o.dt;
  if (o.batches) c.n_batches = *o.batches;
  if (o.threads) c.threads = *o.threads;
  if (o.out) c.output_dir = *o.out;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& p : detail::presets) names.emplace_back(p.name);
  return names;
}

std::string_view preset_text(std::string_view name) {
  for (const auto& p : detail::presets)
    if (p.name == name) return p.text;
  std::string list;
  for (const auto& p : detail::presets) list += (list.empty() ? "" : ", ") + std::string(p.name);
  throw ConfigError("unknown preset '" + std::string(name) + "' (available: " + list + ")");
}

// ---------------------------------------------------------------------------
// Compare

namespace {

bool near(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

void add_verdicts(CompareReport& r) {
  auto resolved = [](const CompareRow& row, double k) {
    return std::abs(row.a) >= k * row.se_a && std::abs(row.b) >= k * row.se_b && row.se_a > 0.0 &&
           row.se_b > 0.0;
  };
  std::size_t differ = 0, positive_tau = 0;
  for (const auto& row : r.rows) {
    if (row.tau <= 0.0) continue;
    ++positive_tau;
    if (row.signs_differ) ++differ;
  }
  std::ostringstream g;
  g << "signs differ at " << differ << " of " << positive_tau << " nodes with tau > 0";
  r.verdicts.push_back(g.str());

  const bool qm_vs_sed = r.theory_a == Theory::QM && r.theory_b == Theory::SED;
  if (qm_vs_sed && (near(r.N, 1.0) || near(r.N, 10.0))) {
    // QM negative, SED positive wherever both are resolved at 3 SE.
    std::size_t n_res = 0, n_ok = 0;
    for (const auto& row : r.rows) {
      if (row.tau <= 0.0 || !resolved(row, 3.0)) continue;
      ++n_res;
      if (row.a < 0.0 && row.b > 0.0) ++n_ok;
    }
    std::ostringstream os;
    os << "sign opposition (QM < 0 < SED) at N=" << format_double(r.N) << ", g=" << format_double(r.g) << ": "
       << (n_res > 0 && n_ok == n_res ? "holds" : n_res == 0 ? "unresolved" : "fails") << " (" << n_ok << " of "
       << n_res << " nodes resolved at 3 SE)";
    r.verdicts.push_back(os.str());
  } else if (qm_vs_sed && near(r.N, 100.0)) {
    // Opposite signs only count against the claim when both sides are 4 SE from zero.
    std::size_t n_res = 0, n_bad = 0;
    for (const auto& row : r.rows) {
      if (row.tau <= 0.07 || !resolved(row, 4.0)) continue;
      ++n_res;
      if (row.signs_differ) ++n_bad;
    }
    std::ostringstream os;
    os << "same sign for tau > 0.07 at N=100, g=" << format_double(r.g) << ": "
       << (n_res == 0 ? "unresolved" : n_bad == 0 ? "holds" : "fails") << " (" << n_bad
       << " opposite-sign nodes of " << n_res << " resolved at 4 SE)";
    r.verdicts.push_back(os.str());
  }
}

}  // namespace

CompareReport compare(std::span<const EnsembleCsvRow> a, std::span<const EnsembleCsvRow> b) {
  if (a.size() != b.size())
    throw GridMismatch("row counts differ (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  CompareReport r;
  if (!a.empty()) {
    r.theory_a = a.front().theory;
    r.theory_b = b.front().theory;
    r.N = a.front().N;
    r.g = a.front().g;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].tau != b[i].tau)
      throw GridMismatch("tau differs at row " + std::to_string(i + 1) + " (" + format_double(a[i].tau) + " vs " +
                         format_double(b[i].tau) + ")");
    CompareRow row;
    row.tau = a[i].tau;
    row.a = a[i].mean_re;
    row.b = b[i].mean_re;
    row.difference = row.a - row.b;
    row.se_a = a[i].std_error;
    row.se_b = b[i].std_error;
    row.combined_se = std::hypot(row.se_a, row.se_b);
    row.signs_differ = (row.a > 0.0 && row.b < 0.0) || (row.a < 0.0 && row.b > 0.0);
    r.rows.push_back(row);
  }
  add_verdicts(r);
  return r;
}

CompareReport compare(const EnsembleResult& a, const EnsembleResult& b) {
  if (!(a.grid == b.grid) || a.nodes != b.nodes) throw GridMismatch("results were computed on different grids");
  const auto ra = to_rows(a);
  const auto rb = to_rows(b);
  return compare(ra, rb);
}

void write_compare_csv(std::ostream& os, const CompareReport& r) {
  os << "tau,a,b,difference,combined_se,z,signs_differ,theory_a,theory_b\n";
  for (const auto& row : r.rows) {
    const double z = row.combined_se > 0.0 ? row.difference / row.combined_se : 0.0;
    os << format_double(row.tau) << ',' << format_double(row.a) << ',' << format_double(row.b) << ','
       << format_double(row.difference) << ',' << format_double(row.combined_se) << ',' << format_double(z) << ','
       << (row.signs_differ ? "true" : "false") << ',' << to_string(r.theory_a) << ',' << to_string(r.theory_b)
       << '\n';
  }
}

// ---------------------------------------------------------------------------
// Runner

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string compiler_id() {
#if defined(__clang__)
  return "clang " __clang_version__;
#elif defined(__GNUC__)
  return "gcc " __VERSION__;
#else
  return "unknown";
#endif
}

std::string num(double x) { return std::isfinite(x) ? format_double(x) : "nan"; }

// Four significant digits for human-readable log lines.
std::string sig(double x) {
  std::ostringstream os;
  os << std::setprecision(4) << x;
  return os.str();
}

class Artifacts {
 public:
  Artifacts(const ScenarioConfig& c, std::string subcommand) : c_(c) {
    start_ = std::chrono::steady_clock::now();
    manifest_.set("run", "name", c.name);
    manifest_.set("run", "subcommand", subcommand);
    manifest_.set("run", "qsed_version", QSED_VERSION);
    manifest_.set("run", "compiler", compiler_id());
    manifest_.set("run", "started_utc", utc_timestamp());
  }

  std::ofstream open(const std::string& file) {
    fs::create_directories(c_.output_dir);
    const fs::path p = fs::path(c_.output_dir) / file;
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot write '" + p.string() + "'");
    files_.push_back(file);
    return os;
  }

  Manifest& manifest() { return manifest_; }

  void record_config(const ScenarioConfig& c) {
    auto& m = manifest_;
    const char* kinds[] = {"simulate", "analytic", "table1", "table2", "snr"};
    m.set("run", "kind", kinds[static_cast<int>(c.kind)]);
    const char* th[] = {"QM", "SED", "both"};
    m.set("run", "theory", th[static_cast<int>(c.theory)]);
    const char* outs[] = {"intracavity", "external", "both"};
    m.set("run", "outputs", outs[static_cast<int>(c.outputs)]);
    m.set("system", "g", c.params.g);
    m.set("system", "gamma1", c.params.gamma1);
    m.set("system", "gamma2", c.params.gamma2);
    m.set("system", "gamma3", c.params.gamma3);
    m.set("system", "epsilon_re", c.params.epsilon.real());
    m.set("system", "epsilon_im", c.params.epsilon.imag());
    m.set("system", "N", c.params.photon_number());
    m.set("system", "Gamma", c.params.Gamma);
    for (int i = 0; i < 3; ++i) {
      m.set("angles", "theta" + std::to_string(i + 1), c.angles.theta[static_cast<std::size_t>(i)]);
      m.set("angles", "theta_bar" + std::to_string(i + 1), c.angles.theta_bar[static_cast<std::size_t>(i)]);
    }
    m.set("grid", "t_start", c.t_start);
    m.set("grid", "t_end", c.t_end);
    m.set("grid", "dt", c.dt);
    if (c.kind == ScenarioKind::Simulate) {
      m.set("ensemble", "paths", std::to_string(c.n_paths));
      m.set("ensemble", "batches", std::to_string(c.n_batches));
      m.set("ensemble", "seed", std::to_string(c.seed.value_or(0)));
      m.set("ensemble", "midpoint_iterations", std::to_string(c.integrator.midpoint_iterations));
      m.set("ensemble", "scheme",
            c.integrator.scheme == Scheme::SemiImplicitMidpoint ? "semi-implicit midpoint" : "euler-maruyama");
      if (wants_external(c)) {
        m.set("homodyne", "tau_f", c.tau_f);
        m.set("homodyne", "gain", c.homodyne.gain());
        m.set("homodyne", "eta", c.homodyne.eta);
      }
    }
  }

  void warn(const std::string& w) { manifest_.set("warnings", "w" + std::to_string(++n_warn_), w); }

  void finish(int code, std::ostream& log) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    manifest_.set("run", "wall_time_s", wall);
    manifest_.set("run", "exit_code", std::to_string(code));
    for (std::size_t i = 0; i < files_.size(); ++i) manifest_.set("outputs", "file" + std::to_string(i + 1), files_[i]);
    try {
      auto os = open(c_.name + "_manifest.ini");
      manifest_.write(os);
    } catch (const std::exception& e) {
      log << "warning: manifest not written: " << e.what() << '\n';
    }
  }

 private:
  const ScenarioConfig& c_;
  Manifest manifest_;
  std::vector<std::string> files_;
  std::chrono::steady_clock::time_point start_;
  int n_warn_ = 0;
};

struct SimulationOutput {
  std::optional<EnsembleResult> qm, sed;
  std::optional<MomentEstimate> qm_ext, sed_ext;
};

double analytic_or_nan(Theory t, double tau, const ScenarioConfig& c) {
  try {
    return t == Theory::QM ? qm_moment_M(tau, c.params, c.angles) : sed_moment_M(tau, c.params, c.angles);
  } catch (const UnequalDamping&) {
    return std::nan("");
  }
}

double external_analytic_or_nan(Theory t, const ScenarioConfig& c) {
  try {
    return t == Theory::QM ? qm_external(c.tau_f, c.params, c.homodyne) : sed_external(c.tau_f, c.params, c.homodyne);
  } catch (const UnequalDamping&) {
    return std::nan("");
  }
}

template <class State, class Model>
void dump_paths(const Model& model, const ScenarioConfig& c, Theory t, Artifacts& art) {
  const TimeGrid grid = c.grid();
  std::vector<Trajectory<State>> paths;
  for (std::size_t p = 0; p < c.dump_paths; ++p)
    paths.push_back(integrate_path(model, grid, c.integrator, path_seed(*c.seed, p)));
  const std::string file = c.name + "_" + lower(to_string(t)) + "_paths.bin";
  auto os = art.open(file);
  write_trajectory_dump<State>(os, paths);
  const std::string sec = "dump_" + lower(to_string(t));
  art.manifest().set(sec, "file", file);
  art.manifest().set(sec, "paths", std::to_string(c.dump_paths));
  art.manifest().set(sec, "nodes", std::to_string(grid.node_count()));
  art.manifest().set(sec, "components", std::to_string(State{}.size()));
  art.manifest().set(sec, "layout", "little-endian f64 (re, im); path-major, then node, then component");
}

SimulationOutput simulate(const ScenarioConfig& c, Artifacts& art, std::ostream& log) {
  SimulationOutput out;
  const EnsembleSpec spec = c.ensemble();
  for (Theory t : theories(c)) {
    if (wants_intracavity(c)) {
      const TimeGrid grid = c.grid();
      const auto nodes = observation_nodes(c, grid);
      log << to_string(t) << " intracavity: " << spec.n_paths << " paths, " << grid.steps() << " steps\n";
      auto r = run_intracavity_experiment(t, c.params, c.angles, grid, spec, nodes);
      for (const auto& w : r.validation.warnings) art.warn(w);
      (t == Theory::QM ? out.qm : out.sed) = std::move(r);
      if (c.dump_paths > 0) {
        if (t == Theory::QM) dump_paths<PositivePState>(PositivePModel(c.params), c, t, art);
        else dump_paths<SedState>(SedModel(c.params), c, t, art);
      }
    }
    if (wants_external(c)) {
      log << to_string(t) << " external: " << spec.n_paths << " paths, tau_f = " << format_double(c.tau_f) << '\n';
      (t == Theory::QM ? out.qm_ext : out.sed_ext) =
          run_external_experiment(t, c.params, c.homodyne, c.angles, c.tau_f, c.dt, spec);
    }
  }
  return out;
}

// Row of the .dat file for one node: tau, then per theory (mean, se, analytic).
void write_intracavity_dat_block(std::ostream& os, const ScenarioConfig& c, const SimulationOutput& s) {
  const EnsembleResult& ref = s.qm ? *s.qm : *s.sed;
  for (std::size_t i = 0; i < ref.taus.size(); ++i) {
    const double tau = ref.taus[i];
    os << num(tau);
    for (Theory t : {Theory::QM, Theory::SED}) {
      const auto& r = t == Theory::QM ? s.qm : s.sed;
      if (r) os << ' ' << num(r->moments[i].mean.real()) << ' ' << num(r->moments[i].std_error);
      else os << " nan nan";
      os << ' ' << num(analytic_or_nan(t, tau, c));
    }
    os << '\n';
  }
}

void write_external_dat_row(std::ostream& os, double key, const ScenarioConfig& c, const SimulationOutput& s) {
  os << num(key);
  for (Theory t : {Theory::QM, Theory::SED}) {
    const auto& m = t == Theory::QM ? s.qm_ext : s.sed_ext;
    if (m) os << ' ' << num(m->mean.real()) << ' ' << num(m->std_error);
    else os << " nan nan";
    os << ' ' << num(external_analytic_or_nan(t, c));
  }
  os << '\n';
}

EnsembleCsvRow external_row(Theory t, const MomentEstimate& m, const ScenarioConfig& c) {
  return {c.tau_f, m.mean.real(), m.mean.imag(), m.std_error, m.n_paths, t, c.params.g, c.params.photon_number(),
          c.params.gamma1, c.seed.value_or(0)};
}

constexpr const char* dat_columns =
    "# tau qm_mean qm_se qm_analytic sed_mean sed_se sed_analytic";

void write_plot_script(Artifacts& art, const ScenarioConfig& c, const std::vector<std::string>& plots) {
  auto os = art.open(c.name + ".gp");
  os << "# gnuplot script generated by qsed for scenario " << c.name << "\n";
  os << "set terminal pngcairo size 900,600\n";
  for (const auto& p : plots) os << p;
}

std::string intracavity_plot(const std::string& dat, const std::string& png, const std::string& index = {}) {
  std::ostringstream os;
  os << "set output '" << png << "'\n"
     << "set xlabel 'tau'\nset ylabel 'third-order moment'\nset key outside\n"
     << "plot '" << dat << "'" << index << " using 1:2:3 with yerrorbars title 'QM numeric', \\\n"
     << "     ''" << index << " using 1:4 with lines title 'QM analytic', \\\n"
     << "     ''" << index << " using 1:5:6 with yerrorbars title 'SED numeric', \\\n"
     << "     ''" << index << " using 1:7 with lines title 'SED analytic'\n";
  return os.str();
}

void report_compare(const CompareReport& r, std::ostream& log, const std::string& prefix) {
  for (const auto& v : r.verdicts) log << prefix << v << '\n';
}

void log_estimates(std::ostream& log, const SimulationOutput& s, const ScenarioConfig& c) {
  for (Theory t : {Theory::QM, Theory::SED}) {
    const auto& r = t == Theory::QM ? s.qm : s.sed;
    if (r && !r->taus.empty()) {
      const auto& m = r->moments.back();
      const double a = analytic_or_nan(t, r->taus.back(), c);
      log << "  " << to_string(t) << " at tau=" << sig(r->taus.back()) << ": " << sig(m.mean.real()) << " +/- "
          << sig(m.std_error) << " (leading-order analytic " << sig(a) << ")\n";
    }
    const auto& e = t == Theory::QM ? s.qm_ext : s.sed_ext;
    if (e) {
      log << "  " << to_string(t) << " external at tau_f=" << sig(c.tau_f) << ": " << sig(e->mean.real())
          << " +/- " << sig(e->std_error) << " (analytic " << sig(external_analytic_or_nan(t, c)) << ")\n";
    }
  }
}

int run_simulate(const ScenarioConfig& c, Artifacts& art, std::ostream& log) {
  const SimulationOutput s = simulate(c, art, log);
  std::vector<std::string> plots;
  if (s.qm || s.sed) {
    for (const auto& r : {s.qm, s.sed}) {
      if (!r) continue;
      auto os = art.open(c.name + "_" + lower(to_string(r->theory)) + ".csv");
      write_ensemble_csv(os, *r);
    }
    const std::string dat = c.name + "_intracavity.dat";
    {
      auto os = art.open(dat);
      os << dat_columns << '\n';
      write_intracavity_dat_block(os, c, s);
    }
    plots.push_back(intracavity_plot(dat, c.name + "_intracavity.png"));
    if (s.qm && s.sed) {
      const auto report = compare(*s.qm, *s.sed);
      auto os = art.open(c.name + "_compare.csv");
      write_compare_csv(os, report);
      report_compare(report, log, "verdict: ");
    }
  }
  if (s.qm_ext || s.sed_ext) {
    std::vector<EnsembleCsvRow> rows;
    if (s.qm_ext) rows.push_back(external_row(Theory::QM, *s.qm_ext, c));
    if (s.sed_ext) rows.push_back(external_row(Theory::SED, *s.sed_ext, c));
    {
      auto os = art.open(c.name + "_external.csv");
      write_ensemble_rows(os, rows);
    }
    auto os = art.open(c.name + "_external.dat");
    os << "# tau_f qm_mean qm_se qm_analytic sed_mean sed_se sed_analytic\n";
    write_external_dat_row(os, c.tau_f, c, s);
  }
  log_estimates(log, s, c);
  if (!plots.empty()) write_plot_script(art, c, plots);
  return exit_code::ok;
}

// ---- analytic curves

struct AnalyticRow {
  double tau, qm, sed;
};

std::vector<AnalyticRow> analytic_rows(const ScenarioConfig& c) {
  std::vector<AnalyticRow> rows;
  for (double tau : analytic_taus(c))
    rows.push_back({tau, qm_moment_M(tau, c.params, c.angles), sed_moment_M(tau, c.params, c.angles)});
  return rows;
}

constexpr const char* analytic_csv_header = "tau,qm_M,sed_M,difference,g,N,gamma";

void write_analytic_row(std::ostream& os, const AnalyticRow& r, const ScenarioConfig& c) {
  os << format_double(r.tau) << ',' << format_double(r.qm) << ',' << format_double(r.sed) << ','
     << format_double(r.qm - r.sed) << ',' << format_double(c.params.g) << ','
     << format_double(c.params.photon_number()) << ',' << format_double(c.params.gamma1) << '\n';
}

int run_analytic(const ScenarioConfig& c, Artifacts& art, std::ostream& log) {
  const auto rows = analytic_rows(c);
  {
    auto os = art.open(c.name + ".csv");
    os << analytic_csv_header << '\n';
    for (const auto& r : rows) write_analytic_row(os, r, c);
  }
  {
    auto os = art.open(c.name + ".dat");
    os << "# tau qm_M sed_M\n";
    for (const auto& r : rows) os << num(r.tau) << ' ' << num(r.qm) << ' ' << num(r.sed) << '\n';
  }
  std::ostringstream plot;
  plot << "set output '" << c.name << ".png'\nset xlabel 'tau'\nset ylabel 'third-order moment'\n"
       << "plot '" << c.name << ".dat' using 1:2 with lines title 'QM', '' using 1:3 with lines dashtype 2 title 'SED'\n";
  write_plot_script(art, c, {plot.str()});
  log << "analytic curves: " << rows.size() << " points, g=" << num(c.params.g)
      << ", N=" << num(c.params.photon_number()) << ", gamma=" << num(c.params.gamma1) << '\n';
  return exit_code::ok;
}

// ---- tables

double rel_diff(double x, double ref) { return (x - ref) / ref; }

std::string pct(double r) {
  std::ostringstream os;
  os << std::showpos << std::fixed << std::setprecision(2) << 100.0 * r << '%';
  return os.str();
}

int run_table1(const ScenarioConfig& c, Artifacts& art, std::ostream& log) {
  const auto& table = builtin_crystal_table();
  auto os = art.open(c.name + ".csv");
  os << "crystal,G,G_reference,G_rel_diff,Gamma,Gamma_reference,Gamma_rel_diff,g,g_reference,g_rel_diff,"
        "within_5pct\n";
  bool all_ok = true;
  for (const auto& preset : table.crystals) {
    const Coupling k = crystal_to_coupling(preset.spec);
    const auto& ref = preset.reference;
    const double dG = rel_diff(k.G, ref.G), dGam = rel_diff(k.Gamma, ref.Gamma), dg = rel_diff(k.g, ref.g);
    const bool ok = std::abs(dG) <= 0.05 && std::abs(dGam) <= 0.05 && std::abs(dg) <= 0.05;
    all_ok = all_ok && ok;
    os << preset.spec.name << ',' << format_double(k.G) << ',' << format_double(ref.G) << ',' << format_double(dG)
       << ',' << format_double(k.Gamma) << ',' << format_double(ref.Gamma) << ',' << format_double(dGam) << ','
       << format_double(k.g) << ',' << format_double(ref.g) << ',' << format_double(dg) << ','
       << (ok ? "true" : "false") << '\n';
    log << preset.spec.name << ": G = " << sig(k.G) << " (" << pct(dG) << "), Gamma = " << sig(k.Gamma) << " ("
        << pct(dGam) << "), g = " << sig(k.g) << " (" << pct(dg) << ") " << (ok ? "within 5%" : "OUTSIDE 5%")
        << '\n';
  }
  log << "verdict: table 1 " << (all_ok ? "reproduced" : "not reproduced") << " within 5%\n";
  return exit_code::ok;
}

int run_table2(const ScenarioConfig& c, Artifacts& art, std::ostream& log) {
  const auto& table = builtin_crystal_table();
  auto os = art.open(c.name + ".csv");
  os << "crystal,g,Gamma,tau_f,qm_external,qm_reference,qm_rel_diff,sed_external,sed_reference,sed_rel_diff,"
        "within_3pct\n";
  bool all_ok = true;
  for (const auto& preset : table.crystals) {
    const SystemParams p = external_params(preset, table.external);
    const HomodyneParams h = external_homodyne(table.external);
    const double tf = table.external.tau_f;
    const double qm = qm_external(tf, p, h), sed = sed_external(tf, p, h);
    const double dq = rel_diff(qm, preset.reference_qm_external);
    const double ds = rel_diff(sed, preset.reference_sed_external);
    const bool ok = std::abs(dq) <= 0.03 && std::abs(ds) <= 0.03;
    all_ok = all_ok && ok;
    os << preset.spec.name << ',' << format_double(p.g) << ',' << format_double(p.Gamma) << ','
       << format_double(tf) << ',' << format_double(qm) << ',' << format_double(preset.reference_qm_external)
       << ',' << format_double(dq) << ',' << format_double(sed) << ','
       << format_double(preset.reference_sed_external) << ',' << format_double(ds) << ','
       << (ok ? "true" : "false") << '\n';
    log << preset.spec.name << ": QM = " << sig(qm) << " (" << pct(dq) << "), SED = " << sig(sed) << " (" << pct(ds)
        << ") " << (ok ? "within 3%" : "OUTSIDE 3%") << '\n';
  }
  log << "verdict: table 2 " << (all_ok ? "reproduced" : "not reproduced") << " within 3%\n";
  return exit_code::ok;
}

// ---- signal to noise

int run_snr(const ScenarioConfig& c, const std::vector<double>& ns, Artifacts& art, std::ostream& log) {
  const auto& table = builtin_crystal_table();
  const auto& ext = table.external;
  {
    auto os = art.open(c.name + ".csv");
    os << "crystal,n,S,g,eta,tau_f\n";
    for (const auto& preset : table.crystals) {
      for (double n : ns)
        os << preset.spec.name << ',' << format_double(n) << ','
           << format_double(signal_to_noise(n, ext.eta, preset.reference.g, ext.tau_f)) << ','
           << format_double(preset.reference.g) << ',' << format_double(ext.eta) << ',' << format_double(ext.tau_f)
           << '\n';
    }
  }
  {
    auto os = art.open(c.name + ".dat");
    os << "# n";
    for (const auto& preset : table.crystals) os << " S_" << preset.spec.name;
    os << '\n';
    for (double n : ns) {
      os << num(n);
      for (const auto& preset : table.crystals)
        os << ' ' << num(signal_to_noise(n, ext.eta, preset.reference.g, ext.tau_f));
      os << '\n';
    }
  }
  auto os = art.open(c.name + "_crossing.csv");
  os << "crystal,n_grid_crossing,n_closed_form,n_reference,rel_diff,within_5pct\n";
  for (const auto& preset : table.crystals) {
    const double g = preset.reference.g;
    // Log-log interpolation between the bracketing grid points.
    double n_grid = std::nan("");
    for (std::size_t i = 1; i < ns.size(); ++i) {
      const double s0 = signal_to_noise(ns[i - 1], ext.eta, g, ext.tau_f);
      const double s1 = signal_to_noise(ns[i], ext.eta, g, ext.tau_f);
      if (s0 < 1.0 && s1 >= 1.0) {
        const double f = -std::log(s0) / (std::log(s1) - std::log(s0));
        n_grid = std::exp(std::log(ns[i - 1]) + f * (std::log(ns[i]) - std::log(ns[i - 1])));
        break;
      }
    }
    const double n_exact = samples_for_snr(1.0, ext.eta, g, ext.tau_f);
    const double d = rel_diff(n_exact, preset.reference_sample_size);
    const bool ok = std::abs(d) <= 0.05;
    os << preset.spec.name << ',' << num(n_grid) << ',' << format_double(n_exact) << ','
       << format_double(preset.reference_sample_size) << ',' << format_double(d) << ','
       << (ok ? "true" : "false") << '\n';
    log << preset.spec.name << ": S crosses 1 at n = " << sig(n_grid) << " on the grid, " << sig(n_exact)
        << " exactly (published " << sig(preset.reference_sample_size) << ", " << pct(d) << ")\n";
  }
  std::ostringstream plot;
  plot << "set output '" << c.name << ".png'\nset logscale x\nset xlabel 'sample size n'\nset ylabel 'S'\n"
       << "plot '" << c.name << ".dat' using 1:2 with lines title columnhead(2), '' using 1:3 with lines title "
       << "columnhead(3), 1 dashtype 2 title 'S = 1'\n";
  write_plot_script(art, c, {plot.str()});
  return exit_code::ok;
}

std::vector<double> snr_grid(const ScenarioConfig& c) {
  std::vector<double> ns;
  const double l0 = std::log10(c.snr_n_min), l1 = std::log10(c.snr_n_max);
  for (std::size_t i = 0; i < c.snr_points; ++i)
    ns.push_back(std::pow(10.0, l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(c.snr_points - 1)));
  return ns;
}

// ---- error handling shared by run and sweep

template <class Fn>
int guarded(const ScenarioConfig& c, const std::string& subcommand, std::ostream& log, std::ostream& err, Fn&& fn) {
  try {
    validate(c);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_code::config;
  }
  Artifacts art(c, subcommand);
  art.record_config(c);
  int code = exit_code::ok;
  try {
    code = fn(art);
  } catch (const NonFinite& e) {
    err << "integration failed: " << e.what() << '\n';
    auto& m = art.manifest();
    m.set("failure", "type", "NonFinite");
    m.set("failure", "message", e.what());
    if (e.step() != NonFinite::unknown_step) m.set("failure", "step", std::to_string(e.step()));
    if (e.path()) m.set("failure", "path", std::to_string(*e.path()));
    if (e.path_seed()) m.set("failure", "path_seed", std::to_string(*e.path_seed()));
    code = exit_code::non_finite;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    code = exit_code::config;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    art.manifest().set("failure", "message", e.what());
    code = exit_code::failure;
  }
  art.finish(code, log);
  return code;
}

void apply_axis(ScenarioConfig& c, SweepAxis axis, double v) {
  switch (axis) {
    case SweepAxis::g: c.params.g = v; break;
    case SweepAxis::gamma: c.params.gamma1 = c.params.gamma2 = c.params.gamma3 = v; break;
    case SweepAxis::N:
      if (v < 0.0) throw ConfigError("photon number must be >= 0", 0, "[sweep] values");
      c.params.epsilon = cplx(std::sqrt(v), 0.0);
      break;
    case SweepAxis::tau_f: c.tau_f = v; break;
    case SweepAxis::n_paths:
      if (v < 1.0 || v != std::floor(v)) throw ConfigError("path counts must be positive integers", 0, "[sweep] values");
      c.n_paths = static_cast<std::size_t>(v);
      break;
  }
}

int sweep_simulate(const ScenarioConfig& base, const SweepSpec& s, Artifacts& art, std::ostream& log) {
  const std::string axis(to_string(s.axis));
  const std::string stem = base.name + "_sweep_" + axis;
  std::ostringstream intra_csv, ext_csv, cmp_csv, intra_dat, ext_dat;
  bool any_intra = false, any_ext = false, any_cmp = false;
  std::size_t blocks = 0;
  for (double v : s.values) {
    ScenarioConfig c = base;
    apply_axis(c, s.axis, v);
    log << axis << " = " << format_double(v) << '\n';
    const SimulationOutput out = simulate(c, art, log);
    const std::string key = axis + ',' + format_double(v) + ',';
    for (const auto& r : {out.qm, out.sed}) {
      if (!r) continue;
      any_intra = true;
      for (const auto& row : to_rows(*r)) intra_csv << key << format_row(row) << '\n';
    }
    if (out.qm || out.sed) {
      if (blocks++ > 0) intra_dat << "\n\n";
      intra_dat << "# " << axis << " = " << format_double(v) << '\n';
      write_intracavity_dat_block(intra_dat, c, out);
    }
    if (out.qm && out.sed) {
      any_cmp = true;
      const auto report = compare(*out.qm, *out.sed);
      std::ostringstream tmp;
      write_compare_csv(tmp, report);
      std::string line;
      std::istringstream in(tmp.str());
      std::getline(in, line);  // header
      while (std::getline(in, line)) cmp_csv << key << line << '\n';
      report_compare(report, log, "  verdict: ");
    }
    for (Theory t : {Theory::QM, Theory::SED}) {
      const auto& m = t == Theory::QM ? out.qm_ext : out.sed_ext;
      if (!m) continue;
      any_ext = true;
      ext_csv << key << format_row(external_row(t, *m, c)) << '\n';
    }
    if (out.qm_ext || out.sed_ext) write_external_dat_row(ext_dat, v, c, out);
    log_estimates(log, out, c);
  }
  std::vector<std::string> plots;
  if (any_intra) {
    {
      auto os = art.open(stem + ".csv");
      os << "axis,value," << ensemble_csv_header << '\n' << intra_csv.str();
    }
    auto os = art.open(stem + ".dat");
    os << dat_columns << "; one block per " << axis << " value\n" << intra_dat.str();
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      plots.push_back(intracavity_plot(stem + ".dat", stem + "_" + std::to_string(i + 1) + ".png",
                                       " index " + std::to_string(i)));
    }
  }
  if (any_cmp) {
    auto os = art.open(stem + "_compare.csv");
    os << "axis,value,tau,a,b,difference,combined_se,z,signs_differ,theory_a,theory_b\n" << cmp_csv.str();
  }
  if (any_ext) {
    {
      auto os = art.open(stem + "_external.csv");
      os << "axis,value," << ensemble_csv_header << '\n' << ext_csv.str();
    }
    auto os = art.open(stem + "_external.dat");
    os << "# " << axis << " qm_mean qm_se qm_analytic sed_mean sed_se sed_analytic\n" << ext_dat.str();
    std::ostringstream p;
    p << "set output '" << stem << "_external.png'\nset xlabel '" << axis << "'\nset ylabel 'external moment'\n"
      << "plot '" << stem << "_external.dat' using 1:2:3 with yerrorbars title 'QM numeric', '' using 1:4 with "
      << "lines title 'QM analytic', '' using 1:5:6 with yerrorbars title 'SED numeric', '' using 1:7 with lines "
      << "title 'SED analytic'\n";
    plots.push_back(p.str());
  }
  if (!plots.empty()) write_plot_script(art, base, plots);
  return exit_code::ok;
}

int sweep_analytic(const ScenarioConfig& base, const SweepSpec& s, Artifacts& art, std::ostream& log) {
  const std::string axis(to_string(s.axis));
  const std::string stem = base.name + "_sweep_" + axis;
  std::vector<std::vector<AnalyticRow>> table;  // [value][tau]
  {
    auto os = art.open(stem + ".csv");
    os << "axis,value," << analytic_csv_header << '\n';
    for (double v : s.values) {
      ScenarioConfig c = base;
      apply_axis(c, s.axis, v);
      c.params.common_gamma();
      table.push_back(analytic_rows(c));
      for (const auto& r : table.back()) {
        os << axis << ',' << format_double(v) << ',';
        write_analytic_row(os, r, c);
      }
    }
  }
  const auto taus = analytic_taus(base);
  auto os = art.open(stem + ".dat");
  os << "# " << axis << " qm_M sed_M abs_difference; one block per tau\n";
  std::ostringstream plot;
  plot << "set xlabel '" << axis << "'\nset ylabel 'third-order moment'\n";
  for (std::size_t j = 0; j < taus.size(); ++j) {
    if (j > 0) os << "\n\n";
    os << "# tau = " << format_double(taus[j]) << '\n';
    bool decreasing = true;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const auto& r = table[i][j];
      const double d = std::abs(r.qm - r.sed);
      os << num(s.values[i]) << ' ' << num(r.qm) << ' ' << num(r.sed) << ' ' << num(d) << '\n';
      if (i > 0 && !(d < std::abs(table[i - 1][j].qm - table[i - 1][j].sed))) decreasing = false;
    }
    log << "verdict: |QM - SED| at tau=" << format_double(taus[j]) << (decreasing ? " decreases" : " does not decrease")
        << " monotonically in " << axis << " over the sweep\n";
    plot << "set output '" << stem << "_" << j + 1 << ".png'\n"
         << "plot '" << stem << ".dat' index " << j << " using 1:2 with lines title 'QM (tau = "
         << format_double(taus[j]) << ")', '' index " << j << " using 1:3 with lines dashtype 2 title 'SED'\n";
  }
  write_plot_script(art, base, {plot.str()});
  return exit_code::ok;
}

}  // namespace

int run(const ScenarioConfig& c, std::ostream& log, std::ostream& err) {
  return guarded(c, "run", log, err, [&](Artifacts& art) {
    switch (c.kind) {
      case ScenarioKind::Simulate: return run_simulate(c, art, log);
      case ScenarioKind::Analytic: return run_analytic(c, art, log);
      case ScenarioKind::Table1: return run_table1(c, art, log);
      case ScenarioKind::Table2: return run_table2(c, art, log);
      case ScenarioKind::Snr: return run_snr(c, snr_grid(c), art, log);
    }
    return exit_code::failure;
  });
}

int sweep(const ScenarioConfig& base, const SweepSpec& s, std::ostream& log, std::ostream& err) {
  ScenarioConfig c = base;
  c.sweep = s;
  if (s.values.empty()) {
    err << "config error: sweep over '" << to_string(s.axis) << "' has an empty values list\n";
    return exit_code::config;
  }
  // Validate every point up front so a bad value fails before any work.
  try {
    for (double v : s.values) {
      if (c.kind == ScenarioKind::Snr) {
        if (!(v >= 2.0) || !std::isfinite(v)) throw ConfigError("sample sizes must be >= 2", 0, "[sweep] values");
        continue;
      }
      ScenarioConfig point = c;
      apply_axis(point, s.axis, v);
      point.sweep.reset();
      validate(point);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_code::config;
  }
  return guarded(c, "sweep", log, err, [&](Artifacts& art) {
    art.manifest().set("sweep", "axis", std::string(to_string(s.axis)));
    std::string vals;
    for (double v : s.values) vals += (vals.empty() ? "" : ", ") + format_double(v);
    art.manifest().set("sweep", "values", vals);
    switch (c.kind) {
      case ScenarioKind::Simulate: return sweep_simulate(c, s, art, log);
      case ScenarioKind::Analytic: return sweep_analytic(c, s, art, log);
      case ScenarioKind::Snr: return run_snr(c, s.values, art, log);
      default: throw ConfigError("this scenario kind cannot be swept");
    }
  });
}

int run_preset(std::string_view name, const Overrides& o, std::ostream& log, std::ostream& err) {
  ScenarioConfig c;
  try {
    c = parse_scenario(preset_text(name));
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_code::config;
  }
  apply(o, c);
  if (c.sweep) return sweep(c, *c.sweep, log, err);
  return run(c, log, err);
}

}  // namespace qsed
