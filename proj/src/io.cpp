#include "qsed/io.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <sstream>

namespace qsed {

std::string format_double(double x) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

std::vector<EnsembleCsvRow> to_rows(const EnsembleResult& r) {
  std::vector<EnsembleCsvRow> rows;
  rows.reserve(r.taus.size());
  for (std::size_t i = 0; i < r.taus.size(); ++i) {
    const auto& m = r.moments[i];
    rows.push_back({r.taus[i], m.mean.real(), m.mean.imag(), m.std_error, m.n_paths, r.theory, r.params.g,
                    r.params.photon_number(), r.params.gamma1, r.seed});
  }
  return rows;
}

std::string format_row(const EnsembleCsvRow& row) {
  std::string s;
  s += format_double(row.tau) + ',';
  s += format_double(row.mean_re) + ',';
  s += format_double(row.mean_im) + ',';
  s += format_double(row.std_error) + ',';
  s += std::to_string(row.n_paths) + ',';
  s += std::string(to_string(row.theory)) + ',';
  s += format_double(row.g) + ',';
  s += format_double(row.N) + ',';
  s += format_double(row.gamma) + ',';
  s += std::to_string(row.seed);
  return s;
}

void write_ensemble_rows(std::ostream& os, std::span<const EnsembleCsvRow> rows, bool header) {
  if (header) os << ensemble_csv_header << '\n';
  for (const auto& row : rows) os << format_row(row) << '\n';
}

void write_ensemble_csv(std::ostream& os, const EnsembleResult& r, bool header) {
  const auto rows = to_rows(r);
  write_ensemble_rows(os, rows, header);
}

namespace {

template <class T>
T parse_field(const std::string& text, std::size_t line, const char* column) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last) {
    std::ostringstream os;
    os << "line " << line << ": column '" << column << "' is not a number: '" << text << "'";
    throw InvalidParam(os.str());
  }
  return value;
}

}  // namespace

std::vector<EnsembleCsvRow> read_ensemble_csv(std::istream& is) {
  std::vector<EnsembleCsvRow> rows;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line)) throw InvalidParam("empty CSV");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != ensemble_csv_header) throw InvalidParam("line 1: unexpected CSV header '" + line + "'");
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) {
      std::ostringstream os;
      os << "line " << lineno << ": expected 10 columns, got " << f.size();
      throw InvalidParam(os.str());
    }
    EnsembleCsvRow r;
    r.tau = parse_field<double>(f[0], lineno, "tau");
    r.mean_re = parse_field<double>(f[1], lineno, "mean_re");
    r.mean_im = parse_field<double>(f[2], lineno, "mean_im");
    r.std_error = parse_field<double>(f[3], lineno, "std_error");
    r.n_paths = parse_field<std::size_t>(f[4], lineno, "n_paths");
    try {
      r.theory = theory_from_string(f[5]);
    } catch (const InvalidParam& e) {
      throw InvalidParam("line " + std::to_string(lineno) + ": " + e.what());
    }
    r.g = parse_field<double>(f[6], lineno, "g");
    r.N = parse_field<double>(f[7], lineno, "N");
    r.gamma = parse_field<double>(f[8], lineno, "gamma");
    r.seed = parse_field<std::uint64_t>(f[9], lineno, "seed");
    rows.push_back(r);
  }
  return rows;
}

namespace detail {

void write_f64_le(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  std::array<char, 8> bytes{};
  for (auto& b : bytes) {
    b = static_cast<char>(bits & 0xffu);
    bits >>= 8;
  }
  os.write(bytes.data(), bytes.size());
}

double read_f64_le(std::istream& is) {
  std::array<unsigned char, 8> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), bytes.size()))
    throw InvalidParam("trajectory dump is truncated");
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | bytes[static_cast<std::size_t>(i)];
  return std::bit_cast<double>(bits);
}

}  // namespace detail

void Manifest::set(const std::string& section, const std::string& key, const std::string& value) {
  Section* sec = nullptr;
  for (auto& s : sections_)
    if (s.name == section) sec = &s;
  if (!sec) {
    sections_.push_back({section, {}});
    sec = &sections_.back();
  }
  for (auto& [k, v] : sec->entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  sec->entries.emplace_back(key, value);
}

void Manifest::set(const std::string& section, const std::string& key, double value) {
  set(section, key, format_double(value));
}

const std::string* Manifest::get(const std::string& section, const std::string& key) const {
  for (const auto& s : sections_) {
    if (s.name != section) continue;
    for (const auto& [k, v] : s.entries)
      if (k == key) return &v;
  }
  return nullptr;
}

void Manifest::write(std::ostream& os) const {
  bool first = true;
  for (const auto& s : sections_) {
    if (!first) os << '\n';
    first = false;
    os << '[' << s.name << "]\n";
    for (const auto& [k, v] : s.entries) os << k << " = " << v << '\n';
  }
}

}  // namespace qsed
