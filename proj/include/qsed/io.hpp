#ifndef QSED_IO_HPP
#define QSED_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <iosfwd>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qsed/estimators.hpp"

namespace qsed {

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double x);

// ---------------------------------------------------------------------------
// Ensemble CSV: tau,mean_re,mean_im,std_error,n_paths,theory,g,N,gamma,seed

inline constexpr const char* ensemble_csv_header = "tau,mean_re,mean_im,std_error,n_paths,theory,g,N,gamma,seed";

struct EnsembleCsvRow {
  double tau = 0.0;
  double mean_re = 0.0;
  double mean_im = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
  Theory theory = Theory::QM;
  double g = 0.0;
  double N = 0.0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
};

std::vector<EnsembleCsvRow> to_rows(const EnsembleResult& r);
void write_ensemble_csv(std::ostream& os, const EnsembleResult& r, bool header = true);
void write_ensemble_rows(std::ostream& os, std::span<const EnsembleCsvRow> rows, bool header = true);
std::string format_row(const EnsembleCsvRow& row);
/// Parses a CSV written by write_ensemble_csv. Throws InvalidParam with the
/// offending line number on malformed input.
std::vector<EnsembleCsvRow> read_ensemble_csv(std::istream& is);

// ---------------------------------------------------------------------------
// Binary trajectory dump: little-endian f64 (re, im) per complex value,
// path-major, then node, then state component. No header.

namespace detail {
void write_f64_le(std::ostream& os, double v);
double read_f64_le(std::istream& is);
}  // namespace detail

template <class State>
void write_trajectory_dump(std::ostream& os, std::span<const Trajectory<State>> paths) {
  for (const auto& traj : paths)
    for (const auto& x : traj.points)
      for (const auto& z : x) {
        detail::write_f64_le(os, z.real());
        detail::write_f64_le(os, z.imag());
      }
}

/// Reads `n_paths` trajectories of `n_nodes` states each.
template <class State>
std::vector<std::vector<State>> read_trajectory_dump(std::istream& is, std::size_t n_paths,
                                                     std::size_t n_nodes) {
  std::vector<std::vector<State>> out(n_paths, std::vector<State>(n_nodes));
  for (auto& path : out)
    for (auto& x : path)
      for (auto& z : x) {
        const double re = detail::read_f64_le(is);
        const double im = detail::read_f64_le(is);
        z = cplx(re, im);
      }
  return out;
}

// ---------------------------------------------------------------------------
// Run manifest: INI-style sections of key = value lines.

class Manifest {
 public:
  void set(const std::string& section, const std::string& key, const std::string& value);
  void set(const std::string& section, const std::string& key, double value);
  void write(std::ostream& os) const;
  const std::string* get(const std::string& section, const std::string& key) const;

 private:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };
  std::vector<Section> sections_;
};

}  // namespace qsed

#endif  // QSED_IO_HPP
