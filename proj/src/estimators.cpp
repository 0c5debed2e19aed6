#include "qsed/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

namespace qsed {

namespace {

struct BatchSpread {
  double se_re = 0.0;
  double se_im = 0.0;
};

BatchSpread batch_spread(std::span<const cplx> batch_means) {
  const std::size_t nb = batch_means.size();
  cplx avg{};
  for (const auto& m : batch_means) avg += m;
  avg /= static_cast<double>(nb);
  double vr = 0.0;
  double vi = 0.0;
  for (const auto& m : batch_means) {
    const cplx d = m - avg;
    vr += d.real() * d.real();
    vi += d.imag() * d.imag();
  }
  const double denom = static_cast<double>(nb - 1) * static_cast<double>(nb);
  return {std::sqrt(vr / denom), std::sqrt(vi / denom)};
}

double ratio_or_zero(double num, double den) {
  if (den > 0.0) return num / den;
  return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

void check_batches(std::size_t n_paths, std::size_t n_batches) {
  if (n_batches < 2) throw DegenerateEnsemble("at least 2 batches are required");
  if (n_paths < n_batches) throw DegenerateEnsemble("fewer paths than batches leaves empty batches");
  if (n_paths % n_batches != 0) throw InvalidParam("n_paths must be divisible by n_batches");
  if (n_paths / n_batches < 2) throw DegenerateEnsemble("each batch needs at least 2 paths");
}

}  // namespace

double MomentEstimate::imag_diagnostic() const {
  // With real epsilon every positive-P path can stay exactly real, leaving
  // only round-off in Im(mean) and a zero spread; that is not a signal.
  const double im = std::abs(mean.imag());
  if (im <= roundoff_floor * std::max(std::abs(mean.real()), std_error)) return 0.0;
  return ratio_or_zero(im, std_error_imag);
}

double MomentEstimate::significance() const { return ratio_or_zero(std::abs(mean.real()), std_error); }

MomentEstimate paired_difference(const MomentEstimate& a, const MomentEstimate& b) {
  if (a.batch_means.size() != b.batch_means.size() || a.batch_means.size() < 2)
    throw DegenerateEnsemble("paired difference needs matching batch structure");
  MomentEstimate d;
  d.mean = a.mean - b.mean;
  d.n_paths = a.n_paths;
  d.n_batches = a.n_batches;
  d.batch_means.resize(a.batch_means.size());
  for (std::size_t i = 0; i < d.batch_means.size(); ++i) d.batch_means[i] = a.batch_means[i] - b.batch_means[i];
  const auto spread = batch_spread(d.batch_means);
  d.std_error = spread.se_re;
  d.std_error_imag = spread.se_im;
  return d;
}

MomentEstimate scaled(MomentEstimate m, double factor) {
  m.mean *= factor;
  m.std_error *= std::abs(factor);
  m.std_error_imag *= std::abs(factor);
  for (auto& b : m.batch_means) b *= factor;
  return m;
}

MomentEstimate triple_central_moment(std::span<const Triple> values, std::size_t n_batches) {
  const std::size_t n = values.size();
  check_batches(n, n_batches);
  const double inv_n = 1.0 / static_cast<double>(n);

  Triple m{};
  for (const auto& v : values)
    for (int i = 0; i < 3; ++i) m[i] += v[i];
  for (auto& x : m) x *= inv_n;

  const std::size_t per_batch = n / n_batches;
  MomentEstimate est;
  est.n_paths = n;
  est.n_batches = n_batches;
  est.batch_means.assign(n_batches, cplx{});
  cplx total{};
  for (std::size_t p = 0; p < n; ++p) {
    const auto& v = values[p];
    const cplx prod = (v[0] - m[0]) * (v[1] - m[1]) * (v[2] - m[2]);
    total += prod;
    est.batch_means[p / per_batch] += prod;
  }
  est.mean = total * inv_n;
  for (auto& b : est.batch_means) b /= static_cast<double>(per_batch);
  const auto spread = batch_spread(est.batch_means);
  est.std_error = spread.se_re;
  est.std_error_imag = spread.se_im;
  return est;
}

// ---------------------------------------------------------------------------

namespace {

void check_mode(int mode) {
  if (mode < 1 || mode > 3) throw InvalidParam("mode must be 1, 2 or 3");
}

}  // namespace

cplx quadrature(const PositivePState& x, int mode, double theta) {
  check_mode(mode);
  const std::size_t i = 2 * static_cast<std::size_t>(mode - 1);
  const cplx ph = std::polar(1.0, theta);
  return 0.5 * (x[i] * std::conj(ph) + x[i + 1] * ph);
}

cplx quadrature(const SedState& x, int mode, double theta) {
  check_mode(mode);
  const cplx b = x[static_cast<std::size_t>(mode - 1)];
  const cplx ph = std::polar(1.0, theta);
  // b e^{-i theta} + conj(b e^{-i theta}) is exactly real
  return cplx(std::real(b * std::conj(ph)), 0.0);
}

cplx quadrature(const PhasePoint& x, int mode, double theta) {
  return std::visit([&](const auto& pt) { return quadrature(pt.x, mode, theta); }, x);
}

cplx trapezoid(std::span<const cplx> samples, double dt) {
  if (samples.size() < 2) return cplx{};
  cplx acc = 0.5 * (samples.front() + samples.back());
  for (std::size_t k = 1; k + 1 < samples.size(); ++k) acc += samples[k];
  return acc * dt;
}

// ---------------------------------------------------------------------------

void validate(const EnsembleSpec& spec) {
  check_batches(spec.n_paths, spec.n_batches);
}

void run_batches(std::size_t n_batches, unsigned threads, const std::function<void(std::size_t)>& fn) {
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n_batches));

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::size_t failed_batch = std::numeric_limits<std::size_t>::max();
  std::exception_ptr failure;

  auto work = [&] {
    while (!failed.load(std::memory_order_acquire)) {
      const std::size_t b = next.fetch_add(1);
      if (b >= n_batches) return;
      try {
        fn(b);
      } catch (...) {
        std::lock_guard lock(mu);
        if (b < failed_batch) {
          failed_batch = b;
          failure = std::current_exception();
        }
        failed.store(true, std::memory_order_release);
      }
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

TripleStats finalize_triple_stats(const Triple& shift, std::span<const ShiftedTripleSums> batches) {
  const std::size_t nb = batches.size();
  std::size_t n = 0;
  std::array<cplx, 3> sum{};
  for (const auto& b : batches) {
    n += b.count;
    for (int i = 0; i < 3; ++i) sum[i] += b.s[i];
  }
  if (nb < 2 || n == 0) throw DegenerateEnsemble("no samples accumulated");
  const double inv_n = 1.0 / static_cast<double>(n);
  const cplx d1 = sum[0] * inv_n;
  const cplx d2 = sum[1] * inv_n;
  const cplx d3 = sum[2] * inv_n;

  TripleStats out;
  out.central.n_paths = n;
  out.central.n_batches = nb;
  out.central.batch_means.resize(nb);
  for (int i = 0; i < 3; ++i) {
    out.mean[i].n_paths = n;
    out.mean[i].n_batches = nb;
    out.mean[i].batch_means.resize(nb);
  }

  cplx total{};
  for (std::size_t k = 0; k < nb; ++k) {
    const auto& b = batches[k];
    if (b.count == 0) throw DegenerateEnsemble("empty batch");
    const double cnt = static_cast<double>(b.count);
    // sum over the batch of (u1 - d1)(u2 - d2)(u3 - d3)
    const cplx central = b.s123 - d3 * b.s2[0] - d2 * b.s2[1] - d1 * b.s2[2] + d2 * d3 * b.s[0] +
                         d1 * d3 * b.s[1] + d1 * d2 * b.s[2] - cnt * d1 * d2 * d3;
    total += central;
    out.central.batch_means[k] = central / cnt;
    for (int i = 0; i < 3; ++i) out.mean[i].batch_means[k] = shift[i] + b.s[i] / cnt;
  }
  out.central.mean = total * inv_n;
  auto spread = batch_spread(out.central.batch_means);
  out.central.std_error = spread.se_re;
  out.central.std_error_imag = spread.se_im;

  const std::array<cplx, 3> d{d1, d2, d3};
  for (int i = 0; i < 3; ++i) {
    out.mean[i].mean = shift[i] + d[i];
    spread = batch_spread(out.mean[i].batch_means);
    out.mean[i].std_error = spread.se_re;
    out.mean[i].std_error_imag = spread.se_im;
  }
  return out;
}

std::vector<std::size_t> sample_nodes(const TimeGrid& grid, double spacing) {
  std::vector<std::size_t> nodes;
  if (spacing <= 0.0) {
    nodes.resize(grid.node_count());
    for (std::size_t k = 0; k < nodes.size(); ++k) nodes[k] = k;
    return nodes;
  }
  const double stride_f = spacing / grid.dt();
  const auto stride = static_cast<std::size_t>(std::max(1.0, std::round(stride_f)));
  for (std::size_t k = 0; k < grid.node_count(); k += stride) nodes.push_back(k);
  if (nodes.back() != grid.steps()) nodes.push_back(grid.steps());
  return nodes;
}

EnsembleResult run_intracavity_experiment(Theory theory, const SystemParams& p, const PhaseAngles& angles,
                                          const TimeGrid& grid, const EnsembleSpec& spec,
                                          std::span<const std::size_t> nodes) {
  EnsembleResult result{grid, {}, {}, {}, theory, p, angles, spec.seed, validate_params(p, grid), false};
  result.dominant_term_degenerate = theory == Theory::QM && qm_dominant_term_degenerate(angles);
  result.nodes = nodes.empty() ? sample_nodes(grid, 0.0) : std::vector<std::size_t>(nodes.begin(), nodes.end());
  for (auto k : result.nodes) result.taus.push_back(grid.time(k));

  const auto& th = angles.theta;
  std::vector<std::vector<TripleStats>> stats;
  if (theory == Theory::QM) {
    stats = ensemble_triple_stats<PositivePModel>(
        PositivePModel(p), grid, result.nodes, spec, 1, [&](const PositivePState& x, std::span<Triple> out) {
          out[0] = {quadrature(x, 1, th[0]), quadrature(x, 2, th[1]), quadrature(x, 3, th[2])};
        });
  } else {
    stats = ensemble_triple_stats<SedModel>(
        SedModel(p), grid, result.nodes, spec, 1, [&](const SedState& x, std::span<Triple> out) {
          out[0] = {quadrature(x, 1, th[0]), quadrature(x, 2, th[1]), quadrature(x, 3, th[2])};
        });
  }
  result.moments.reserve(result.nodes.size());
  for (auto& s : stats[0]) result.moments.push_back(std::move(s.central));
  return result;
}

double external_scale(const SystemParams& p, const HomodyneParams& h) {
  const double gain = h.gain();
  return 2.0 * std::numbers::sqrt2 * gain * gain * gain * std::pow(p.Gamma, -1.5);
}

namespace {

template <SdeModel M>
std::vector<Triple> integrated_quadratures(const M& model, const TimeGrid& grid,
                                           const std::array<double, 3>& theta_bar,
                                           const EnsembleSpec& spec) {
  std::vector<Triple> k(spec.n_paths);
  const std::size_t batch_size = spec.n_paths / spec.n_batches;
  run_batches(spec.n_batches, spec.threads, [&](std::size_t b) {
    std::array<std::vector<cplx>, 3> samples;
    for (auto& s : samples) s.resize(grid.node_count());
    for (std::size_t path = b * batch_size; path < (b + 1) * batch_size; ++path) {
      const std::uint64_t seed = path_seed(spec.seed, path);
      try {
        integrate_path(model, grid, spec.integrator, seed, [&](std::size_t n, const typename M::State& x) {
          for (int m = 0; m < 3; ++m) samples[m][n] = quadrature(x, m + 1, theta_bar[m]);
        });
      } catch (const NonFinite& e) {
        throw NonFinite(e.step(), path, seed);
      }
      for (int m = 0; m < 3; ++m) k[path][m] = trapezoid(samples[m], grid.dt());
    }
  });
  return k;
}

}  // namespace

MomentEstimate run_external_experiment(Theory theory, const SystemParams& p, const HomodyneParams& h,
                                       const PhaseAngles& angles, double tau_f, double dt,
                                       const EnsembleSpec& spec) {
  validate(h);
  validate(spec);
  validate(spec.integrator);
  const TimeGrid grid(0.0, tau_f, dt);
  validate_params(p, grid);
  const auto k = theory == Theory::QM ? integrated_quadratures(PositivePModel(p), grid, angles.theta_bar, spec)
                                      : integrated_quadratures(SedModel(p), grid, angles.theta_bar, spec);
  return scaled(triple_central_moment(k, spec.n_batches), external_scale(p, h));
}

}  // namespace qsed
