#include "vy/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include <fftw3.h>

#include "vy/error.hpp"
#include "vy/parallel.hpp"

namespace vy {

namespace {

constexpr std::size_t kBlock = 32;  // rows or columns per worker task

struct FftBuffers {
  explicit FftBuffers(std::size_t nx)
      : real(fftw_alloc_real(nx)), spec(fftw_alloc_complex(nx / 2 + 1)) {}
  ~FftBuffers() {
    fftw_free(real);
    fftw_free(spec);
  }
  FftBuffers(const FftBuffers&) = delete;
  FftBuffers& operator=(const FftBuffers&) = delete;
  double* real;
  fftw_complex* spec;
};

double wavenumber(std::size_t m, std::size_t nx, double dx) {
  return 2.0 * M_PI * static_cast<double>(m) / (static_cast<double>(nx) * dx);
}

}  // namespace

PhaseSpaceFunction::PhaseSpaceFunction(double half_width, std::size_t x_nodes, double vmax, std::size_t v_nodes)
    : half_width_(half_width), vmax_(vmax) {
  if (!(half_width > 0.0) || x_nodes < 9 || !(vmax > 0.0) || v_nodes < 8)
    throw DomainError("phase-space grid: bad sizes");
  nx_ = x_nodes - 1;
  nv_ = v_nodes;
  dx_ = 2.0 * half_width / static_cast<double>(nx_);
  dv_ = 2.0 * vmax / static_cast<double>(nv_);
  f_.assign(nx_ * nv_, 0.0);
}

PhaseSpaceFunction PhaseSpaceFunction::sample(const InitialData& data, double half_width, std::size_t x_nodes,
                                              double vmax, std::size_t v_nodes) {
  PhaseSpaceFunction f(half_width, x_nodes, vmax, v_nodes);
  for (std::size_t j = 0; j < f.nv_; ++j)
    for (std::size_t i = 0; i < f.nx_; ++i) f.at(i, j) = data.f0(f.x(i), f.v(j));
  return f;
}

double PhaseSpaceFunction::mass() const {
  double m = 0.0;
  for (double v : f_) m += v;
  return m * dx_ * dv_;
}

double PhaseSpaceFunction::min() const { return *std::min_element(f_.begin(), f_.end()); }

GridFunction PhaseSpaceFunction::density() const {
  std::vector<double> rho(nx_ + 1, 0.0);
  for (std::size_t j = 0; j < nv_; ++j) {
    const double* r = row(j);
    for (std::size_t i = 0; i < nx_; ++i) rho[i] += r[i];
  }
  for (std::size_t i = 0; i < nx_; ++i) rho[i] *= dv_;
  rho[nx_] = rho[0];
  return GridFunction(half_width_, std::move(rho));
}

double PhaseSpaceFunction::boundary_fraction(double band) const {
  const std::size_t edge = std::max<std::size_t>(1, static_cast<std::size_t>(band * static_cast<double>(nv_)));
  double outer = 0.0, total = 0.0;
  for (std::size_t j = 0; j < nv_; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < nx_; ++i) s += std::abs(at(i, j));
    total += s;
    if (j < edge || j >= nv_ - edge) outer += s;
  }
  return total > 0.0 ? outer / total : 0.0;
}

void spline_shift_periodic(const double* in, std::size_t n, double shift, double* out) {
  if (n < 4) throw DomainError("spline shift needs at least 4 samples");
  const double fl = std::floor(shift);
  const double a = shift - fl;
  const long long nn = static_cast<long long>(n);
  const long long m = ((static_cast<long long>(fl) % nn) + nn) % nn;
  auto wrap = [&](long long k) { return static_cast<std::size_t>(((k % nn) + nn) % nn); };
  if (a == 0.0) {
    for (std::size_t j = 0; j < n; ++j) out[j] = in[wrap(static_cast<long long>(j) + m)];
    return;
  }
  // Coefficients c with (c[j-1] + 4 c[j] + c[j+1]) / 6 = in[j], by the causal and
  // anticausal recursions with pole z = sqrt(3) - 2 and periodic initial values.
  const double z = std::sqrt(3.0) - 2.0;
  const std::size_t terms = std::min<std::size_t>(n, 40);
  const double zn = terms == n ? std::pow(z, static_cast<double>(n)) : 0.0;
  std::vector<double> c(n);
  double acc = 0.0, zk = 1.0;
  for (std::size_t k = 0; k < terms; ++k, zk *= z) acc += zk * 6.0 * in[wrap(-static_cast<long long>(k))];
  c[0] = acc / (1.0 - zn);
  for (std::size_t j = 1; j < n; ++j) c[j] = 6.0 * in[j] + z * c[j - 1];
  acc = 0.0;
  zk = 1.0;
  for (std::size_t k = 0; k < terms; ++k, zk *= z) acc += zk * c[wrap(static_cast<long long>(n - 1 + k))];
  std::vector<double> d(n);
  d[n - 1] = -z / (1.0 - zn) * acc;
  for (std::size_t j = n - 1; j-- > 0;) d[j] = z * (d[j + 1] - c[j]);

  const double b = 1.0 - a;
  const double w0 = b * b * b / 6.0;
  const double w1 = (4.0 - 6.0 * a * a + 3.0 * a * a * a) / 6.0;
  const double w2 = (1.0 + 3.0 * a + 3.0 * a * a - 3.0 * a * a * a) / 6.0;
  const double w3 = a * a * a / 6.0;
  for (std::size_t j = 0; j < n; ++j) {
    const long long k = static_cast<long long>(j) + m;
    out[j] = w0 * d[wrap(k - 1)] + w1 * d[wrap(k)] + w2 * d[wrap(k + 1)] + w3 * d[wrap(k + 2)];
  }
}

SemiLagrangian::SemiLagrangian(const PhaseSpaceFunction& shape, Coupling q, const OracleOptions& opts)
    : nx_(shape.nx()), dx_(shape.dx()), qs_(charge(q)), opts_(opts) {
  FftBuffers b(nx_);
  const int n = static_cast<int>(nx_);
  forward_ = fftw_plan_dft_r2c_1d(n, b.real, b.spec, FFTW_ESTIMATE);
  backward_ = fftw_plan_dft_c2r_1d(n, b.spec, b.real, FFTW_ESTIMATE);
  if (!forward_ || !backward_) throw DomainError("FFTW plan creation failed");
}

SemiLagrangian::~SemiLagrangian() {
  fftw_destroy_plan(static_cast<fftw_plan>(forward_));
  fftw_destroy_plan(static_cast<fftw_plan>(backward_));
}

void SemiLagrangian::shift_x(PhaseSpaceFunction& f, double dt) const {
  const std::size_t nv = f.nv(), half = nx_ / 2;
  const auto fwd = static_cast<fftw_plan>(forward_);
  const auto bwd = static_cast<fftw_plan>(backward_);
  parallel_for((nv + kBlock - 1) / kBlock, opts_.jobs, [&](std::size_t blk) {
    FftBuffers b(nx_);
    for (std::size_t j = blk * kBlock; j < std::min(nv, (blk + 1) * kBlock); ++j) {
      double* r = f.row(j);
      std::copy(r, r + nx_, b.real);
      fftw_execute_dft_r2c(fwd, b.real, b.spec);
      const double d = f.v(j) * dt;  // f(x) <- f(x - v dt)
      for (std::size_t m = 0; m <= half; ++m) {
        const double th = wavenumber(m, nx_, dx_) * d;
        std::complex<double> z(b.spec[m][0], b.spec[m][1]);
        if (nx_ % 2 == 0 && m == half)
          z *= std::cos(th);
        else
          z *= std::complex<double>(std::cos(th), -std::sin(th));
        b.spec[m][0] = z.real();
        b.spec[m][1] = z.imag();
      }
      fftw_execute_dft_c2r(bwd, b.spec, b.real);
      const double scale = 1.0 / static_cast<double>(nx_);
      for (std::size_t i = 0; i < nx_; ++i) r[i] = b.real[i] * scale;
    }
  }, 1);
}

std::vector<double> SemiLagrangian::field(const PhaseSpaceFunction& f) const {
  std::vector<double> dphi(nx_, 0.0);
  if (opts_.zero_field) return dphi;
  const GridFunction rho = f.density();
  FftBuffers b(nx_);
  for (std::size_t i = 0; i < nx_; ++i) b.real[i] = rho[i];
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_), b.real, b.spec);
  const std::size_t half = nx_ / 2;
  for (std::size_t m = 0; m <= half; ++m) {
    const double k = wavenumber(m, nx_, dx_);
    // (1 - d^2) phi = rho, then d_x: multiply by i k / (1 + k^2)
    const double g = (nx_ % 2 == 0 && m == half) ? 0.0 : k / (1.0 + k * k);
    const double re = b.spec[m][0], im = b.spec[m][1];
    b.spec[m][0] = -g * im;
    b.spec[m][1] = g * re;
  }
  fftw_execute_dft_c2r(static_cast<fftw_plan>(backward_), b.spec, b.real);
  for (std::size_t i = 0; i < nx_; ++i) dphi[i] = b.real[i] / static_cast<double>(nx_);
  return dphi;
}

void SemiLagrangian::shift_v(PhaseSpaceFunction& f, const std::vector<double>& dphi, double dt) const {
  const std::size_t nv = f.nv();
  parallel_for((nx_ + kBlock - 1) / kBlock, opts_.jobs, [&](std::size_t blk) {
    std::vector<double> col(nv), out(nv);
    for (std::size_t i = blk * kBlock; i < std::min(nx_, (blk + 1) * kBlock); ++i) {
      // V' = -q d_x phi, so the foot of v is v + q d_x phi dt
      const double shift = qs_ * dphi[i] * dt / f.dv();
      if (shift == 0.0) continue;
      for (std::size_t j = 0; j < nv; ++j) col[j] = f.at(i, j);
      spline_shift_periodic(col.data(), nv, shift, out.data());
      for (std::size_t j = 0; j < nv; ++j) f.at(i, j) = out[j];
    }
  }, 1);
}

void SemiLagrangian::step(PhaseSpaceFunction& f, double dt) const {
  if (f.nx() != nx_) throw DomainError("semi-Lagrangian stepper built for a different grid");
  shift_x(f, 0.5 * dt);
  if (!opts_.zero_field) shift_v(f, field(f), dt);
  shift_x(f, 0.5 * dt);
}

OracleGrid oracle_grid(const RunConfig& cfg, const InitialData& data, double half_width, std::size_t x_nodes) {
  OracleGrid g;
  g.half_width = half_width;
  g.x_nodes = x_nodes;
  double vmax = 0.0, a_max = 0.0;
  for (const auto& t : data.terms()) {
    vmax = std::max(vmax, std::abs(t.cv) + std::sqrt(std::log(1e20) / t.a));
    a_max = std::max(a_max, t.a);
  }
  if (a_max == 0.0) {
    vmax = 1.0;
    a_max = 1.0;
  }
  g.vmax = cfg.oracle_vmax > 0.0 ? cfg.oracle_vmax : vmax;
  const double T = cfg.horizon;
  const double dv = cfg.oracle_dv > 0.0 ? cfg.oracle_dv : 0.75 / std::sqrt(2.0 * a_max * (1.0 + T * T));
  g.v_nodes = std::max<std::size_t>(8, static_cast<std::size_t>(std::ceil(2.0 * g.vmax / dv - 1e-9)));
  g.dv = 2.0 * g.vmax / static_cast<double>(g.v_nodes);
  return g;
}

OracleRun evolve(const InitialData& data, const OracleGrid& grid, const std::vector<double>& times, Coupling q,
                 const OracleOptions& opts, int n_max) {
  if (times.empty() || times.front() != 0.0) throw DomainError("oracle times must start at 0");
  if (!(opts.dt > 0.0)) throw DomainError("oracle dt must be positive");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1])) throw DomainError("oracle times must increase");

  OracleRun out;
  out.grid = grid;
  PhaseSpaceFunction f = PhaseSpaceFunction::sample(data, grid.half_width, grid.x_nodes, grid.vmax, grid.v_nodes);
  const SemiLagrangian stepper(f, q, opts);
  const double m0 = f.mass();
  double fmax = 0.0;
  for (std::size_t j = 0; j < f.nv(); ++j)
    for (std::size_t i = 0; i < f.nx(); ++i) fmax = std::max(fmax, f.at(i, j));

  auto record = [&](double t) {
    const double leak = f.boundary_fraction();
    if (leak > opts.leak_threshold) {
      std::ostringstream msg;
      msg << "v-boundary mass leakage " << leak << " at t = " << t << " exceeds " << opts.leak_threshold;
      throw TruncationError(msg.str());
    }
    const double m = f.mass();
    out.masses.push_back(m);
    if (m0 != 0.0) out.mass_drift = std::max(out.mass_drift, std::abs(m - m0) / std::abs(m0));
    if (fmax > 0.0) out.undershoot = std::max(out.undershoot, std::max(0.0, -f.min()) / fmax);
    out.history.slices.emplace_back(t, f.density(), n_max);
  };
  out.history.iterate = -1;
  record(0.0);
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double span = times[k] - times[k - 1];
    const auto m = static_cast<std::size_t>(std::ceil(span / opts.dt - 1e-9));
    const double h = span / static_cast<double>(m);
    for (std::size_t s = 0; s < m; ++s) stepper.step(f, h);
    out.steps += m;
    record(times[k]);
  }
  return out;
}

OracleComparison run_and_compare(const RunConfig& cfg, const InitialData& data, const DensityHistory& picard) {
  if (picard.slices.empty()) throw DomainError("oracle comparison: empty Picard history");
  const GridFunction& g0 = picard.slices.front().rho();
  const ResolvedGrid expect = resolve_grid(cfg, data);
  if (std::abs(expect.half_width - g0.half_width()) > 1e-12 * expect.half_width || expect.nodes != g0.size())
    throw DomainError("oracle comparison: stored history grid does not match the config");

  OracleOptions opts;
  opts.dt = cfg.oracle_dt;
  opts.jobs = cfg.jobs;
  OracleComparison c;
  c.run = evolve(data, oracle_grid(cfg, data, g0.half_width(), g0.size()), picard.times(), coupling(cfg), opts,
                 cfg.n_max);
  c.mass_drift = c.run.mass_drift;
  c.undershoot = c.run.undershoot;
  for (std::size_t k = 0; k < picard.slices.size(); ++k) {
    const auto& a = c.run.history.slices[k];
    const auto& b = picard.slices[k];
    if (!a.rho().same_grid(b.rho())) throw DomainError("oracle comparison: grid incompatibility");
    double e = 0.0;
    for (std::size_t i = 0; i < b.rho().size(); ++i) e = std::max(e, std::abs(a.rho()[i] - b.rho()[i]));
    const GridFunction da = spatial_derivative(a.rho(), 1), db = spatial_derivative(b.rho(), 1);
    double e1 = 0.0;
    for (std::size_t i = 0; i < db.size(); ++i) e1 = std::max(e1, std::abs(da[i] - db[i]));
    const double sup = b.rho().sup_norm();
    c.times.push_back(b.time());
    c.sup_error.push_back(e);
    c.relative_error.push_back(sup > 0.0 ? e / sup : e);
    c.d1_error.push_back(e1);
    c.max_sup_error = std::max(c.max_sup_error, e);
    c.max_relative_error = std::max(c.max_relative_error, c.relative_error.back());
    std::vector<double> cn, en;
    for (int n = 0; n <= cfg.n_max; ++n) {
      cn.push_back(a.constant(n));
      en.push_back(a.envelope_ratio(n));
      if (en.back() > 1.0) c.envelope_pass = false;
    }
    c.constants.push_back(cn);
    c.envelope_ratios.push_back(en);
  }
  return c;
}

}  // namespace vy
