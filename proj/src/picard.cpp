#include "vy/picard.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "vy/error.hpp"

namespace vy {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || !std::isfinite(d)) throw DomainError("config: " + key + " expects a number, got '" + v + "'");
  return d;
}

long long to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long i = 0;
  try {
    i = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size()) throw DomainError("config: " + key + " expects an integer, got '" + v + "'");
  return i;
}

std::vector<GaussianTerm> parse_terms(const std::string& text) {
  std::vector<GaussianTerm> out;
  std::stringstream all(text);
  std::string item;
  while (std::getline(all, item, ';')) {
    item = trim(item);
    if (item.empty()) continue;
    std::stringstream fields(item);
    std::string f;
    std::vector<double> v;
    while (std::getline(fields, f, ',')) v.push_back(to_double("terms", trim(f)));
    if (v.size() != 4) throw DomainError("config: each mixture term needs w,cx,cv,a");
    out.push_back({v[0], v[1], v[2], v[3]});
  }
  if (out.empty()) throw DomainError("config: mixture data needs at least one term");
  return out;
}

template <class T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw DomainError("density history: truncated file");
  return v;
}

std::string to_text(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

constexpr char kMagic[4] = {'V', 'Y', 'D', 'H'};

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "q") q = static_cast<int>(to_int(key, v));
  else if (key == "data") data = v;
  else if (key == "width") width = to_double(key, v);
  else if (key == "amplitude") amplitude = v == "auto" ? std::nullopt : std::optional<double>(to_double(key, v));
  else if (key == "terms") terms = v;
  else if (key == "certify_order") certify_order = static_cast<int>(to_int(key, v));
  else if (key == "safety") safety = to_double(key, v);
  else if (key == "half_width") half_width = to_double(key, v);
  else if (key == "spacing") spacing = to_double(key, v);
  else if (key == "horizon") horizon = to_double(key, v);
  else if (key == "time_nodes") time_nodes = static_cast<int>(to_int(key, v));
  else if (key == "first_step") first_step = to_double(key, v);
  else if (key == "n_max") n_max = static_cast<int>(to_int(key, v));
  else if (key == "picard_tol") picard_tol = to_double(key, v);
  else if (key == "max_iterations") max_iterations = static_cast<int>(to_int(key, v));
  else if (key == "min_iterations") min_iterations = static_cast<int>(to_int(key, v));
  else if (key == "bvp_tol") bvp_tol = to_double(key, v);
  else if (key == "ode_tol") ode_tol = to_double(key, v);
  else if (key == "nodes_per_unit") nodes_per_unit = to_double(key, v);
  else if (key == "ladder_stride") ladder_stride = static_cast<int>(to_int(key, v));
  else if (key == "oracle_dt") oracle_dt = to_double(key, v);
  else if (key == "oracle_vmax") oracle_vmax = to_double(key, v);
  else if (key == "oracle_dv") oracle_dv = to_double(key, v);
  else if (key == "jobs") jobs = static_cast<int>(to_int(key, v));
  else if (key == "seed") seed = static_cast<std::uint64_t>(to_int(key, v));
  else throw DomainError("config: unknown key '" + key + "'");
}

RunConfig RunConfig::parse(std::istream& is) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DomainError("config line " + std::to_string(lineno) + ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config " + path);
  return parse(in);
}

void RunConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw DomainError(std::string("config: ") + what);
  };
  require(q == 1 || q == -1, "q must be +1 or -1");
  require(data == "gaussian" || data == "mixture", "data must be gaussian or mixture");
  require(width > 0.0, "width must be positive");
  require(!amplitude || *amplitude >= 0.0, "amplitude must be >= 0 or auto");
  if (data == "mixture") parse_terms(terms);
  require(certify_order >= 0 && certify_order + 1 <= InitialData::kMaxOrder, "certify_order out of range");
  require(safety >= 1.0, "safety must be >= 1");
  require(half_width >= 0.0, "half_width must be >= 0 (0 = auto)");
  require(spacing > 0.0, "spacing must be positive");
  require(horizon > 0.0, "horizon must be positive");
  require(time_nodes >= 3, "time_nodes must be >= 3");
  require(first_step > 0.0 && first_step < horizon, "first_step must lie in (0, horizon)");
  require(n_max >= 0 && n_max <= 6, "n_max must be in [0, 6]");
  require(picard_tol > 0.0, "picard_tol must be positive");
  require(max_iterations >= 1, "max_iterations must be >= 1");
  require(min_iterations >= 1 && min_iterations <= max_iterations, "min_iterations must be in [1, max_iterations]");
  require(bvp_tol > 0.0 && ode_tol > 0.0, "tolerances must be positive");
  require(nodes_per_unit > 0.0, "nodes_per_unit must be positive");
  require(ladder_stride >= 0, "ladder_stride must be >= 0");
  require(oracle_dt > 0.0, "oracle_dt must be positive");
  require(oracle_vmax >= 0.0 && oracle_dv >= 0.0, "oracle grid sizes must be >= 0 (0 = auto)");
  require(jobs >= 1, "jobs must be >= 1");
}

std::string RunConfig::dump() const {
  std::ostringstream os;
  os.precision(17);
  os << "q = " << q << "\ndata = " << data << "\nwidth = " << width << "\namplitude = " << (amplitude ? to_text(*amplitude) : std::string("auto"))
     << "\nterms = " << terms << "\ncertify_order = " << certify_order << "\nsafety = " << safety
     << "\nhalf_width = " << half_width << "\nspacing = " << spacing << "\nhorizon = " << horizon
     << "\ntime_nodes = " << time_nodes << "\nfirst_step = " << first_step << "\nn_max = " << n_max
     << "\npicard_tol = " << picard_tol << "\nmax_iterations = " << max_iterations
     << "\nmin_iterations = " << min_iterations << "\nbvp_tol = " << bvp_tol << "\node_tol = " << ode_tol
     << "\nnodes_per_unit = " << nodes_per_unit << "\nladder_stride = " << ladder_stride
     << "\noracle_dt = " << oracle_dt << "\noracle_vmax = " << oracle_vmax << "\noracle_dv = " << oracle_dv
     << "\njobs = " << jobs << "\nseed = " << seed << "\n";
  return os.str();
}

Coupling coupling(const RunConfig& cfg) { return coupling_from_int(cfg.q); }

InitialData make_initial_data(const RunConfig& cfg) {
  InitialData shape = cfg.data == "mixture" ? InitialData::mixture(parse_terms(cfg.terms))
                                            : InitialData::gaussian(1.0, cfg.width);
  if (cfg.amplitude) return shape.scaled(*cfg.amplitude);
  return auto_tune_amplitude(shape, cfg.certify_order, cfg.safety);
}

double required_half_width(const InitialData& data, double horizon) {
  double L = 8.0;
  const double spread = 1.0 + horizon * horizon;
  for (const auto& g : data.terms()) {
    const double peak = std::abs(g.weight) * std::sqrt(M_PI / (g.a * spread));
    if (!(peak > 1e-14)) continue;
    const double d = std::sqrt(spread / g.a * std::log(peak / 1e-14));
    L = std::max({L, std::abs(g.cx) + d, std::abs(g.cx + g.cv * horizon) + d});
  }
  return 1.05 * L;
}

std::vector<double> geometric_time_grid(double horizon, int nodes, double first_step) {
  if (nodes < 2 || !(horizon > 0.0) || !(first_step > 0.0)) throw DomainError("time grid: bad parameters");
  const int K = nodes - 1;
  std::vector<double> t(nodes, 0.0);
  if (first_step * K >= horizon) {
    for (int k = 0; k <= K; ++k) t[k] = horizon * k / K;
    return t;
  }
  auto total = [&](double r) { return first_step * (std::pow(r, K) - 1.0) / (r - 1.0); };
  double lo = 1.0 + 1e-12, hi = 2.0;
  while (total(hi) < horizon) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (total(mid) < horizon ? lo : hi) = mid;
  }
  const double r = 0.5 * (lo + hi);
  for (int k = 1; k < K; ++k) t[k] = first_step * (std::pow(r, k) - 1.0) / (r - 1.0);
  t[K] = horizon;
  return t;
}

ResolvedGrid resolve_grid(const RunConfig& cfg, const InitialData& data) {
  const double need = required_half_width(data, cfg.horizon);
  double L = cfg.half_width > 0.0 ? cfg.half_width : need;
  if (L < need) {
    std::ostringstream msg;
    msg << "domain too small: half_width " << L << " < " << need << " needed to contain the density at t = "
        << cfg.horizon;
    throw DomainError(msg.str());
  }
  const double cells = std::ceil(L / cfg.spacing - 1e-9);
  L = cells * cfg.spacing;
  return {L, static_cast<std::size_t>(2 * cells) + 1, geometric_time_grid(cfg.horizon, cfg.time_nodes, cfg.first_step)};
}

DensityHistory DensityHistory::zero(const std::vector<double>& times, double half_width, std::size_t nodes,
                                    int n_max) {
  DensityHistory h;
  for (double t : times) h.slices.emplace_back(t, GridFunction::zeros(half_width, nodes), n_max);
  return h;
}

std::vector<double> DensityHistory::times() const {
  std::vector<double> t;
  for (const auto& s : slices) t.push_back(s.time());
  return t;
}

std::vector<GridFunction> DensityHistory::densities() const {
  std::vector<GridFunction> r;
  for (const auto& s : slices) r.push_back(s.rho());
  return r;
}

bool DensityHistory::is_zero() const {
  return std::all_of(slices.begin(), slices.end(), [](const DensitySlice& s) { return s.sup(0) == 0.0; });
}

FieldHistory DensityHistory::field(int max_order) const {
  if (slices.empty()) throw DomainError("density history is empty");
  const auto& g = slices.front().rho();
  if (is_zero()) return FieldHistory::zero(times(), g.half_width(), g.size(), max_order);
  return FieldHistory::from_densities(times(), densities(), max_order);
}

double DensityHistory::sup_difference(const DensityHistory& other) const {
  if (slices.size() != other.slices.size()) throw DomainError("histories have different time grids");
  double d = 0.0;
  for (std::size_t j = 0; j < slices.size(); ++j) {
    const auto& a = slices[j].rho();
    const auto& b = other.slices[j].rho();
    if (!a.same_grid(b) || slices[j].time() != other.slices[j].time())
      throw DomainError("histories have different grids");
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  }
  return d;
}

double DensityHistory::max_constant(int n) const {
  double c = 0.0;
  for (const auto& s : slices) c = std::max(c, s.constant(n));
  return c;
}

void DensityHistory::write_csv(std::ostream& os) const {
  os.precision(17);
  os << "t,x,rho\n";
  for (const auto& s : slices) {
    const auto& g = s.rho();
    for (std::size_t i = 0; i < g.size(); ++i) os << s.time() << ',' << g.x(i) << ',' << g[i] << '\n';
  }
}

void DensityHistory::save(std::ostream& os) const {
  os.write(kMagic, 4);
  write_pod<std::int32_t>(os, iterate);
  write_pod<std::uint64_t>(os, slices.size());
  for (const auto& s : slices) {
    write_pod<double>(os, s.time());
    s.rho().write_binary(os);
  }
}

DensityHistory DensityHistory::load(std::istream& is, int n_max) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw DomainError("not a density history file");
  DensityHistory h;
  h.iterate = read_pod<std::int32_t>(is);
  const auto n = read_pod<std::uint64_t>(is);
  for (std::uint64_t j = 0; j < n; ++j) {
    double t = read_pod<double>(is);
    h.slices.emplace_back(t, GridFunction::read_binary(is), n_max);
  }
  return h;
}

DensityHistory picard_step(const DensityHistory& prev, const InitialData& data, const RunConfig& cfg,
                           StepDiagnostics* diag) {
  const auto start = std::chrono::steady_clock::now();
  const FieldHistory field = prev.field(std::min(kMaxDerivativeOrder, cfg.n_max + 2));
  ReconstructOptions opts;
  opts.n_max = cfg.n_max;
  opts.nodes_per_unit = cfg.nodes_per_unit;
  opts.ladder_stride = cfg.ladder_stride;
  opts.bvp.tol = cfg.bvp_tol;
  opts.bvp.ode.abs_tol = cfg.ode_tol;
  opts.bvp.ode.rel_tol = cfg.ode_tol;
  opts.jobs = cfg.jobs;

  StepDiagnostics d;
  d.iterate = prev.iterate + 1;
  d.damping_ratio = field.is_zero() ? 0.0 : field.damping_ratio();
  d.route_discrepancy.assign(cfg.n_max + 1, 0.0);
  d.data_integral_margin.assign(cfg.n_max + 1, 1.0);
  d.density_integral_margin.assign(cfg.n_max + 1, 1.0);

  DensityHistory next;
  next.iterate = prev.iterate + 1;
  for (const auto& slice : prev.slices) {
    const TimePoint t(slice.time());
    ReconstructResult r;
    if (data.is_zero())
      r.rho = GridFunction::zeros(field.half_width(), field.grid_nodes());
    else
      r = reconstruct_density(data, field, t, coupling(cfg), opts);
    d.pairs += r.pairs;
    d.newton_iterations += r.newton_iterations;
    d.max_residual = std::max(d.max_residual, r.max_residual);
    for (int n = 0; n <= cfg.n_max && !r.route_discrepancy.empty(); ++n) {
      d.route_discrepancy[n] = std::max(d.route_discrepancy[n], r.route_discrepancy[n]);
      d.data_integral_margin[n] = std::min(d.data_integral_margin[n], r.bounds.data[n]);
      d.density_integral_margin[n] = std::min(d.density_integral_margin[n], r.bounds.density[n]);
    }
    next.slices.emplace_back(t.value(), std::move(r.rho), cfg.n_max);
  }
  d.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (diag) *diag = d;
  return next;
}

IterateBoundCheck iterate_bound_check(const DensityHistory& input, const DensityHistory& output, int n_max) {
  IterateBoundCheck c{0.0, 0.0, true};
  for (int n = 0; n <= n_max; ++n) {
    c.input_const = std::max(c.input_const, input.max_constant(n));
    c.output_const = std::max(c.output_const, output.max_constant(n));
  }
  c.pass = !(c.input_const <= 1.0 / 1500.0) || c.output_const <= 1.0 / 3000.0;
  return c;
}

RunResult run(const RunConfig& cfg) { return run(cfg, make_initial_data(cfg)); }

RunResult run(const RunConfig& cfg, const InitialData& data) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  RunReport rep;
  rep.config = cfg;
  rep.amplitude = data.terms().empty() ? 0.0 : data.terms().front().weight;
  const ResolvedGrid grid = resolve_grid(cfg, data);
  rep.half_width = grid.half_width;
  rep.nodes = grid.nodes;
  rep.times = grid.times;
  rep.certificate = certify_initial_data(data, cfg.certify_order, cfg.safety);
  rep.data_certified = rep.certificate.passed;

  DensityHistory prev = DensityHistory::zero(grid.times, grid.half_width, grid.nodes, cfg.n_max);
  rep.normalization_pass = true;
  rep.bounds_pass = true;
  for (int k = 1; k <= cfg.max_iterations; ++k) {
    StepDiagnostics diag;
    DensityHistory next = picard_step(prev, data, cfg, &diag);
    const double dk = next.sup_difference(prev);
    rep.steps.push_back(diag);
    if (!rep.differences.empty())
      rep.ratios.push_back(rep.differences.back() > 0.0 ? dk / rep.differences.back() : 0.0);
    rep.differences.push_back(dk);
    std::vector<double> consts;
    for (int n = 0; n <= cfg.n_max; ++n) {
      consts.push_back(next.max_constant(n));
      if (consts.back() > 1.0 / 3000.0) rep.normalization_pass = false;
    }
    rep.iterate_constants.push_back(consts);
    rep.iterate_bounds.push_back(iterate_bound_check(prev, next, cfg.n_max));
    for (int n = 0; n <= cfg.n_max && !diag.data_integral_margin.empty(); ++n)
      if (diag.data_integral_margin[n] < 0.0 || diag.density_integral_margin[n] < 0.0) rep.bounds_pass = false;
    prev = std::move(next);
    if (dk == 0.0 || (k >= cfg.min_iterations && dk < cfg.picard_tol)) {
      rep.converged = true;
      break;
    }
  }
  // Ratios d_k / d_{k-1} for k >= 3 (the first listed ratio is k = 2).
  rep.contraction_pass = true;
  for (std::size_t i = 1; i < rep.ratios.size(); ++i)
    if (!(rep.ratios[i] < 0.5)) rep.contraction_pass = false;

  rep.envelope_pass = true;
  for (const auto& s : prev.slices) {
    std::vector<double> c, e;
    for (int n = 0; n <= cfg.n_max; ++n) {
      c.push_back(s.constant(n));
      e.push_back(s.envelope_ratio(n));
      if (e.back() > 1.0) rep.envelope_pass = false;
    }
    rep.final_constants.push_back(c);
    rep.envelope_ratios.push_back(e);
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(prev), std::move(rep)};
}

std::string RunReport::to_json() const {
  using nlohmann::json;
  json j;
  std::istringstream cfgtext(config.dump());
  json cfg = json::object();
  for (std::string line; std::getline(cfgtext, line);) {
    auto eq = line.find('=');
    if (eq != std::string::npos) cfg[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  j["config"] = cfg;
  j["amplitude"] = amplitude;
  j["half_width"] = half_width;
  j["nodes"] = nodes;
  j["times"] = times;
  j["certificate"] = {{"norms", certificate.norms},
              {"margins", certificate.margins},
              {"passed", certificate.passed},
              {"failing_order", certificate.failing_order}};
  json steps_j = json::array();
  for (const auto& s : steps)
    steps_j.push_back({{"iterate", s.iterate},
                       {"pairs", s.pairs},
                       {"newton_iterations", s.newton_iterations},
                       {"max_residual", s.max_residual},
                       {"damping_ratio", s.damping_ratio},
                       {"seconds", s.seconds},
                       {"route_discrepancy", s.route_discrepancy},
                       {"data_integral_margin", s.data_integral_margin},
                       {"density_integral_margin", s.density_integral_margin}});
  j["steps"] = steps_j;
  j["differences"] = differences;
  j["ratios"] = ratios;
  j["iterate_constants"] = iterate_constants;
  json props = json::array();
  for (const auto& p : iterate_bounds)
    props.push_back({{"input_const", p.input_const}, {"output_const", p.output_const}, {"pass", p.pass}});
  j["iterate_bounds"] = props;
  j["final_constants"] = final_constants;
  j["envelope_ratios"] = envelope_ratios;
  j["flags"] = {{"converged", converged},
                {"data_certified", data_certified},
                {"contraction", contraction_pass},
                {"normalization", normalization_pass},
                {"envelope", envelope_pass},
                {"transported_integrals", bounds_pass},
                {"passed", passed()}};
  j["seconds"] = seconds;
  return j.dump(2);
}

}  // namespace vy
