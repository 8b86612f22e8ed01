#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "qparity/cli.hpp"
#include "qparity/rabi.hpp"
#include "qparity/wigner.hpp"

#ifndef QPARITY_VERSION
#define QPARITY_VERSION "unknown"
#endif

namespace qparity::cli {

namespace {

std::string num(double x) { return fmt::format("{:.16e}", x); }

void header(std::ostream& out, const RunConfig& c) {
  out << "# qparity " << QPARITY_VERSION << "\n";
  out << "# convention: " << kWignerConvention << "\n";
  out << "# command: " << c.command << "\n";
  out << "# state = " << c.state << "\n";
  out << "# n = " << num(c.n) << "\n";
  out << "# gt-min = " << num(c.gt_min) << "\n";
  out << "# gt-max = " << num(c.gt_max) << "\n";
  out << "# gt-steps = " << c.gt_steps << "\n";
  if (!c.gt_list.empty()) {
    out << "# gt-list = ";
    for (std::size_t i = 0; i < c.gt_list.size(); ++i) out << (i ? "," : "") << num(c.gt_list[i]);
    out << "\n";
  }
  out << "# backend = " << c.backend << "\n";
  out << "# check-backend = " << c.check_backend << "\n";
  out << "# tolerance = " << num(c.tolerance) << "\n";
  out << "# dim-cap = " << c.dim_cap << "\n";
  out << "# seed = " << c.seed << "\n";
  out << "# figure = " << c.figure << "\n";
  out << "# k = " << c.k << "\n";
  out << "# M = " << c.M << "\n";
  out << "# eta-min = " << num(c.eta_min) << "\n";
  out << "# eta-max = " << num(c.eta_max) << "\n";
  out << "# eta-steps = " << c.eta_steps << "\n";
  out << "# preset = " << c.preset << "\n";
  if (c.q_min) out << "# q-min = " << num(*c.q_min) << "\n";
  if (c.q_max) out << "# q-max = " << num(*c.q_max) << "\n";
  out << "# q-points = " << c.q_points << "\n";
  out << "# fd-scheme = " << c.fd_scheme << "\n";
  out << "# fd-spacing = " << num(c.fd_spacing) << "\n";
  out << "# tau-max = " << num(c.tau_max) << "\n";
  out << "# dtau = " << num(c.dtau) << "\n";
  out << "# taper = " << (c.taper ? "true" : "false") << "\n";
  out << "# trace-out = " << c.trace_out << "\n";
  out << "# trace-in = " << c.trace_in << "\n";
}

BuildOptions build_options(const RunConfig& c) { return {kDefaultTailTolerance, c.dim_cap}; }

BackendOptions backend_options(const RunConfig& c) {
  BackendOptions o;
  o.lindblad.dim_cap = c.dim_cap;
  if (c.fd_scheme == "rk4") {
    o.fd.scheme = FdScheme::rk4_central4;
  } else if (c.fd_scheme == "ftcs") {
    o.fd.scheme = FdScheme::ftcs;
  } else {
    throw ConfigError("unknown fd scheme '" + c.fd_scheme + "' (rk4, ftcs)");
  }
  o.fd_spacing = c.fd_spacing;
  return o;
}

StateSpec require_state(const RunConfig& c) {
  if (c.state.empty()) throw ConfigError(c.command + ": --state is required");
  return parse_state_spec(c.state);
}

double default_tolerance(Backend a, Backend b) {
  return (a == Backend::fd || b == Backend::fd) ? 1e-3 : 1e-6;
}

bool has_closed_form(const StateSpec& spec) {
  const auto* added = std::get_if<PhotonAddedSpec>(&spec);
  return added && added->k == 1 &&
         (std::holds_alternative<CoherentSpec>(added->base) || std::holds_alternative<ThermalSpec>(added->base));
}

}  // namespace

ZeroEvents zero_events(Backend b, const StateSpec& spec, const DensityMatrix& rho, double n, const OriginTrajectory& traj) {
  if (b != Backend::analytic) return origin_zero_crossings(traj);
  if (!has_closed_form(spec) && rho.dim() <= 65)
    return fock_origin_zero_events(rho.populations(), n, traj.times.front(), traj.times.back());
  return origin_zero_crossings(traj, [spec, rho, n](double t) { return analytic_origin_value(spec, rho, {n, t}); },
                               1e-13);
}

double regime_time_tolerance(Backend b) { return b == Backend::analytic ? 1e-9 : 5e-3; }

namespace {

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? " " : "") + num(xs[i]);
  return s.empty() ? "none" : s;
}

// Runs f(i) for i in [0, count) on all hardware threads; the first exception is rethrown.
template <class F>
void parallel_for(std::size_t count, F&& f) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(count, std::thread::hardware_concurrency()));
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < count; i += workers) f(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

const std::map<std::string, std::string>& slice_presets() {
  static const std::map<std::string, std::string> presets = {
      {"1,0,2", "ebs k=1 eta=0 M=2"},
      {"1,0.5,2", "ebs k=1 eta=0.5 M=2"},
      {"1,1,2", "ebs k=1 eta=1 M=2"},
  };
  return presets;
}

}  // namespace

Backend parse_backend(const std::string& name) {
  if (name == "analytic") return Backend::analytic;
  if (name == "lindblad") return Backend::lindblad;
  if (name == "gaussian") return Backend::gaussian;
  if (name == "fd") return Backend::fd;
  throw ConfigError("unknown backend '" + name + "' (analytic, lindblad, gaussian, fd)");
}

std::string to_string(Backend backend) {
  switch (backend) {
    case Backend::analytic: return "analytic";
    case Backend::lindblad: return "lindblad";
    case Backend::gaussian: return "gaussian";
    case Backend::fd: return "fd";
  }
  return "?";
}

std::vector<double> decay_times(const RunConfig& c) {
  if (!(c.gt_min >= 0.0) || !(c.gt_max >= c.gt_min)) throw ConfigError("need 0 <= gt-min <= gt-max");
  if (c.gt_steps == 0 && c.gt_max > c.gt_min) throw ConfigError("gt-steps must be positive");
  std::vector<double> ts(c.gt_steps + 1);
  for (std::size_t i = 0; i <= c.gt_steps; ++i)
    ts[i] = c.gt_steps == 0 ? c.gt_min
                            : c.gt_min + (c.gt_max - c.gt_min) * static_cast<double>(i) / static_cast<double>(c.gt_steps);
  ts.back() = c.gt_max;
  return ts;
}

double analytic_origin_value(const StateSpec& spec, const DensityMatrix& rho, ChannelParams params) {
  if (const auto* added = std::get_if<PhotonAddedSpec>(&spec); added && added->k == 1) {
    if (const auto* coh = std::get_if<CoherentSpec>(&added->base)) return ecs_origin_value(std::abs(coh->alpha), params);
    if (const auto* th = std::get_if<ThermalSpec>(&added->base)) return ets_origin_value(th->nbar, params);
  }
  return fock_origin_value(rho.populations(), params);
}

OriginTrajectory origin_trajectory(const StateSpec& spec, const DensityMatrix& rho, double n,
                                   const std::vector<double>& gamma_ts, Backend backend, const BackendOptions& options) {
  switch (backend) {
    case Backend::analytic: {
      OriginTrajectory traj{gamma_ts, {}, "analytic"};
      for (double t : gamma_ts) traj.w00.push_back(analytic_origin_value(spec, rho, {n, t}));
      return traj;
    }
    case Backend::lindblad:
      return lindblad_origin_trajectory(rho, n, gamma_ts, options.lindblad);
    case Backend::gaussian:
      return gaussian_origin_trajectory(rho, n, gamma_ts);
    case Backend::fd: {
      const WignerGrid grid0 = wigner_grid(rho, fd_window(rho, n, options.fd_spacing));
      return fd_origin_trajectory(grid0, n, gamma_ts, options.fd);
    }
  }
  throw ConfigError("unknown backend");
}

int cmd_state(const RunConfig& c, std::ostream& out) {
  const StateSpec spec = require_state(c);
  const DensityMatrix rho = build_state(spec, std::nullopt, build_options(c));
  const double parity = mean_parity(rho);
  header(out, c);
  out << "# canonical: " << to_string(spec) << "\n";
  out << "# dim: " << rho.dim() << "\n";
  out << "# mean_photon_number: " << num(mean_photon_number(rho)) << "\n";
  out << "# mean_parity: " << num(parity) << "\n";
  out << "# w00: " << num(wigner_point(rho, {0.0, 0.0})) << "\n";
  out << "l,population\n";
  for (std::size_t l = 0; l < rho.dim(); ++l) out << l << "," << num(rho.population(l)) << "\n";
  return 0;
}

int cmd_parity_evolve(const RunConfig& c, std::ostream& out) {
  const StateSpec spec = require_state(c);
  const DensityMatrix rho = build_state(spec, std::nullopt, build_options(c));
  const Backend primary = parse_backend(c.backend);
  const bool cross_check = !c.check_backend.empty();
  const Backend check = cross_check ? parse_backend(c.check_backend) : primary;
  const auto times = decay_times(c);
  const auto options = backend_options(c);

  const OriginTrajectory traj = origin_trajectory(spec, rho, c.n, times, primary, options);
  std::optional<OriginTrajectory> other;
  if (cross_check) other = origin_trajectory(spec, rho, c.n, times, check, options);

  header(out, c);
  out << (other ? "gamma_t,w00,backend,w00_check,backend_check\n" : "gamma_t,w00,backend\n");
  double max_dev = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    out << num(times[i]) << "," << num(traj.w00[i]) << "," << to_string(primary);
    if (other) {
      out << "," << num(other->w00[i]) << "," << to_string(check);
      max_dev = std::max(max_dev, std::abs(traj.w00[i] - other->w00[i]));
    }
    out << "\n";
  }

  const double tc = threshold_tc(c.n);
  const auto events = zero_events(primary, spec, rho, c.n, traj);
  out << "# gamma_tc: " << num(tc) << "\n";
  out << "# crossings: " << join(events.crossings) << "\n";
  out << "# touches: " << join(events.touches) << "\n";
  out << "# regime: " << classify_regime(traj, events, tc, regime_time_tolerance(primary), kRegimeZeroTolerance) << "\n";
  if (other) {
    const double tol = c.tolerance > 0.0 ? c.tolerance : default_tolerance(primary, check);
    const bool ok = max_dev <= tol;
    out << "# max_deviation: " << num(max_dev) << "\n";
    out << "# cross_check: " << (ok ? "pass" : "fail") << " (tolerance " << num(tol) << ")\n";
    if (!ok) return 3;
  }
  return 0;
}

int cmd_surface(const RunConfig& c, std::ostream& out) {
  RunConfig cfg = c;
  switch (cfg.figure) {
    case 0: break;
    case 2: cfg.k = 1, cfg.M = 3, cfg.n = 0.5; break;
    case 3: cfg.k = 1, cfg.M = 4, cfg.n = 0.5; break;
    case 4: cfg.k = 2, cfg.M = 2, cfg.n = 0.0; break;
    default: throw ConfigError("surface: --figure must be 2, 3 or 4");
  }
  if (!(cfg.eta_min >= 0.0) || !(cfg.eta_max <= 1.0) || !(cfg.eta_min <= cfg.eta_max))
    throw ConfigError("surface: need 0 <= eta-min <= eta-max <= 1");
  if (cfg.eta_steps == 0 && cfg.eta_max > cfg.eta_min) throw ConfigError("surface: eta-steps must be positive");
  const Backend backend = parse_backend(cfg.backend);
  const auto times = decay_times(cfg);
  const auto options = backend_options(cfg);

  std::vector<double> etas(cfg.eta_steps + 1);
  for (std::size_t i = 0; i <= cfg.eta_steps; ++i)
    etas[i] = cfg.eta_steps == 0 ? cfg.eta_min
                                 : cfg.eta_min + (cfg.eta_max - cfg.eta_min) * static_cast<double>(i) /
                                                     static_cast<double>(cfg.eta_steps);
  etas.back() = cfg.eta_max;

  std::vector<OriginTrajectory> rows(etas.size());
  std::vector<std::string> regimes(etas.size());
  std::vector<double> last_zero(etas.size(), std::nan(""));
  const double tc = threshold_tc(cfg.n);
  parallel_for(etas.size(), [&](std::size_t i) {
    const StateSpec spec = PhotonAddedSpec{cfg.k, BinomialSpec{etas[i], cfg.M}};
    const DensityMatrix rho = build_state(spec, std::nullopt, build_options(cfg));
    rows[i] = origin_trajectory(spec, rho, cfg.n, times, backend, options);
    const auto events = zero_events(backend, spec, rho, cfg.n, rows[i]);
    regimes[i] = classify_regime(rows[i], events, tc, regime_time_tolerance(backend), kRegimeZeroTolerance);
    if (!events.crossings.empty()) last_zero[i] = events.crossings.back();
  });

  cfg.state = "ebs k=" + std::to_string(cfg.k) + " M=" + std::to_string(cfg.M) + " eta=<swept>";
  header(out, cfg);
  out << "eta,gamma_t,w00\n";
  for (std::size_t i = 0; i < etas.size(); ++i)
    for (std::size_t j = 0; j < times.size(); ++j) out << num(etas[i]) << "," << num(times[j]) << "," << num(rows[i].w00[j]) << "\n";
  out << "# gamma_tc: " << num(tc) << "\n";
  for (const auto& r : initial_parity_roots(cfg.k, cfg.M))
    out << "# initial_parity_root: " << num(r.eta) << " " << (r.crossing ? "crossing" : "touch") << "\n";
  for (std::size_t i = 0; i < etas.size(); ++i)
    out << "# regime eta=" << num(etas[i]) << ": " << regimes[i] << " last_crossing=" << num(last_zero[i]) << "\n";
  return 0;
}

int cmd_wigner_slice(const RunConfig& c, std::ostream& out) {
  RunConfig cfg = c;
  if (!cfg.preset.empty()) {
    const auto it = slice_presets().find(cfg.preset);
    if (it == slice_presets().end()) throw ConfigError("wigner-slice: unknown preset '" + cfg.preset + "' (1,0,2  1,0.5,2  1,1,2)");
    cfg.state = it->second;
  }
  const StateSpec spec = require_state(cfg);
  const DensityMatrix rho = build_state(spec, std::nullopt, build_options(cfg));
  // Off the origin there is no closed form; the analytic choice means the exact OU propagator.
  Backend backend = parse_backend(cfg.backend);
  if (backend == Backend::analytic) backend = Backend::gaussian;
  const auto options = backend_options(cfg);
  const std::vector<double> times = cfg.gt_list.empty() ? decay_times(cfg) : cfg.gt_list;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (!(times[i] >= 0.0) || (i > 0 && times[i] <= times[i - 1]))
      throw ConfigError("wigner-slice: decay times must be non-negative and increasing");

  const GridWindow def = default_window(rho);
  const double q_lo = cfg.q_min.value_or(def.q_min);
  const double q_hi = cfg.q_max.value_or(def.q_max);
  if (!(q_hi > q_lo) || cfg.q_points < 2) throw ConfigError("wigner-slice: need q-min < q-max and q-points >= 2");
  std::vector<double> qs(cfg.q_points);
  for (std::size_t i = 0; i < qs.size(); ++i)
    qs[i] = q_lo + (q_hi - q_lo) * static_cast<double>(i) / static_cast<double>(qs.size() - 1);

  std::vector<std::vector<double>> w(times.size(), std::vector<double>(qs.size()));
  switch (backend) {
    case Backend::gaussian:
      parallel_for(times.size() * qs.size(), [&](std::size_t idx) {
        const std::size_t ti = idx / qs.size(), qi = idx % qs.size();
        w[ti][qi] = gaussian_propagated_point(rho, {qs[qi], 0.0}, {cfg.n, times[ti]});
      });
      break;
    case Backend::lindblad:
      parallel_for(times.size(), [&](std::size_t ti) {
        const DensityMatrix rt = times[ti] == 0.0 ? rho : evolve_lindblad(rho, {cfg.n, times[ti]}, 0, options.lindblad);
        for (std::size_t qi = 0; qi < qs.size(); ++qi) w[ti][qi] = wigner_point(rt, {qs[qi], 0.0});
      });
      break;
    case Backend::fd: {
      const WignerGrid grid0 = wigner_grid(rho, fd_window(rho, cfg.n, options.fd_spacing));
      for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const WignerGrid g = propagate_wigner_fd(grid0, {cfg.n, times[ti]}, options.fd);
        for (std::size_t qi = 0; qi < qs.size(); ++qi) w[ti][qi] = g.interpolate(qs[qi], 0.0);
      }
      break;
    }
    case Backend::analytic: break;
  }

  header(out, cfg);
  out << "# slice_backend: " << to_string(backend) << "\n";
  out << "gamma_t,q,w\n";
  for (std::size_t ti = 0; ti < times.size(); ++ti)
    for (std::size_t qi = 0; qi < qs.size(); ++qi) out << num(times[ti]) << "," << num(qs[qi]) << "," << num(w[ti][qi]) << "\n";
  return 0;
}

int cmd_thresholds(const RunConfig& c, std::ostream& out) {
  const StateSpec spec = require_state(c);
  const DensityMatrix rho = build_state(spec, std::nullopt, build_options(c));
  const Backend backend = parse_backend(c.backend);
  const auto times = decay_times(c);
  const double tc = threshold_tc(c.n);

  header(out, c);
  out << "quantity,value,note\n";
  out << "gamma_tc," << num(tc) << ",\n";
  const auto* added = std::get_if<PhotonAddedSpec>(&spec);
  if (added && added->k == 1) {
    if (const auto* coh = std::get_if<CoherentSpec>(&added->base)) {
      const double a = std::abs(coh->alpha);
      if (a >= 1.0)
        out << "gamma_tc1," << num(threshold_tc1(a, c.n)) << ",\n";
      else
        out << "gamma_tc1,,not defined for |alpha| < 1\n";
    }
  }
  const OriginTrajectory traj = origin_trajectory(spec, rho, c.n, times, backend, backend_options(c));
  const auto events = zero_events(backend, spec, rho, c.n, traj);
  for (double t : events.crossings) out << "crossing," << num(t) << "," << to_string(backend) << "\n";
  for (double t : events.touches) out << "touch," << num(t) << "," << to_string(backend) << "\n";
  out << "regime,," << classify_regime(traj, events, tc, regime_time_tolerance(backend), kRegimeZeroTolerance) << "\n";
  if (added) {
    if (const auto* bin = std::get_if<BinomialSpec>(&added->base)) {
      for (const auto& r : initial_parity_roots(added->k, bin->M))
        out << "eta_root," << num(r.eta) << "," << (r.crossing ? "crossing" : "touch") << "\n";
    }
  }
  return 0;
}

int cmd_rabi(const RunConfig& c, std::ostream& out) {
  QuadratureOptions q;
  if (c.tau_max > 0.0) q.tau_max = c.tau_max;
  q.dtau = c.dtau;
  q.taper = c.taper;

  std::optional<DensityMatrix> rho;
  if (!c.state.empty()) rho = build_state(parse_state_spec(c.state), std::nullopt, build_options(c));
  RabiTrace trace;
  if (!c.trace_in.empty()) {
    std::ifstream in(c.trace_in);
    if (!in) throw ConfigError("rabi: cannot open trace file '" + c.trace_in + "'");
    trace = read_trace_csv(in);
  } else {
    if (!rho) throw ConfigError("rabi: needs --state or --trace-in");
    trace = jc_trace(*rho, q);
  }

  const Complex prefactor = 4.0 / (std::numbers::pi * std::polar(1.0, std::numbers::pi / 4.0));
  const Complex raw = fresnel_integral(trace, prefactor, q.taper);
  const double reconstructed = fresnel_reconstruct(trace, q);

  std::ostringstream report;
  report << "# reconstructed_parity: " << num(reconstructed) << "\n";
  report << "# reconstructed_w00: " << num(2.0 / std::numbers::pi * reconstructed) << "\n";
  report << "# imag_residue: " << num(raw.imag()) << "\n";
  if (rho) {
    const double direct = mean_parity(*rho);
    report << "# direct_parity: " << num(direct) << "\n";
    report << "# error: " << num(std::abs(reconstructed - direct)) << "\n";
  }

  if (!c.trace_out.empty()) {
    std::ofstream f(c.trace_out);
    if (!f) throw ConfigError("rabi: cannot write trace file '" + c.trace_out + "'");
    header(f, c);
    write_trace_csv(f, trace);
  }
  header(out, c);
  out << report.str();
  write_trace_csv(out, trace);
  return 0;
}

int exit_code(const Error& error) {
  switch (error.category()) {
    case Error::Category::config: return 2;
    case Error::Category::numerical: return 3;
    case Error::Category::truncation: return 4;
  }
  return 2;
}

}  // namespace qparity::cli
