#include "qparity/thermal_channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qparity/errors.hpp"

namespace qparity {

namespace {

constexpr double kInvPi = std::numbers::inv_pi;

void require_params(const ChannelParams& params, const char* who) {
  if (!(params.n >= 0.0) || !std::isfinite(params.n))
    throw DomainError(std::string(who) + ": environment occupation n must be finite and >= 0");
  if (!(params.gamma_t >= 0.0) || !std::isfinite(params.gamma_t))
    throw DomainError(std::string(who) + ": gamma_t must be finite and >= 0");
}

void require_increasing(const std::vector<double>& times, const char* who) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0) || !std::isfinite(times[i])) throw DomainError(std::string(who) + ": gamma_t must be >= 0");
    if (i > 0 && !(times[i] > times[i - 1])) throw ConfigError(std::string(who) + ": gamma_t samples must increase");
  }
}

template <class F>
OriginTrajectory sample(const std::vector<double>& times, std::string backend, F&& f) {
  OriginTrajectory traj{times, {}, std::move(backend)};
  traj.w00.reserve(times.size());
  for (double t : times) traj.w00.push_back(f(t));
  return traj;
}

// Right-hand side of the master equation (time in units of 1/gamma) using the truncated ladder
// operators, so that the trace is conserved exactly.
void lindblad_rhs(const Eigen::MatrixXcd& rho, double n, const std::vector<double>& sq, const std::vector<double>& aad,
                  Eigen::MatrixXcd& out) {
  const Eigen::Index dim = rho.rows();
  const double loss = 0.5 * (n + 1.0);
  const double gain = 0.5 * n;
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (Eigen::Index r = 0; r < dim; ++r) {
      Complex v = -loss * static_cast<double>(r + c) * rho(r, c) - gain * (aad[r] + aad[c]) * rho(r, c);
      if (r + 1 < dim && c + 1 < dim) v += 2.0 * loss * sq[r + 1] * sq[c + 1] * rho(r + 1, c + 1);
      if (r > 0 && c > 0) v += 2.0 * gain * sq[r] * sq[c] * rho(r - 1, c - 1);
      out(r, c) = v;
    }
  }
}

class LindbladStepper {
 public:
  LindbladStepper(Eigen::MatrixXcd rho, double n, const LindbladOptions& options, LindbladDiagnostics& diag)
      : rho_(std::move(rho)), n_(n), options_(options), diag_(diag) {
    const Eigen::Index dim = rho_.rows();
    sq_.resize(dim);
    aad_.resize(dim);
    for (Eigen::Index l = 0; l < dim; ++l) {
      sq_[l] = std::sqrt(static_cast<double>(l));
      aad_[l] = l + 1 < dim ? static_cast<double>(l + 1) : 0.0;
    }
    k1_.resize(dim, dim);
    k2_.resize(dim, dim);
    k3_.resize(dim, dim);
    k4_.resize(dim, dim);
    tmp_.resize(dim, dim);
    diag_.dim = static_cast<std::size_t>(dim);
    check();
  }

  void advance(double duration, std::size_t steps) {
    if (duration <= 0.0) return;
    if (steps == 0) steps = static_cast<std::size_t>(std::ceil(duration / options_.step - 1e-9));
    steps = std::max<std::size_t>(steps, 1);
    const double h = duration / static_cast<double>(steps);
    for (std::size_t s = 0; s < steps; ++s) {
      lindblad_rhs(rho_, n_, sq_, aad_, k1_);
      tmp_ = rho_ + 0.5 * h * k1_;
      lindblad_rhs(tmp_, n_, sq_, aad_, k2_);
      tmp_ = rho_ + 0.5 * h * k2_;
      lindblad_rhs(tmp_, n_, sq_, aad_, k3_);
      tmp_ = rho_ + h * k3_;
      lindblad_rhs(tmp_, n_, sq_, aad_, k4_);
      rho_ += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
      diag_.max_hermiticity_defect =
          std::max(diag_.max_hermiticity_defect, (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff());
      tmp_ = 0.5 * (rho_ + rho_.adjoint());
      rho_ = tmp_;
      check();
    }
  }

  const Eigen::MatrixXcd& rho() const { return rho_; }

  double parity() const {
    double p = 0.0;
    for (Eigen::Index l = 0; l < rho_.rows(); ++l) p += (l % 2 == 0 ? 1.0 : -1.0) * rho_(l, l).real();
    return p;
  }

 private:
  void check() {
    const double drift = std::abs(rho_.trace().real() - 1.0);
    diag_.max_trace_drift = std::max(diag_.max_trace_drift, drift);
    if (drift > options_.trace_drift_limit)
      throw NumericalError("evolve_lindblad: trace drift " + std::to_string(drift) + " exceeds limit; reduce the step");
    const Eigen::Index top = rho_.rows() - 1;
    const double tail = rho_(top, top).real();
    diag_.max_tail_population = std::max(diag_.max_tail_population, tail);
    if (tail > options_.tail_limit)
      throw TruncationError("evolve_lindblad: population " + std::to_string(tail) + " reached the top basis state " +
                            std::to_string(top) + "; raise the dimension cap");
  }

  Eigen::MatrixXcd rho_;
  double n_;
  const LindbladOptions& options_;
  LindbladDiagnostics& diag_;
  std::vector<double> sq_;
  std::vector<double> aad_;
  Eigen::MatrixXcd k1_, k2_, k3_, k4_, tmp_;
};

Eigen::MatrixXcd headroom(const DensityMatrix& rho0, double n, double gamma_t_max, std::size_t cap) {
  const std::size_t dim = std::min(std::max(cap, rho0.dim()), evolved_dimension(rho0.dim(), n, gamma_t_max));
  return rho0.padded(dim).matrix();
}

// Bisection on f over a sign-changing bracket.
double bisect(const std::function<double(double)>& f, double lo, double hi, double tolerance) {
  double flo = f(lo);
  for (int it = 0; it < 200 && hi - lo > tolerance; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> bernstein_derivative(const std::vector<double>& b) {
  if (b.size() <= 1) return {};
  const double degree = static_cast<double>(b.size() - 1);
  std::vector<double> d(b.size() - 1);
  for (std::size_t i = 0; i + 1 < b.size(); ++i) d[i] = degree * (b[i + 1] - b[i]);
  return d;
}

double bernstein_scale(const std::vector<double>& b, double x) {
  std::vector<double> a(b.size());
  std::transform(b.begin(), b.end(), a.begin(), [](double v) { return std::abs(v); });
  return bernstein_value(a, x);
}

constexpr std::size_t kMaxRootDegree = 64;

// |f| at a critical point below this many ulps of the evaluation scale is a multiple root.
// Genuine extrema can sit far closer to zero than any fixed fraction when roots cluster.
constexpr double kMultipleRootUlps = 64.0;

struct BernsteinRoot {
  double x;
  bool crossing;
};

// Real roots in (0, 1). Critical points split [0, 1] into monotone pieces; a critical point
// where the polynomial vanishes is a multiple root, which is a crossing when the sign flips.
std::vector<BernsteinRoot> bernstein_roots(const std::vector<double>& b) {
  if (b.size() <= 1) return {};
  const double peak = std::abs(*std::max_element(b.begin(), b.end(), [](double u, double v) { return std::abs(u) < std::abs(v); }));
  if (peak == 0.0) return {};

  std::vector<double> points{0.0};
  for (const auto& r : bernstein_roots(bernstein_derivative(b))) points.push_back(r.x);
  points.push_back(1.0);
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());

  auto f = [&](double x) { return bernstein_value(b, x); };
  auto vanishes = [&](double x) {
    return std::abs(f(x)) <= kMultipleRootUlps * std::numeric_limits<double>::epsilon() * bernstein_scale(b, x);
  };

  std::vector<BernsteinRoot> roots;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double lo = points[i];
    const double hi = points[i + 1];
    if (i > 0 && vanishes(lo)) {
      const double left = f(0.5 * (points[i - 1] + lo));
      const double right = f(0.5 * (lo + hi));
      roots.push_back({lo, (left < 0) != (right < 0)});
      continue;
    }
    if (vanishes(hi)) continue;
    if ((f(lo) < 0) != (f(hi) < 0)) roots.push_back({bisect(f, lo, hi, 1e-16), true});
  }
  return roots;
}

}  // namespace

Propagator ou_propagator(const ChannelParams& params) {
  const double decay = std::exp(-params.gamma_t);
  return {(1.0 + 2.0 * params.n) * (1.0 - decay), std::sqrt(decay)};
}

double threshold_tc(double n) {
  if (!(n >= 0.0)) throw DomainError("threshold_tc: n must be >= 0");
  return std::log((2.0 + 2.0 * n) / (1.0 + 2.0 * n));
}

double threshold_tc1(double alpha_abs, double n) {
  if (!(n >= 0.0)) throw DomainError("threshold_tc1: n must be >= 0");
  if (!(alpha_abs >= 1.0))
    throw RegimeError("threshold_tc1: defined for |alpha| >= 1 only; below it the sign changes only at gamma t_c");
  const double a2 = alpha_abs * alpha_abs;
  return std::log((2.0 * a2 * (1.0 + n) + 2.0 * n) / ((1.0 + 2.0 * n) * (1.0 + a2)));
}

double ecs_origin_value(double alpha_abs, ChannelParams params) {
  require_params(params, "ecs_origin_value");
  const double a2 = alpha_abs * alpha_abs;
  const double growth = std::exp(params.gamma_t);
  const double c2 = (growth - 1.0) * (1.0 + 2.0 * params.n);
  const double bracket = a2 * (1.0 - c2) * (1.0 - c2) + c2 * c2 - 1.0;
  return 2.0 * growth * bracket * std::exp(-2.0 * a2 / (1.0 + c2)) /
         (std::numbers::pi * (1.0 + a2) * std::pow(1.0 + c2, 3));
}

OriginTrajectory ecs_origin_trajectory(Complex alpha, double n, const std::vector<double>& gamma_ts) {
  require_increasing(gamma_ts, "ecs_origin_trajectory");
  const double a = std::abs(alpha);
  return sample(gamma_ts, "analytic", [&](double t) { return ecs_origin_value(a, {n, t}); });
}

double ets_origin_value(double nbar, ChannelParams params) {
  require_params(params, "ets_origin_value");
  if (!(nbar >= 0.0)) throw DomainError("ets_origin_value: nbar must be >= 0");
  const double n = params.n;
  const double e = std::exp(params.gamma_t);
  const double w = 1.0 + 2.0 * n;
  const double xi = 2.0 * (nbar - n) + w * e;
  const double kappa = -8.0 * (nbar - n) * (1.0 + n) + 2.0 * w * w * e * e + 4.0 * (nbar * w - w * w) * e;
  return kappa * e * kInvPi / (xi * xi * xi);
}

OriginTrajectory ets_origin_trajectory(double nbar, double n, const std::vector<double>& gamma_ts) {
  require_increasing(gamma_ts, "ets_origin_trajectory");
  return sample(gamma_ts, "analytic", [&](double t) { return ets_origin_value(nbar, {n, t}); });
}

double fock_origin_value(const std::vector<double>& populations, ChannelParams params) {
  require_params(params, "fock_origin_value");
  const auto [sigma, shrink] = ou_propagator(params);
  const double s2 = shrink * shrink;
  const double ratio = (sigma - s2) / (sigma + s2);
  double power = 1.0;
  double sum = 0.0;
  for (double p : populations) {
    sum += p * power;
    power *= ratio;
  }
  return 2.0 * kInvPi * sum / (sigma + s2);
}

OriginTrajectory fock_origin_trajectory(const DensityMatrix& rho, double n, const std::vector<double>& gamma_ts) {
  require_increasing(gamma_ts, "fock_origin_trajectory");
  const auto pops = rho.populations();
  return sample(gamma_ts, "analytic", [&](double t) { return fock_origin_value(pops, {n, t}); });
}

std::size_t evolved_dimension(std::size_t initial_dim, double n, double gamma_t_max) {
  return initial_dim + static_cast<std::size_t>(std::ceil(8.0 * n * gamma_t_max)) + 16;
}

DensityMatrix evolve_lindblad(const DensityMatrix& rho0, const ChannelParams& params, std::size_t steps,
                              const LindbladOptions& options, LindbladDiagnostics* diagnostics) {
  require_params(params, "evolve_lindblad");
  LindbladDiagnostics local;
  LindbladDiagnostics& diag = diagnostics ? *diagnostics : local;
  LindbladStepper stepper(headroom(rho0, params.n, params.gamma_t, options.dim_cap), params.n, options, diag);
  stepper.advance(params.gamma_t, steps);
  return DensityMatrix(stepper.rho());
}

OriginTrajectory lindblad_origin_trajectory(const DensityMatrix& rho0, double n, const std::vector<double>& gamma_ts,
                                            const LindbladOptions& options, LindbladDiagnostics* diagnostics) {
  require_increasing(gamma_ts, "lindblad_origin_trajectory");
  require_params({n, 0.0}, "lindblad_origin_trajectory");
  LindbladDiagnostics local;
  LindbladDiagnostics& diag = diagnostics ? *diagnostics : local;
  const double t_max = gamma_ts.empty() ? 0.0 : gamma_ts.back();
  LindbladStepper stepper(headroom(rho0, n, t_max, options.dim_cap), n, options, diag);
  OriginTrajectory traj{gamma_ts, {}, "lindblad"};
  double now = 0.0;
  for (double t : gamma_ts) {
    stepper.advance(t - now, 0);
    now = t;
    traj.w00.push_back(2.0 * kInvPi * stepper.parity());
  }
  return traj;
}

WignerGrid propagate_wigner_gaussian(const WignerGrid& grid0, const ChannelParams& params) {
  require_params(params, "propagate_wigner_gaussian");
  if (params.gamma_t == 0.0) return grid0;
  const auto& w = grid0.window;
  const auto [sigma, shrink] = ou_propagator(params);
  // Kernel width measured on the initial grid: std of exp(-2 s^2 (q0 - q/s)^2 / sigma).
  const double kernel_std = std::sqrt(sigma) / (2.0 * shrink);
  if (kernel_std < std::max(w.dq(), w.dp()))
    throw NumericalError("propagate_wigner_gaussian: kernel width " + std::to_string(kernel_std) +
                         " is below the grid spacing; evaluate W directly at this decay time");

  auto kernel = [&](std::size_t n, double (GridWindow::*coord)(std::size_t) const) {
    Eigen::MatrixXd k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double d = (w.*coord)(i) - shrink * (w.*coord)(j);
        k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::exp(-2.0 * d * d / sigma);
      }
    return k;
  };
  const Eigen::MatrixXd kq = kernel(w.nq, &GridWindow::q);
  const Eigen::MatrixXd kp = kernel(w.np, &GridWindow::p);
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMatrix> w0(grid0.values.data(), static_cast<Eigen::Index>(w.nq), static_cast<Eigen::Index>(w.np));

  WignerGrid out{w, std::vector<double>(grid0.values.size()), grid0.convention};
  Eigen::Map<RowMatrix> w1(out.values.data(), static_cast<Eigen::Index>(w.nq), static_cast<Eigen::Index>(w.np));
  w1 = (2.0 * kInvPi / sigma * w.dq() * w.dp()) * (kq * w0 * kp.transpose());

  const double before = grid0.integral();
  const double after = out.integral();
  if (std::abs(after - before) > 1e-3)
    throw WindowError("propagate_wigner_gaussian: normalization changed from " + std::to_string(before) + " to " +
                      std::to_string(after) + "; widen the window");
  return out;
}

double gaussian_propagated_point(const DensityMatrix& rho0, PhasePoint pt, const ChannelParams& params) {
  require_params(params, "gaussian_propagated_point");
  if (params.gamma_t == 0.0) return wigner_point(rho0, pt);
  const auto [sigma, shrink] = ou_propagator(params);
  const double kernel_std = std::sqrt(sigma) / (2.0 * shrink);
  const double cq = pt.q / shrink;
  const double cp = pt.p / shrink;
  const GridWindow support = default_window(rho0, 2);
  const double reach = 8.0 * kernel_std;
  const double q_lo = std::max(support.q_min, cq - reach), q_hi = std::min(support.q_max, cq + reach);
  const double p_lo = std::max(support.p_min, cp - reach), p_hi = std::min(support.p_max, cp + reach);
  if (!(q_hi > q_lo) || !(p_hi > p_lo)) return 0.0;

  const double h_max = std::min(0.05, 0.5 * kernel_std);
  const auto nq = static_cast<std::size_t>(std::ceil((q_hi - q_lo) / h_max)) + 1;
  const auto np = static_cast<std::size_t>(std::ceil((p_hi - p_lo) / h_max)) + 1;
  const WignerGrid w0 = wigner_grid(rho0, GridWindow{q_lo, q_hi, p_lo, p_hi, nq, np});
  const double dq = w0.window.dq(), dp = w0.window.dp();

  double sum = 0.0;
  std::vector<double> kp(np);
  for (std::size_t j = 0; j < np; ++j) {
    const double d = pt.p - shrink * w0.window.p(j);
    kp[j] = std::exp(-2.0 * d * d / sigma);
  }
  for (std::size_t i = 0; i < nq; ++i) {
    const double d = pt.q - shrink * w0.window.q(i);
    const double kq = std::exp(-2.0 * d * d / sigma);
    // Trapezoid weights: half at the edges of the box.
    const double wq = (i == 0 || i + 1 == nq) ? 0.5 : 1.0;
    double row = 0.0;
    for (std::size_t j = 0; j < np; ++j) {
      const double wp = (j == 0 || j + 1 == np) ? 0.5 : 1.0;
      row += wp * kp[j] * w0.at(i, j);
    }
    sum += wq * kq * row;
  }
  return 2.0 * kInvPi / sigma * sum * dq * dp;
}

OriginTrajectory gaussian_origin_trajectory(const DensityMatrix& rho0, double n, const std::vector<double>& gamma_ts) {
  require_increasing(gamma_ts, "gaussian_origin_trajectory");
  return sample(gamma_ts, "gaussian", [&](double t) { return gaussian_propagated_point(rho0, {0.0, 0.0}, {n, t}); });
}

GridWindow fd_window(const DensityMatrix& rho0, double n, double spacing, double edge_value) {
  if (!(spacing > 0.0)) throw ConfigError("fd_window: spacing must be positive");
  require_params({n, 0.0}, "fd_window");
  constexpr int kRing = 64;
  auto edge = [&](double radius) {
    double m = 0.0;
    for (int k = 0; k < kRing; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / kRing;
      m = std::max(m, std::abs(wigner_point(rho0, {radius * std::cos(phi), radius * std::sin(phi)})));
    }
    const double width = 1.0 + 2.0 * n;
    return std::max(m, 2.0 * kInvPi / width * std::exp(-2.0 * radius * radius / width));
  };
  double half = 3.0;
  while (edge(half) > edge_value) {
    half += 0.25;
    if (half > 60.0) throw WindowError("fd_window: state does not decay within |alpha| < 60");
  }
  const auto cells = static_cast<std::size_t>(std::ceil(half / spacing));
  const double h = half / static_cast<double>(cells);
  const std::size_t points = 2 * cells + 1;
  return GridWindow{-h * cells, h * cells, -h * cells, h * cells, points, points};
}

namespace {

class FdSolver {
 public:
  FdSolver(const WignerGrid& grid0, double n, const FdOptions& options)
      : grid_(grid0), options_(options) {
    const auto& w = grid_.window;
    if (w.nq < 5 || w.np < 5) throw ConfigError("propagate_wigner_fd: need at least 5 points per axis");
    const double cfl_limit = options.scheme == FdScheme::ftcs ? 0.5 : 0.52;
    if (!(options.cfl > 0.0) || options.cfl > cfl_limit)
      throw ConfigError("propagate_wigner_fd: CFL factor " + std::to_string(options.cfl) + " outside (0, " +
                        std::to_string(cfl_limit) + "] for the chosen explicit scheme");
    diffusion_ = (2.0 * n + 1.0) / 8.0;
    const double h = std::min(w.dq(), w.dp());
    dt_max_ = options.cfl * h * h / (2.0 * diffusion_);
    const double drift = 0.5 * std::max({std::abs(w.q_min), std::abs(w.q_max), std::abs(w.p_min), std::abs(w.p_max)});
    if (drift * std::max(w.dq(), w.dp()) / diffusion_ > 2.0)
      throw ConfigError("propagate_wigner_fd: cell Peclet number above 2; refine the grid");
    if (grid_.boundary_max_abs() > options.boundary_limit)
      throw WindowError("propagate_wigner_fd: initial grid is not negligible on the window edge");
    q_.resize(w.nq);
    p_.resize(w.np);
    for (std::size_t i = 0; i < w.nq; ++i) q_[i] = w.q(i);
    for (std::size_t j = 0; j < w.np; ++j) p_[j] = w.p(j);
    const std::size_t size = grid_.values.size();
    k1_.assign(size, 0.0);
    if (options.scheme == FdScheme::rk4_central4) {
      k2_.assign(size, 0.0);
      k3_.assign(size, 0.0);
      k4_.assign(size, 0.0);
      stage_.assign(size, 0.0);
    }
    mass0_ = grid_.integral();
  }

  void advance(double duration) {
    if (duration <= 0.0) return;
    const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(duration / dt_max_ - 1e-9)));
    const double dt = duration / static_cast<double>(steps);
    for (std::size_t s = 0; s < steps; ++s) step(dt);
    const double mass = grid_.integral();
    if (std::abs(mass - mass0_) > options_.outflow_limit * std::abs(mass0_))
      throw WindowError("propagate_wigner_fd: " + std::to_string(std::abs(mass - mass0_)) +
                        " of the mass left through the window edge; widen the window");
  }

  const WignerGrid& grid() const { return grid_; }

 private:
  void step(double dt) {
    auto& u = grid_.values;
    const std::size_t size = u.size();
    if (options_.scheme == FdScheme::ftcs) {
      rhs(u, k1_);
      for (std::size_t c = 0; c < size; ++c) u[c] += dt * k1_[c];
      return;
    }
    rhs(u, k1_);
    for (std::size_t c = 0; c < size; ++c) stage_[c] = u[c] + 0.5 * dt * k1_[c];
    rhs(stage_, k2_);
    for (std::size_t c = 0; c < size; ++c) stage_[c] = u[c] + 0.5 * dt * k2_[c];
    rhs(stage_, k3_);
    for (std::size_t c = 0; c < size; ++c) stage_[c] = u[c] + dt * k3_[c];
    rhs(stage_, k4_);
    for (std::size_t c = 0; c < size; ++c) u[c] += dt / 6.0 * (k1_[c] + 2.0 * k2_[c] + 2.0 * k3_[c] + k4_[c]);
  }

  // (1/2)(d_q q + d_p p) W + D (d_q^2 + d_p^2) W in units gamma = 1; zero on the edge ring.
  // Centered second-order stencils, or fourth-order ones away from the first interior ring.
  void rhs(const std::vector<double>& u, std::vector<double>& out) const {
    const auto& w = grid_.window;
    const std::size_t nq = w.nq, np = w.np;
    const double hq = w.dq(), hp = w.dp();
    const bool high = options_.scheme == FdScheme::rk4_central4;
    for (std::size_t i = 0; i < nq; ++i) {
      for (std::size_t j = 0; j < np; ++j) {
        const std::size_t c = i * np + j;
        if (i == 0 || j == 0 || i + 1 == nq || j + 1 == np) {
          out[c] = 0.0;
          continue;
        }
        double drift_q, drift_p, diff_q, diff_p;
        if (high && i >= 2 && i + 2 < nq) {
          drift_q = (-q_[i + 2] * u[c + 2 * np] + 8.0 * q_[i + 1] * u[c + np] - 8.0 * q_[i - 1] * u[c - np] +
                     q_[i - 2] * u[c - 2 * np]) / (12.0 * hq);
          diff_q = (-u[c + 2 * np] + 16.0 * u[c + np] - 30.0 * u[c] + 16.0 * u[c - np] - u[c - 2 * np]) / (12.0 * hq * hq);
        } else {
          drift_q = (q_[i + 1] * u[c + np] - q_[i - 1] * u[c - np]) / (2.0 * hq);
          diff_q = (u[c + np] - 2.0 * u[c] + u[c - np]) / (hq * hq);
        }
        if (high && j >= 2 && j + 2 < np) {
          drift_p = (-p_[j + 2] * u[c + 2] + 8.0 * p_[j + 1] * u[c + 1] - 8.0 * p_[j - 1] * u[c - 1] +
                     p_[j - 2] * u[c - 2]) / (12.0 * hp);
          diff_p = (-u[c + 2] + 16.0 * u[c + 1] - 30.0 * u[c] + 16.0 * u[c - 1] - u[c - 2]) / (12.0 * hp * hp);
        } else {
          drift_p = (p_[j + 1] * u[c + 1] - p_[j - 1] * u[c - 1]) / (2.0 * hp);
          diff_p = (u[c + 1] - 2.0 * u[c] + u[c - 1]) / (hp * hp);
        }
        out[c] = 0.5 * (drift_q + drift_p) + diffusion_ * (diff_q + diff_p);
      }
    }
  }

  WignerGrid grid_;
  FdOptions options_;
  std::vector<double> q_, p_;
  std::vector<double> k1_, k2_, k3_, k4_, stage_;
  double diffusion_ = 0.0;
  double dt_max_ = 0.0;
  double mass0_ = 0.0;
};

}  // namespace

WignerGrid propagate_wigner_fd(const WignerGrid& grid0, const ChannelParams& params, const FdOptions& options) {
  require_params(params, "propagate_wigner_fd");
  FdSolver solver(grid0, params.n, options);
  solver.advance(params.gamma_t);
  return solver.grid();
}

OriginTrajectory fd_origin_trajectory(const WignerGrid& grid0, double n, const std::vector<double>& gamma_ts,
                                      const FdOptions& options) {
  require_increasing(gamma_ts, "fd_origin_trajectory");
  require_params({n, 0.0}, "fd_origin_trajectory");
  FdSolver solver(grid0, n, options);
  OriginTrajectory traj{gamma_ts, {}, "fd"};
  double now = 0.0;
  for (double t : gamma_ts) {
    solver.advance(t - now);
    now = t;
    traj.w00.push_back(solver.grid().interpolate(0.0, 0.0));
  }
  return traj;
}

int sign_of(double value, double zero_tolerance) {
  if (value > zero_tolerance) return 1;
  if (value < -zero_tolerance) return -1;
  return 0;
}

namespace {

// Fritsch-Carlson slopes of the monotone piecewise-cubic interpolant.
std::vector<double> pchip_slopes(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = t.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = t[i + 1] - t[i];
    delta[i] = (y[i + 1] - y[i]) / h[i];
  }
  d[0] = delta[0];
  d[n - 1] = delta[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) continue;
    const double w1 = 2.0 * h[i] + h[i - 1], w2 = h[i] + 2.0 * h[i - 1];
    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
  }
  return d;
}

double hermite(double t0, double t1, double y0, double y1, double d0, double d1, double t) {
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1;
}

}  // namespace

ZeroEvents origin_zero_crossings(const OriginTrajectory& traj, const std::function<double(double)>& generator,
                                 double touch_tolerance) {
  if (traj.times.size() != traj.w00.size()) throw ConfigError("origin_zero_crossings: ragged trajectory");
  ZeroEvents events;
  const std::vector<double> slopes = generator ? std::vector<double>{} : pchip_slopes(traj.times, traj.w00);
  std::optional<std::size_t> last;     // last sample with a definite sign
  std::vector<std::size_t> zeros;      // run of near-zero samples since `last`

  auto smallest = [&](const std::vector<std::size_t>& run) {
    return *std::min_element(run.begin(), run.end(),
                             [&](std::size_t a, std::size_t b) { return std::abs(traj.w00[a]) < std::abs(traj.w00[b]); });
  };

  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const int s = sign_of(traj.w00[i], touch_tolerance);
    if (s == 0) {
      zeros.push_back(i);
      continue;
    }
    if (last) {
      const int s_last = sign_of(traj.w00[*last], touch_tolerance);
      if (s_last != s) {
        const double lo = traj.times[*last], hi = traj.times[i];
        double root;
        if (generator) {
          root = bisect(generator, lo, hi, 1e-13);
        } else if (!zeros.empty()) {
          root = traj.times[smallest(zeros)];
        } else {
          const std::size_t a = *last;
          root = bisect(
              [&](double t) { return hermite(lo, hi, traj.w00[a], traj.w00[i], slopes[a], slopes[i], t); }, lo, hi,
              1e-13);
        }
        events.crossings.push_back(root);
      } else if (!zeros.empty()) {
        events.touches.push_back(traj.times[smallest(zeros)]);
      }
    } else if (!zeros.empty()) {
      events.touches.push_back(traj.times[smallest(zeros)]);
    }
    zeros.clear();
    last = i;
  }
  if (!zeros.empty()) events.touches.push_back(traj.times[smallest(zeros)]);
  return events;
}

std::string classify_regime(const OriginTrajectory& traj, const ZeroEvents& events, double tc, double time_tolerance,
                            double zero_tolerance) {
  if (traj.w00.empty()) throw ConfigError("classify_regime: empty trajectory");
  // A vanishing initial value counts as non-negative.
  std::vector<int> signs;
  int first = sign_of(traj.w00.front(), zero_tolerance);
  if (first == 0) {
    signs.push_back(1);
    for (std::size_t i = 1; i < traj.w00.size() && traj.times[i] < tc - time_tolerance; ++i) {
      const int s = sign_of(traj.w00[i], zero_tolerance);
      if (s != 0) {
        if (s < 0) signs.push_back(-1);
        break;
      }
    }
  } else {
    signs.push_back(first);
  }
  for (double t : events.crossings)
    if (t > traj.times.front() && t < tc - time_tolerance) signs.push_back(-signs.back());

  auto word = [](int s) { return s > 0 ? std::string("positive") : std::string("negative"); };
  if (signs.size() == 1) return word(signs[0]) + "-throughout";
  if (signs.size() == 2) return word(signs[0]) + "-then-" + word(signs[1]);
  std::string label = word(signs[0]);
  for (std::size_t i = 1; i < signs.size(); ++i) label += "-" + word(signs[i]);
  return label;
}

ZeroEvents fock_origin_zero_events(const std::vector<double>& populations, double n, double t_min, double t_max) {
  require_params({n, t_min}, "fock_origin_zero_events");
  if (!(t_max >= t_min)) throw ConfigError("fock_origin_zero_events: need t_min <= t_max");
  std::size_t size = populations.size();
  while (size > 0 && populations[size - 1] == 0.0) --size;
  if (size > kMaxRootDegree + 1)
    throw ConfigError("fock_origin_zero_events: populations beyond level " + std::to_string(kMaxRootDegree));
  ZeroEvents events;
  if (size == 0) return events;

  const double a = 1.0 + 2.0 * n;
  auto r_of = [&](double t) {
    const Propagator pr = ou_propagator({n, t});
    const double s2 = pr.shrink * pr.shrink;
    return (pr.sigma - s2) / (pr.sigma + s2);
  };
  auto t_of = [&](double r) { return -std::log(a * (1.0 - r) / (a * (1.0 - r) + 1.0 + r)); };
  const double ra = r_of(t_min);
  const double w = r_of(t_max) - ra;

  // sum_l p_l (ra + w u)^l in powers of u, by Horner composition.
  const std::size_t degree = size - 1;
  std::vector<double> c(size, 0.0);
  for (std::size_t l = size; l-- > 0;) {
    for (std::size_t j = degree; j > 0; --j) c[j] = ra * c[j] + w * c[j - 1];
    c[0] = ra * c[0] + populations[l];
  }
  // Power basis to Bernstein basis on [0, 1]: b_i = sum_{j<=i} C(i,j)/C(N,j) c_j.
  std::vector<double> b(size, 0.0);
  for (std::size_t i = 0; i <= degree; ++i) {
    double ratio = 1.0;  // C(i,j)/C(N,j), starting at j = 0
    for (std::size_t j = 0; j <= i; ++j) {
      b[i] += ratio * c[j];
      ratio *= static_cast<double>(i - j) / static_cast<double>(degree - j == 0 ? 1 : degree - j);
    }
  }

  std::vector<double> absolute(populations.begin(), populations.begin() + static_cast<std::ptrdiff_t>(size));
  auto at_end = [&](double r) {
    double value = 0.0, scale = 0.0, power = 1.0;
    for (double p : absolute) {
      value += p * power;
      scale += p * std::abs(power);
      power *= r;
    }
    return std::abs(value) <= 1e-9 * scale;
  };
  if (at_end(ra)) events.touches.push_back(t_min);
  if (w > 0.0) {
    for (const auto& root : bernstein_roots(b)) {
      const double t = std::clamp(t_of(ra + w * root.x), t_min, t_max);
      (root.crossing ? events.crossings : events.touches).push_back(t);
    }
    if (at_end(ra + w)) events.touches.push_back(t_max);
  }
  return events;
}

std::vector<double> ebs_parity_bernstein(int k, int M) {
  if (k < 0 || M < 0) throw DomainError("ebs_parity_bernstein: k and M must be >= 0");
  std::vector<double> b(static_cast<std::size_t>(M) + 1);
  for (int l = 0; l <= M; ++l) {
    double rising = 1.0;
    for (int j = 1; j <= k; ++j) rising *= l + j;
    b[static_cast<std::size_t>(l)] = ((l + k) % 2 == 0 ? 1.0 : -1.0) * rising;
  }
  return b;
}

double bernstein_value(const std::vector<double>& coefficients, double x) {
  if (coefficients.empty()) return 0.0;
  std::vector<double> c = coefficients;
  for (std::size_t r = 1; r < c.size(); ++r)
    for (std::size_t i = 0; i + r < c.size(); ++i) c[i] = (1.0 - x) * c[i] + x * c[i + 1];
  return c[0];
}

std::vector<ParityRoot> initial_parity_roots(int k, int M) {
  if (k < 1) throw DomainError("initial_parity_roots: k must be >= 1");
  if (M < 0 || M > 30) throw DomainError("initial_parity_roots: M must lie in [0, 30]");
  std::vector<ParityRoot> roots;
  for (const auto& r : bernstein_roots(ebs_parity_bernstein(k, M))) roots.push_back({std::sqrt(r.x), r.crossing});
  return roots;
}

}  // namespace qparity
