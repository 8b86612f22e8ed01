#include "qparity/wigner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <thread>

#include "qparity/errors.hpp"

namespace qparity {

namespace {

constexpr double kImaginaryResidueLimit = 1e-8;
constexpr double kBoundaryNegativityLimit = 1e-10;

std::string format_residue(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

// Fills f(m, n) = <m|D(beta)|n> for m, n < dim. For m >= n
//   f(m, n) = sqrt(n!/m!) beta^(m-n) e^{-|beta|^2/2} L_n^(m-n)(|beta|^2)
// and f(n, m) = (-conj(beta))^(m-n) / beta^(m-n) f(m, n). The Laguerre values run along the three-term
// recurrence in n with a separate log scale, so large |beta| neither overflows nor cancels.
void displacement_elements(Complex beta, Eigen::MatrixXcd& f) {
  const Eigen::Index dim = f.rows();
  const double r = std::abs(beta);
  if (r == 0.0) {
    f.setIdentity();
    return;
  }
  const double x = r * r;
  const Complex phase = beta / r;
  const Complex back = -std::conj(beta) / r;
  constexpr double kRescale = 1e150;
  for (Eigen::Index k = 0; k < dim; ++k) {
    const Complex up = std::pow(phase, static_cast<double>(k));
    const Complex down = std::pow(back, static_cast<double>(k));
    const double kd = static_cast<double>(k);
    // 0.5 log(n!/(n+k)!) + k log r - x/2, advanced in n.
    double log_prefactor = -0.5 * std::lgamma(kd + 1) + kd * std::log(r) - 0.5 * x;
    double prev = 0.0, cur = 1.0, log_scale = 0.0;
    for (Eigen::Index n = 0; n + k < dim; ++n) {
      if (n > 0) log_prefactor += 0.5 * (std::log(static_cast<double>(n)) - std::log(static_cast<double>(n) + kd));
      if (n == 1) {
        prev = cur;
        cur = 1.0 + kd - x;
      } else if (n > 1) {
        const double nn = static_cast<double>(n - 1);
        const double next = ((2 * nn + 1 + kd - x) * cur - (nn + kd) * prev) / (nn + 1);
        prev = cur;
        cur = next;
      }
      if (std::abs(cur) > kRescale) {
        cur /= kRescale;
        prev /= kRescale;
        log_scale += std::log(kRescale);
      }
      const double value = cur * std::exp(log_prefactor + log_scale);
      f(n + k, n) = up * value;
      f(n, n + k) = down * value;
    }
  }
}

Complex displaced_parity_trace(const DensityMatrix& rho, PhasePoint pt, Eigen::MatrixXcd& f) {
  // D(alpha) Pi D^dagger(alpha) = D(2 alpha) Pi, and Pi|n> = (-1)^n |n>.
  displacement_elements(2.0 * Complex(pt.q, pt.p), f);
  const auto& r = rho.matrix();
  const Eigen::Index dim = r.rows();
  Complex sum{};
  for (Eigen::Index n = 0; n < dim; ++n) {
    Complex column{};
    for (Eigen::Index m = 0; m < dim; ++m) column += r(n, m) * f(m, n);
    sum += (n % 2 == 0) ? column : -column;
  }
  return sum * (2.0 / std::numbers::pi);
}

double wigner_with_buffer(const DensityMatrix& rho, PhasePoint pt, Eigen::MatrixXcd& f) {
  const Complex sum = displaced_parity_trace(rho, pt, f);
  if (std::abs(sum.imag()) > kImaginaryResidueLimit) {
    throw NumericalError("wigner_point: imaginary residue " + format_residue(sum.imag()) + " at (" +
                         std::to_string(pt.q) + ", " + std::to_string(pt.p) + ")");
  }
  return sum.real();
}

}  // namespace

double WignerGrid::integral() const {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum * window.dq() * window.dp();
}

double WignerGrid::interpolate(double q, double p) const {
  const auto& w = window;
  const double slack = 1e-12 * std::max(1.0, std::abs(w.q_max - w.q_min));
  if (q < w.q_min - slack || q > w.q_max + slack || p < w.p_min - slack || p > w.p_max + slack)
    throw WindowError("WignerGrid::interpolate: point outside the window");
  const double x = std::clamp((q - w.q_min) / w.dq(), 0.0, static_cast<double>(w.nq - 1));
  const double y = std::clamp((p - w.p_min) / w.dp(), 0.0, static_cast<double>(w.np - 1));
  const auto i = std::min(static_cast<std::size_t>(x), w.nq - 2);
  const auto j = std::min(static_cast<std::size_t>(y), w.np - 2);
  const double tx = x - static_cast<double>(i);
  const double ty = y - static_cast<double>(j);
  return (1 - tx) * (1 - ty) * at(i, j) + tx * (1 - ty) * at(i + 1, j) + (1 - tx) * ty * at(i, j + 1) +
         tx * ty * at(i + 1, j + 1);
}

double WignerGrid::boundary_max_abs() const {
  double m = 0.0;
  const auto nq = window.nq;
  const auto np = window.np;
  for (std::size_t i = 0; i < nq; ++i) m = std::max({m, std::abs(at(i, 0)), std::abs(at(i, np - 1))});
  for (std::size_t j = 0; j < np; ++j) m = std::max({m, std::abs(at(0, j)), std::abs(at(nq - 1, j))});
  return m;
}

GridWindow default_window(double nbar_effective, std::size_t points) {
  const double half = std::max(3.0, 3.0 * std::sqrt((1.0 + 2.0 * std::max(0.0, nbar_effective)) / 2.0));
  return GridWindow{-half, half, -half, half, points, points};
}

GridWindow default_window(const DensityMatrix& rho, std::size_t points) {
  return default_window(mean_photon_number(rho), points);
}

double wigner_point(const DensityMatrix& rho, PhasePoint pt) {
  const auto dim = static_cast<Eigen::Index>(rho.dim());
  Eigen::MatrixXcd f(dim, dim);
  return wigner_with_buffer(rho, pt, f);
}

double wigner_imag_residue(const DensityMatrix& rho, PhasePoint pt) {
  const auto dim = static_cast<Eigen::Index>(rho.dim());
  Eigen::MatrixXcd f(dim, dim);
  return displaced_parity_trace(rho, pt, f).imag();
}

WignerGrid wigner_grid(const DensityMatrix& rho, const GridWindow& window) {
  if (window.nq < 2 || window.np < 2) throw ConfigError("wigner_grid: need at least 2 points per axis");
  if (!(window.q_max > window.q_min) || !(window.p_max > window.p_min) || !std::isfinite(window.q_min) ||
      !std::isfinite(window.q_max) || !std::isfinite(window.p_min) || !std::isfinite(window.p_max))
    throw ConfigError("wigner_grid: window bounds must be finite and increasing");

  WignerGrid grid{window, std::vector<double>(window.nq * window.np), kWignerConvention};
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(1, window.nq));

  // Rows are dealt round-robin; every value depends only on its own point.
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](std::size_t worker) {
    try {
      const auto dim = static_cast<Eigen::Index>(rho.dim());
      Eigen::MatrixXcd f(dim, dim);
      for (std::size_t i = worker; i < window.nq; i += workers)
        for (std::size_t j = 0; j < window.np; ++j) grid.at(i, j) = wigner_with_buffer(rho, {window.q(i), window.p(j)}, f);
    } catch (...) {
      errors[worker] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return grid;
}

double negativity_volume(const WignerGrid& grid) {
  const auto& w = grid.window;
  for (std::size_t i = 0; i < w.nq; ++i)
    for (std::size_t j : {std::size_t{0}, w.np - 1})
      if (grid.at(i, j) < -kBoundaryNegativityLimit) throw WindowError("negativity_volume: negative values on the window edge");
  for (std::size_t j = 0; j < w.np; ++j)
    for (std::size_t i : {std::size_t{0}, w.nq - 1})
      if (grid.at(i, j) < -kBoundaryNegativityLimit) throw WindowError("negativity_volume: negative values on the window edge");
  double volume = 0.0;
  for (double v : grid.values) volume += std::max(0.0, -v);
  return volume * w.dq() * w.dp();
}

}  // namespace qparity
