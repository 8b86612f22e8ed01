#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "qparity/fock.hpp"

namespace qparity {

/// Phase-space convention shared by every Wigner value in the library:
/// alpha = q + i p, integral of W over dq dp equals 1, W(0,0) = (2/pi) <Pi>,
/// vacuum W = (2/pi) exp(-2(q^2 + p^2)).
inline constexpr const char* kWignerConvention = "alpha=q+ip; int W dq dp = 1; W(0,0) = (2/pi)<Pi>";

struct PhasePoint {
  double q = 0.0;
  double p = 0.0;
};

/// Rectangular sampling window. Both endpoints are sample points.
struct GridWindow {
  double q_min = -3.0;
  double q_max = 3.0;
  double p_min = -3.0;
  double p_max = 3.0;
  std::size_t nq = 161;
  std::size_t np = 161;

  double dq() const { return (q_max - q_min) / static_cast<double>(nq - 1); }
  double dp() const { return (p_max - p_min) / static_cast<double>(np - 1); }
  double q(std::size_t i) const { return q_min + static_cast<double>(i) * dq(); }
  double p(std::size_t j) const { return p_min + static_cast<double>(j) * dp(); }
};

/// Sampled W(q, p). values[i * np + j] holds W(q_i, p_j).
struct WignerGrid {
  GridWindow window;
  std::vector<double> values;
  std::string convention = kWignerConvention;

  double at(std::size_t i, std::size_t j) const { return values[i * window.np + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * window.np + j]; }

  /// Riemann sum of W dq dp.
  double integral() const;
  /// Bilinear interpolation inside the window; throws WindowError outside.
  double interpolate(double q, double p) const;
  /// Largest |W| on the outermost ring of samples.
  double boundary_max_abs() const;
};

/// Default window: +-max(3, 3 sqrt((1 + 2 nbar_eff) / 2)) on both axes, 161 points per axis.
GridWindow default_window(double nbar_effective, std::size_t points = 161);
/// Default window for a state, using its mean photon number.
GridWindow default_window(const DensityMatrix& rho, std::size_t points = 161);

/// W(q, p) = (2/pi) Tr[rho D(alpha) Pi D^dagger(alpha)]. Throws NumericalError when the
/// imaginary residue of the trace exceeds 1e-8.
double wigner_point(const DensityMatrix& rho, PhasePoint pt);

/// Imaginary part of the same trace, which Hermiticity makes zero up to rounding.
double wigner_imag_residue(const DensityMatrix& rho, PhasePoint pt);

WignerGrid wigner_grid(const DensityMatrix& rho, const GridWindow& window);

/// Sum of max(0, -W) dq dp. Throws WindowError when the window edge is negative.
double negativity_volume(const WignerGrid& grid);

}  // namespace qparity
