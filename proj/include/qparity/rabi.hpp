#pragma once

#include <cstddef>
#include <iosfwd>
#include <numbers>
#include <vector>

#include "qparity/fock.hpp"

namespace qparity {

/// Atomic populations of a resonant Jaynes-Cummings probe, atom initially excited.
/// taus are dimensionless interaction times lambda * t.
struct RabiTrace {
  std::vector<double> taus;
  std::vector<double> p_ground;
  std::vector<double> p_excited;
};

struct QuadratureOptions {
  double tau_max = 60.0 * std::numbers::pi;
  double dtau = 0.002;
  /// Gaussian roll-off over the second half of [0, tau_max].
  bool taper = false;
  /// Largest |Im| accepted before the real part is returned.
  double max_imag_residue = 1e-2;
};

/// Uniform samples 0, dtau, ..., up to tau_max.
std::vector<double> uniform_taus(double tau_max, double dtau);

/// P_g(tau) = sum_l rho_ll sin^2(tau sqrt(l+1)), P_e = 1 - P_g.
RabiTrace jc_trace(const DensityMatrix& rho_field, const std::vector<double>& taus);
RabiTrace jc_trace(const DensityMatrix& rho_field, const QuadratureOptions& options = {});

/// Mean parity of the field recovered from the atomic trace:
///   <Pi> = 4 / (pi sqrt(i)) * int_0^tau_max e^{i tau^2 / pi} [P_g - 1/2] dtau,
/// sqrt(i) = e^{i pi/4}, trapezoid rule on the trace's own uniform grid.
/// Throws ConfigError on non-uniform sampling and NumericalError when the imaginary part
/// exceeds options.max_imag_residue.
double fresnel_reconstruct(const RabiTrace& trace, const QuadratureOptions& options = {});

/// The complex integral before the real part is taken, with a free prefactor. Passing
/// 4/sqrt(i) (the uncorrected constant) gives pi <Pi> on Fock states.
Complex fresnel_integral(const RabiTrace& trace, Complex prefactor, bool taper = false);

struct ReconstructionRow {
  double tau_max;
  double dtau;
  double reconstructed;
  double imag_residue;
  double error;  ///< |reconstructed - mean_parity(rho)|
};

/// Reconstruction against the direct parity for each tau_max.
std::vector<ReconstructionRow> reconstruction_error_scan(const DensityMatrix& rho_field,
                                                         const std::vector<double>& tau_maxes,
                                                         double dtau = 0.002, bool taper = false);

/// CSV with columns tau,p_ground,p_excited (17 significant digits).
void write_trace_csv(std::ostream& out, const RabiTrace& trace);
/// Reads the same schema; lines starting with '#' are skipped.
RabiTrace read_trace_csv(std::istream& in);

}  // namespace qparity
