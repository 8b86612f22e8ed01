#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qparity/fock.hpp"
#include "qparity/wigner.hpp"

namespace qparity {

/// Thermal environment with mean occupation n, probed at dimensionless decay time gamma*t.
struct ChannelParams {
  double n = 0.0;
  double gamma_t = 0.0;
};

/// Width sigma = (1 + 2n)(1 - e^{-gamma t}) and contraction s = e^{-gamma t / 2} of the
/// Ornstein-Uhlenbeck propagator solving the Wigner Fokker-Planck equation.
struct Propagator {
  double sigma;
  double shrink;
};
Propagator ou_propagator(const ChannelParams& params);

/// W(0,0) sampled along gamma*t.
struct OriginTrajectory {
  std::vector<double> times;
  std::vector<double> w00;
  std::string backend;
};

/// gamma t_c = ln((2 + 2n) / (1 + 2n)), after which photon-added states have no negativity.
double threshold_tc(double n);

/// gamma t_c1 = ln[(2|alpha|^2 (1+n) + 2n) / ((1+2n)(1+|alpha|^2))] for |alpha| >= 1.
/// Throws RegimeError below |alpha| = 1.
double threshold_tc1(double alpha_abs, double n);

/// Closed-form W(0,0,gamma t) of the single-photon-added coherent state.
double ecs_origin_value(double alpha_abs, ChannelParams params);
OriginTrajectory ecs_origin_trajectory(Complex alpha, double n, const std::vector<double>& gamma_ts);

/// Closed-form W(0,0,gamma t) of the single-photon-added thermal state.
double ets_origin_value(double nbar, ChannelParams params);
OriginTrajectory ets_origin_trajectory(double nbar, double n, const std::vector<double>& gamma_ts);

/// W(0,0,gamma t) of any state from its Fock populations: each |l><l| relaxes at the origin to
/// (2/pi) (sigma - s^2)^l / (sigma + s^2)^(l+1). Coherences never reach the origin.
double fock_origin_value(const std::vector<double>& populations, ChannelParams params);
OriginTrajectory fock_origin_trajectory(const DensityMatrix& rho, double n, const std::vector<double>& gamma_ts);

struct LindbladOptions {
  double step = 1e-3;               ///< gamma * dt of the RK4 integrator
  double tail_limit = 1e-7;         ///< population allowed in the top basis state
  double trace_drift_limit = 1e-8;
  std::size_t dim_cap = kDefaultDimCap;
};

struct LindbladDiagnostics {
  std::size_t dim = 0;
  double max_hermiticity_defect = 0.0;  ///< removed by symmetrization
  double max_trace_drift = 0.0;
  double max_tail_population = 0.0;
};

/// Basis size used when heating a state for a time gamma_t_max:
/// D + ceil(8 n gamma_t_max) + 16.
std::size_t evolved_dimension(std::size_t initial_dim, double n, double gamma_t_max);

/// rho(gamma t) of the thermal master equation by fixed-step RK4 in the truncated basis.
/// `steps` fixes the number of steps; 0 picks ceil(gamma_t / options.step).
DensityMatrix evolve_lindblad(const DensityMatrix& rho0, const ChannelParams& params, std::size_t steps = 0,
                              const LindbladOptions& options = {}, LindbladDiagnostics* diagnostics = nullptr);

/// (2/pi) <Pi> along increasing gamma_ts, integrating once through all samples.
OriginTrajectory lindblad_origin_trajectory(const DensityMatrix& rho0, double n, const std::vector<double>& gamma_ts,
                                            const LindbladOptions& options = {},
                                            LindbladDiagnostics* diagnostics = nullptr);

/// Grid-to-grid propagation by separable discrete convolution with the OU kernel.
/// Throws NumericalError (resolution) when the kernel is narrower than the grid spacing.
WignerGrid propagate_wigner_gaussian(const WignerGrid& grid0, const ChannelParams& params);

/// Propagated W at one point, integrating the initial Wigner function of rho against the OU
/// kernel on a quadrature grid refined to the kernel width.
double gaussian_propagated_point(const DensityMatrix& rho0, PhasePoint pt, const ChannelParams& params);
OriginTrajectory gaussian_origin_trajectory(const DensityMatrix& rho0, double n, const std::vector<double>& gamma_ts);

enum class FdScheme {
  ftcs,          ///< forward Euler, second-order centered differences
  rk4_central4,  ///< classical RK4, fourth-order centered differences
};

struct FdOptions {
  FdScheme scheme = FdScheme::rk4_central4;
  double cfl = 0.4;                   ///< dt = cfl * h^2 / (2 D), D = (2n+1)/8
  double boundary_limit = 1e-10;      ///< largest |W| allowed on the edge of grid0
  double outflow_limit = 1e-6;        ///< relative mass allowed to leave through the edge
};

/// Symmetric odd-sized window for the finite-difference solver: wide enough that both the initial Wigner
/// function and the stationary thermal one stay below `edge_value` on the boundary, with the
/// given spacing.
GridWindow fd_window(const DensityMatrix& rho0, double n, double spacing = 0.05, double edge_value = 1e-11);

/// Explicit finite-difference solution of the Wigner Fokker-Planck equation with zero Dirichlet edges.
WignerGrid propagate_wigner_fd(const WignerGrid& grid0, const ChannelParams& params, const FdOptions& options = {});

/// W(0,0) from the finite-difference solver, sampled at the requested times in one pass.
OriginTrajectory fd_origin_trajectory(const WignerGrid& grid0, double n, const std::vector<double>& gamma_ts,
                                      const FdOptions& options = {});

struct ZeroEvents {
  std::vector<double> crossings;  ///< sign changes
  std::vector<double> touches;    ///< |W| < touch tolerance without a sign change
};

/// Sign changes of a trajectory. With a generating function the bracket is refined by bisection
/// on it to 1e-13, otherwise on the monotone (PCHIP) cubic through the samples.
ZeroEvents origin_zero_crossings(const OriginTrajectory& traj,
                                 const std::function<double(double)>& generator = nullptr,
                                 double touch_tolerance = 1e-8);

/// Exact zeros of fock_origin_value over [t_min, t_max]: roots of sum_l p_l r^l in
/// r = (sigma - s^2)/(sigma + s^2), which rises monotonically from -1 with gamma t. Roots of even
/// multiplicity are touches, and so are zeros sitting on either end of the range. Supports
/// populations up to level 64.
ZeroEvents fock_origin_zero_events(const std::vector<double>& populations, double n, double t_min, double t_max);

/// Three-valued sign with tolerance.
int sign_of(double value, double zero_tolerance);

/// Regime label from the initial sign and the crossings strictly before gamma t_c, e.g.
/// "negative-throughout", "positive-then-negative", "negative-positive-negative".
std::string classify_regime(const OriginTrajectory& traj, const ZeroEvents& events, double tc,
                            double time_tolerance, double zero_tolerance);

struct ParityRoot {
  double eta;
  bool crossing;  ///< false: tangential touch
};

/// Bernstein coefficients (in x = eta^2) of the unnormalized initial parity of the k-photon EBS:
/// b_l = (-1)^(l+k) (l+k)!/l!.
std::vector<double> ebs_parity_bernstein(int k, int M);
/// Evaluates sum_l b_l C(M,l) x^l (1-x)^(M-l) by de Casteljau.
double bernstein_value(const std::vector<double>& coefficients, double x);

/// Roots in eta of the initial mean parity of the k-photon EBS, labeled crossing or touch.
std::vector<ParityRoot> initial_parity_roots(int k, int M);

}  // namespace qparity
