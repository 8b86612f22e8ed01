#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qparity/errors.hpp"
#include "qparity/fock.hpp"
#include "qparity/thermal_channel.hpp"

namespace qparity::cli {

/// State-spec text that failed to parse; position is a 0-based character offset.
class ParseError : public ConfigError {
 public:
  ParseError(const std::string& message, std::size_t position)
      : ConfigError("parse error at position " + std::to_string(position) + ": " + message), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Parses the flat state language: a family token followed by key=value pairs.
///   fock l=3            coherent alpha=0.5+0.2i   thermal nbar=1    binomial eta=0.5 M=2
///   ecs alpha=0.5       ebs eta=0.5 M=2 k=2       ets nbar=1
/// Base families accept an optional k=<int> that adds k photons; ecs/ebs/ets default to k=1.
StateSpec parse_state_spec(const std::string& text);

enum class Backend { analytic, lindblad, gaussian, fd };
Backend parse_backend(const std::string& name);
std::string to_string(Backend backend);

/// Everything a run needs, resolved from flags and the optional config file.
struct RunConfig {
  std::string command;
  std::string state;
  double n = 0.0;
  double gt_min = 0.0;
  double gt_max = 1.5;
  std::size_t gt_steps = 150;
  std::vector<double> gt_list;  ///< explicit decay times (wigner-slice)
  std::string backend = "analytic";
  std::string check_backend;    ///< empty: no cross-check
  double tolerance = 0.0;       ///< 0: backend default (1e-6, or 1e-3 when fd is involved)
  std::size_t dim_cap = kDefaultDimCap;
  std::string out;
  unsigned seed = 0;            ///< reserved; every run is deterministic
  // surface
  int figure = 0;  ///< 2, 3 or 4 set k, M and n for the matching surface; 0 leaves them
  int k = 1;
  int M = 3;
  double eta_min = 0.0;
  double eta_max = 1.0;
  std::size_t eta_steps = 100;
  // wigner-slice
  std::string preset;
  std::optional<double> q_min;
  std::optional<double> q_max;
  std::size_t q_points = 161;
  // fd solver
  std::string fd_scheme = "rk4";
  double fd_spacing = 0.05;
  // rabi
  double tau_max = 0.0;   ///< 0: default 60 pi
  double dtau = 0.002;
  bool taper = false;
  std::string trace_out;
  std::string trace_in;
};

/// Decay-time samples gt_min + i (gt_max - gt_min) / gt_steps, i = 0..gt_steps.
std::vector<double> decay_times(const RunConfig& config);

/// W(0,0) trajectory of a state with the chosen backend. The analytic backend uses the
/// closed forms for single-photon ECS/ETS and the Fock-population form otherwise.
struct BackendOptions {
  LindbladOptions lindblad;
  FdOptions fd;
  double fd_spacing = 0.05;
};
OriginTrajectory origin_trajectory(const StateSpec& spec, const DensityMatrix& rho, double n,
                                   const std::vector<double>& gamma_ts, Backend backend,
                                   const BackendOptions& options = {});

/// Closed-form W(0,0, gamma t) matching the analytic backend.
double analytic_origin_value(const StateSpec& spec, const DensityMatrix& rho, ChannelParams params);

/// Zeros of a trajectory produced by `backend`. Analytic runs use the generating function
/// (exact polynomial roots for Fock-diagonal values, bisection on the closed forms); numeric
/// runs refine on the samples.
ZeroEvents zero_events(Backend backend, const StateSpec& spec, const DensityMatrix& rho, double n,
                       const OriginTrajectory& traj);

/// Tolerances used when labelling regimes: crossings within time_tolerance of gamma t_c are
/// attributed to the threshold itself.
double regime_time_tolerance(Backend backend);
inline constexpr double kRegimeZeroTolerance = 1e-8;

/// Commands write their report or CSV to `out` and return the process exit code.
int cmd_state(const RunConfig& config, std::ostream& out);
int cmd_parity_evolve(const RunConfig& config, std::ostream& out);
int cmd_surface(const RunConfig& config, std::ostream& out);
int cmd_wigner_slice(const RunConfig& config, std::ostream& out);
int cmd_thresholds(const RunConfig& config, std::ostream& out);
int cmd_rabi(const RunConfig& config, std::ostream& out);

/// Maps an error category to the process exit code: 2 config, 3 numerical, 4 truncation/window.
int exit_code(const Error& error);

/// Full command-line entry point.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qparity::cli
