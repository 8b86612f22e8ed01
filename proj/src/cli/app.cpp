#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "qparity/cli.hpp"

namespace qparity::cli {

namespace {

void add_options(CLI::App& app, RunConfig& c) {
  app.add_option("--state", c.state, "state spec, e.g. \"ebs k=1 eta=0.5 M=2\"");
  app.add_option("--n", c.n, "thermal occupation of the environment")->check(CLI::NonNegativeNumber);
  app.add_option("--gt-min", c.gt_min, "first decay time gamma*t");
  app.add_option("--gt-max", c.gt_max, "last decay time gamma*t");
  app.add_option("--gt-steps", c.gt_steps, "number of decay-time intervals");
  app.add_option("--gt-list", c.gt_list, "explicit decay times (wigner-slice)")->delimiter(',');
  app.add_option("--backend", c.backend, "analytic | lindblad | gaussian | fd");
  app.add_option("--check-backend", c.check_backend, "second backend for cross-check mode");
  app.add_option("--tolerance", c.tolerance, "cross-check tolerance (0: backend default)");
  app.add_option("--dim-cap", c.dim_cap, "largest Fock dimension allowed");
  app.add_option("--out", c.out, "output file (default stdout)");
  app.add_option("--seed", c.seed, "reserved; runs are deterministic");
  app.add_option("--figure", c.figure, "surface preset: 2, 3 or 4");
  app.add_option("--k", c.k, "photons added (surface)");
  app.add_option("--M", c.M, "binomial M (surface)");
  app.add_option("--eta-min", c.eta_min, "lowest eta (surface)");
  app.add_option("--eta-max", c.eta_max, "highest eta (surface)");
  app.add_option("--eta-steps", c.eta_steps, "number of eta intervals (surface)");
  app.add_option("--preset", c.preset, "wigner-slice preset: 1,0,2 | 1,0.5,2 | 1,1,2");
  app.add_option_function<double>("--q-min", [&c](const double& v) { c.q_min = v; }, "slice start (default: state window)");
  app.add_option_function<double>("--q-max", [&c](const double& v) { c.q_max = v; }, "slice end (default: state window)");
  app.add_option("--q-points", c.q_points, "points along the slice");
  app.add_option("--fd-scheme", c.fd_scheme, "rk4 | ftcs");
  app.add_option("--fd-spacing", c.fd_spacing, "finite-difference grid spacing");
  app.add_option("--tau-max", c.tau_max, "Rabi trace length (0: 60 pi)");
  app.add_option("--dtau", c.dtau, "Rabi trace step");
  app.add_flag("--taper", c.taper, "Gaussian taper over the second half of the trace");
  app.add_option("--trace-out", c.trace_out, "write the atomic trace CSV here");
  app.add_option("--trace-in", c.trace_in, "reconstruct from this trace CSV instead of simulating");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig config;
  CLI::App app{"Photon-added states in a thermal channel: Wigner functions and mean parity", "qparity"};
  app.set_config("--config", "", "config file with the same keys as the flags; flags win");
  app.set_version_flag("--version", QPARITY_VERSION);
  app.require_subcommand(1);
  add_options(app, config);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"state", "build a state and report populations, parity and W(0,0)"},
      {"parity-evolve", "W(0,0) along gamma*t, optionally cross-checked against a second backend"},
      {"surface", "W(0,0) over (eta, gamma*t) for photon-added binomial states"},
      {"wigner-slice", "W(q, 0) at selected decay times"},
      {"thresholds", "threshold decay times, zero crossings, regime label and eta roots"},
      {"rabi", "Jaynes-Cummings trace and Fresnel parity reconstruction"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? 0 : 2;
  }
  for (const auto* sub : app.get_subcommands()) config.command = sub->get_name();

  std::ostringstream buffer;
  int code = 0;
  try {
    if (config.command == "state") code = cmd_state(config, buffer);
    else if (config.command == "parity-evolve") code = cmd_parity_evolve(config, buffer);
    else if (config.command == "surface") code = cmd_surface(config, buffer);
    else if (config.command == "wigner-slice") code = cmd_wigner_slice(config, buffer);
    else if (config.command == "thresholds") code = cmd_thresholds(config, buffer);
    else if (config.command == "rabi") code = cmd_rabi(config, buffer);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  if (config.out.empty()) {
    out << buffer.str();
  } else {
    std::ofstream f(config.out, std::ios::binary);
    if (!f) {
      err << "error: cannot write '" << config.out << "'\n";
      return 2;
    }
    f << buffer.str();
  }
  if (code == 3) err << "error: cross-check deviation above tolerance\n";
  return code;
}

}  // namespace qparity::cli
