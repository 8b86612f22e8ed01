#include "qparity/rabi.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "qparity/errors.hpp"

namespace qparity {

namespace {

constexpr double kSpacingTolerance = 1e-9;

const Complex kSqrtI = std::polar(1.0, std::numbers::pi / 4.0);

double taper_weight(double tau, double tau_max) {
  const double start = 0.5 * tau_max;
  if (tau <= start) return 1.0;
  const double x = (tau - start) / (tau_max / 6.0);
  return std::exp(-x * x);
}

void require_uniform(const std::vector<double>& taus) {
  if (taus.size() < 2) throw ConfigError("fresnel_reconstruct: trace needs at least two samples");
  if (taus.front() != 0.0) throw ConfigError("fresnel_reconstruct: trace must start at tau = 0");
  const double h = taus[1] - taus[0];
  if (!(h > 0.0)) throw ConfigError("fresnel_reconstruct: taus must increase");
  for (std::size_t i = 1; i < taus.size(); ++i) {
    if (std::abs((taus[i] - taus[i - 1]) - h) > kSpacingTolerance * std::max(1.0, taus[i]))
      throw ConfigError("fresnel_reconstruct: non-uniform sampling at index " + std::to_string(i));
  }
}

double parse_double(const std::string& field, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != field.size())
    throw ConfigError("read_trace_csv: line " + std::to_string(line) + ": cannot parse '" + field + "'");
  return v;
}

}  // namespace

std::vector<double> uniform_taus(double tau_max, double dtau) {
  if (!(dtau > 0.0) || !(tau_max > 0.0)) throw ConfigError("uniform_taus: tau_max and dtau must be positive");
  const auto n = static_cast<std::size_t>(std::floor(tau_max / dtau + 1e-9));
  std::vector<double> taus(n + 1);
  for (std::size_t i = 0; i <= n; ++i) taus[i] = static_cast<double>(i) * dtau;
  return taus;
}

RabiTrace jc_trace(const DensityMatrix& rho_field, const std::vector<double>& taus) {
  const auto pops = rho_field.populations();
  std::vector<double> freq(pops.size());
  for (std::size_t l = 0; l < pops.size(); ++l) freq[l] = std::sqrt(static_cast<double>(l + 1));
  RabiTrace trace{taus, std::vector<double>(taus.size()), std::vector<double>(taus.size())};
  for (std::size_t i = 0; i < taus.size(); ++i) {
    double pg = 0.0;
    for (std::size_t l = 0; l < pops.size(); ++l) {
      const double s = std::sin(taus[i] * freq[l]);
      pg += pops[l] * s * s;
    }
    trace.p_ground[i] = pg;
    trace.p_excited[i] = 1.0 - pg;
  }
  return trace;
}

RabiTrace jc_trace(const DensityMatrix& rho_field, const QuadratureOptions& options) {
  return jc_trace(rho_field, uniform_taus(options.tau_max, options.dtau));
}

Complex fresnel_integral(const RabiTrace& trace, Complex prefactor, bool taper) {
  require_uniform(trace.taus);
  if (trace.p_ground.size() != trace.taus.size()) throw ConfigError("fresnel_reconstruct: ragged trace");
  const double h = trace.taus[1] - trace.taus[0];
  const double tau_max = trace.taus.back();
  Complex sum{};
  const std::size_t last = trace.taus.size() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    const double tau = trace.taus[i];
    double weight = (i == 0 || i == last) ? 0.5 : 1.0;
    if (taper) weight *= taper_weight(tau, tau_max);
    sum += weight * std::polar(trace.p_ground[i] - 0.5, tau * tau / std::numbers::pi);
  }
  return prefactor * h * sum;
}

double fresnel_reconstruct(const RabiTrace& trace, const QuadratureOptions& options) {
  const Complex value = fresnel_integral(trace, 4.0 / (std::numbers::pi * kSqrtI), options.taper);
  if (std::abs(value.imag()) > options.max_imag_residue)
    throw NumericalError("fresnel_reconstruct: imaginary residue " + std::to_string(value.imag()) +
                         " above tolerance; extend tau_max");
  return value.real();
}

std::vector<ReconstructionRow> reconstruction_error_scan(const DensityMatrix& rho_field,
                                                         const std::vector<double>& tau_maxes, double dtau, bool taper) {
  const double exact = mean_parity(rho_field);
  std::vector<ReconstructionRow> rows;
  for (double tau_max : tau_maxes) {
    const RabiTrace trace = jc_trace(rho_field, uniform_taus(tau_max, dtau));
    const Complex value = fresnel_integral(trace, 4.0 / (std::numbers::pi * kSqrtI), taper);
    rows.push_back({tau_max, dtau, value.real(), value.imag(), std::abs(value.real() - exact)});
  }
  return rows;
}

void write_trace_csv(std::ostream& out, const RabiTrace& trace) {
  out << "tau,p_ground,p_excited\n";
  char buf[96];
  for (std::size_t i = 0; i < trace.taus.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.16e,%.16e,%.16e\n", trace.taus[i], trace.p_ground[i], trace.p_excited[i]);
    out << buf;
  }
}

RabiTrace read_trace_csv(std::istream& in) {
  RabiTrace trace;
  std::string line;
  std::size_t number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "tau,p_ground,p_excited")
        throw ConfigError("read_trace_csv: expected header 'tau,p_ground,p_excited', got '" + line + "'");
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string a, b, c, extra;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ',') || std::getline(ss, extra, ','))
      throw ConfigError("read_trace_csv: line " + std::to_string(number) + " must have 3 columns");
    trace.taus.push_back(parse_double(a, number));
    trace.p_ground.push_back(parse_double(b, number));
    trace.p_excited.push_back(parse_double(c, number));
  }
  if (!header) throw ConfigError("read_trace_csv: missing header");
  return trace;
}

}  // namespace qparity
