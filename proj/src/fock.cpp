#include "qparity/fock.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "qparity/errors.hpp"

namespace qparity {

namespace {

constexpr double kHermiticityTolerance = 1e-12;
constexpr double kTraceTolerance = 1e-10;

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double binomial_coefficient(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (int j = 1; j <= k; ++j) c = c * (n - k + j) / j;
  return std::round(c);
}

// Unnormalized content of a state before it is cut to a dimension. Pure states carry
// amplitudes, diagonal states carry populations. Finite states hold their full support.
struct RawState {
  bool pure = true;
  bool finite = true;
  Eigen::VectorXcd amplitudes;
  std::vector<double> populations;

  std::size_t length() const {
    return pure ? static_cast<std::size_t>(amplitudes.size()) : populations.size();
  }
  double weight(std::size_t l) const {
    return pure ? std::norm(amplitudes(static_cast<Eigen::Index>(l))) : populations[l];
  }
};

Eigen::VectorXcd binomial_amplitudes(double eta, int M) {
  Eigen::VectorXcd amps(M + 1);
  const double x = eta * eta;
  for (int l = 0; l <= M; ++l) {
    // std::pow(0, 0) == 1 gives the Fock endpoints exactly.
    amps(l) = std::sqrt(binomial_coefficient(M, l)) * std::pow(eta, l) * std::pow(1.0 - x, 0.5 * (M - l));
  }
  return amps;
}

Eigen::VectorXcd coherent_amplitudes(Complex alpha, std::size_t length) {
  Eigen::VectorXcd amps(static_cast<Eigen::Index>(length));
  Complex c = std::exp(-0.5 * std::norm(alpha));
  for (std::size_t l = 0; l < length; ++l) {
    if (l > 0) c *= alpha / std::sqrt(static_cast<double>(l));
    amps(static_cast<Eigen::Index>(l)) = c;
  }
  return amps;
}

std::vector<double> thermal_populations(double nbar, std::size_t length) {
  std::vector<double> pops(length);
  const double ratio = nbar / (1.0 + nbar);
  double p = 1.0 / (1.0 + nbar);
  for (std::size_t l = 0; l < length; ++l) {
    pops[l] = p;
    p *= ratio;
  }
  return pops;
}

// Multiplies amplitude l by sqrt((l+1)...(l+k)) and shifts it to l+k.
Eigen::VectorXcd shift_up(const Eigen::VectorXcd& amps, int k) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(amps.size() + k);
  for (Eigen::Index l = 0; l < amps.size(); ++l) {
    double factor = 1.0;
    for (int j = 1; j <= k; ++j) factor *= static_cast<double>(l + j);
    out(l + k) = amps(l) * std::sqrt(factor);
  }
  return out;
}

RawState raw_base(const BaseSpec& base, std::size_t cap) {
  RawState raw;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FockSpec>) {
          raw.amplitudes = Eigen::VectorXcd::Zero(s.l + 1);
          raw.amplitudes(s.l) = 1.0;
        } else if constexpr (std::is_same_v<T, BinomialSpec>) {
          raw.amplitudes = binomial_amplitudes(s.eta, s.M);
        } else if constexpr (std::is_same_v<T, CoherentSpec>) {
          raw.finite = false;
          raw.amplitudes = coherent_amplitudes(s.alpha, cap);
        } else {
          raw.pure = false;
          raw.finite = false;
          raw.populations = thermal_populations(s.nbar, cap);
        }
      },
      base);
  return raw;
}

RawState raw_state(const StateSpec& spec, std::size_t cap) {
  if (const auto* added = std::get_if<PhotonAddedSpec>(&spec)) {
    const int k = added->k;
    RawState raw = raw_base(added->base, cap);
    if (raw.pure) {
      raw.amplitudes = shift_up(raw.amplitudes, k);
    } else {
      std::vector<double> pops(raw.populations.size() + k, 0.0);
      for (std::size_t l = 0; l < raw.populations.size(); ++l) {
        double factor = 1.0;
        for (int j = 1; j <= k; ++j) factor *= static_cast<double>(l + j);
        pops[l + k] = raw.populations[l] * factor;
      }
      raw.populations = std::move(pops);
    }
    return raw;
  }
  return std::visit(
      [&](const auto& s) -> RawState {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PhotonAddedSpec>) {
          return {};
        } else {
          return raw_base(BaseSpec{s}, cap);
        }
      },
      spec);
}

std::size_t highest_occupied(const RawState& raw) {
  std::size_t support = 0;
  for (std::size_t l = 0; l < raw.length(); ++l)
    if (raw.weight(l) > 0.0) support = l + 1;
  return support;
}

// Smallest D such that the population from level D-1 upwards stays below the tolerance.
std::optional<std::size_t> auto_dimension(const RawState& raw, double tolerance, std::size_t cap) {
  const std::size_t n = std::min(raw.length(), cap);
  double total = 0.0;
  for (std::size_t l = 0; l < raw.length(); ++l) total += raw.weight(l);
  double tail = 0.0;
  std::optional<std::size_t> best;
  for (std::size_t l = raw.length(); l-- > 0;) {
    tail += raw.weight(l);
    if (tail / total >= tolerance) break;
    if (l + 1 <= n) best = l + 1;
  }
  if (best && *best >= cap) return std::nullopt;
  return best;
}

std::string describe_base(const BaseSpec& base, std::optional<int> k) {
  const std::string added = k ? " k=" + std::to_string(*k) : "";
  return std::visit(
      [&](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FockSpec>) {
          return "fock l=" + std::to_string(s.l) + added;
        } else if constexpr (std::is_same_v<T, CoherentSpec>) {
          std::string a = format_number(s.alpha.real());
          if (s.alpha.imag() != 0.0) {
            a += (s.alpha.imag() < 0 ? "" : "+") + format_number(s.alpha.imag()) + "i";
          }
          return (k ? "ecs" : "coherent") + added + " alpha=" + a;
        } else if constexpr (std::is_same_v<T, ThermalSpec>) {
          return (k ? "ets" : "thermal") + added + " nbar=" + format_number(s.nbar);
        } else {
          return (k ? "ebs" : "binomial") + added + " eta=" + format_number(s.eta) +
                 " M=" + std::to_string(s.M);
        }
      },
      base);
}

void validate_base(const BaseSpec& base) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FockSpec>) {
          if (s.l < 0) throw DomainError("fock: l must be >= 0");
        } else if constexpr (std::is_same_v<T, CoherentSpec>) {
          if (!std::isfinite(s.alpha.real()) || !std::isfinite(s.alpha.imag()))
            throw DomainError("coherent: alpha must be finite");
        } else if constexpr (std::is_same_v<T, ThermalSpec>) {
          if (!(s.nbar >= 0.0) || !std::isfinite(s.nbar)) throw DomainError("thermal: nbar must be >= 0");
        } else {
          if (!(s.eta >= 0.0 && s.eta <= 1.0)) throw DomainError("binomial: eta must lie in [0, 1]");
          if (s.M < 0) throw DomainError("binomial: M must be >= 0");
        }
      },
      base);
}

}  // namespace

FockState::FockState(Eigen::VectorXcd amplitudes) : amplitudes_(std::move(amplitudes)) {
  const double norm = amplitudes_.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw DomainError("FockState: amplitudes have zero or non-finite norm");
  amplitudes_ /= norm;
}

std::size_t FockState::support() const noexcept {
  for (std::size_t l = dim(); l-- > 0;)
    if (amplitudes_(static_cast<Eigen::Index>(l)) != Complex{}) return l + 1;
  return 0;
}

FockState FockState::padded(std::size_t dim) const {
  if (dim < support()) throw DimensionError("FockState::padded: dimension below support");
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim));
  const auto keep = static_cast<Eigen::Index>(std::min(dim, this->dim()));
  amps.head(keep) = amplitudes_.head(keep);
  return FockState(std::move(amps));
}

DensityMatrix::DensityMatrix(Eigen::MatrixXcd entries) : entries_(std::move(entries)) {
  if (entries_.rows() == 0 || entries_.rows() != entries_.cols())
    throw DimensionError("DensityMatrix: matrix must be square and non-empty");
  const double defect = (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff();
  if (defect > kHermiticityTolerance)
    throw NumericalError("DensityMatrix: not Hermitian (defect " + format_number(defect) + ")");
  const double trace = entries_.trace().real();
  if (std::abs(trace - 1.0) > kTraceTolerance)
    throw NumericalError("DensityMatrix: trace " + format_number(trace) + " differs from 1");
}

DensityMatrix DensityMatrix::from_pure(const FockState& state) {
  const auto& v = state.amplitudes();
  return DensityMatrix(v * v.adjoint());
}

DensityMatrix DensityMatrix::from_populations(const std::vector<double>& populations) {
  const double total = std::accumulate(populations.begin(), populations.end(), 0.0);
  if (!(total > 0.0)) throw DomainError("DensityMatrix: populations sum to zero");
  Eigen::VectorXcd diag(static_cast<Eigen::Index>(populations.size()));
  for (std::size_t l = 0; l < populations.size(); ++l) {
    if (populations[l] < 0.0) throw DomainError("DensityMatrix: negative population");
    diag(static_cast<Eigen::Index>(l)) = populations[l] / total;
  }
  return DensityMatrix(diag.asDiagonal().toDenseMatrix());
}

std::vector<double> DensityMatrix::populations() const {
  std::vector<double> pops(dim());
  for (std::size_t l = 0; l < dim(); ++l) pops[l] = population(l);
  return pops;
}

DensityMatrix DensityMatrix::padded(std::size_t dim) const {
  if (dim < this->dim()) throw DimensionError("DensityMatrix::padded: cannot shrink");
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  m.topLeftCorner(entries_.rows(), entries_.cols()) = entries_;
  return DensityMatrix(std::move(m));
}

void validate(const StateSpec& spec) {
  if (const auto* added = std::get_if<PhotonAddedSpec>(&spec)) {
    if (added->k < 1) throw DomainError("photon-added: k must be >= 1");
    validate_base(added->base);
    return;
  }
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (!std::is_same_v<T, PhotonAddedSpec>) validate_base(BaseSpec{s});
      },
      spec);
}

std::string to_string(const StateSpec& spec) {
  if (const auto* added = std::get_if<PhotonAddedSpec>(&spec)) return describe_base(added->base, added->k);
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PhotonAddedSpec>) {
          return {};
        } else {
          return describe_base(BaseSpec{s}, std::nullopt);
        }
      },
      spec);
}

DensityMatrix build_state(const StateSpec& spec, std::optional<std::size_t> dim, const BuildOptions& options) {
  validate(spec);
  const std::size_t cap = std::max(options.dim_cap, dim.value_or(0));
  RawState raw = raw_state(spec, cap);

  std::size_t target = 0;
  if (raw.finite) {
    const std::size_t support = highest_occupied(raw);
    if (dim && *dim < support)
      throw DimensionError("build_state: dimension " + std::to_string(*dim) + " below support " +
                           std::to_string(support) + " of " + to_string(spec));
    if (!dim && support > options.dim_cap)
      throw TruncationError("build_state: support of " + to_string(spec) + " exceeds the dimension cap");
    target = dim.value_or(support);
  } else {
    const auto needed = auto_dimension(raw, options.tail_tolerance, cap);
    if (!needed)
      throw TruncationError("build_state: tail population of " + to_string(spec) + " stays above " +
                            format_number(options.tail_tolerance) + " at dimension cap " + std::to_string(cap));
    if (dim && *dim < *needed)
      throw TruncationError("build_state: dimension " + std::to_string(*dim) + " leaves tail population above " +
                            format_number(options.tail_tolerance) + " for " + to_string(spec) +
                            " (needs " + std::to_string(*needed) + ")");
    target = dim.value_or(*needed);
  }

  if (raw.pure) {
    Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(target));
    const auto keep = static_cast<Eigen::Index>(std::min<std::size_t>(target, raw.length()));
    amps.head(keep) = raw.amplitudes.head(keep);
    return DensityMatrix::from_pure(FockState(std::move(amps)));
  }
  std::vector<double> pops(target, 0.0);
  for (std::size_t l = 0; l < std::min(target, raw.length()); ++l) pops[l] = raw.populations[l];
  return DensityMatrix::from_populations(pops);
}

FockState build_binomial(double eta, int M, std::size_t dim) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("build_binomial: eta must lie in [0, 1]");
  if (M < 0) throw DomainError("build_binomial: M must be >= 0");
  if (dim < static_cast<std::size_t>(M) + 1)
    throw DimensionError("build_binomial: dimension " + std::to_string(dim) + " < M+1");
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim));
  amps.head(M + 1) = binomial_amplitudes(eta, M);
  return FockState(std::move(amps));
}

FockState build_binomial(double eta, int M) { return build_binomial(eta, M, static_cast<std::size_t>(M) + 1); }

FockState photon_add(const FockState& state, int k, std::optional<std::size_t> dim) {
  if (k < 1) throw DomainError("photon_add: k must be >= 1");
  const std::size_t target = dim.value_or(state.dim() + static_cast<std::size_t>(k));
  const std::size_t needed = state.support() + static_cast<std::size_t>(k);
  if (target < needed)
    throw DimensionError("photon_add: dimension " + std::to_string(target) + " cannot hold " +
                         std::to_string(needed) + " levels");
  Eigen::VectorXcd shifted = shift_up(state.amplitudes().head(static_cast<Eigen::Index>(state.support())), k);
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(target));
  amps.head(shifted.size()) = shifted;
  return FockState(std::move(amps));
}

double hypergeom_2F1_terminating(int a, double b, double c, double x) {
  if (a > 0) throw DomainError("hypergeom_2F1_terminating: a must be a non-positive integer");
  double term = 1.0;
  double sum = 1.0;
  for (int j = 0; j < -a; ++j) {
    const double cj = c + j;
    if (cj == 0.0) throw DomainError("hypergeom_2F1_terminating: pole in (c)_j within the summation range");
    term *= (a + j) * (b + j) / (cj * (j + 1)) * x;
    sum += term;
  }
  return sum;
}

double ebs_normalization(int k, double eta, int M) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("ebs_normalization: eta must lie in [0, 1]");
  if (k < 0 || M < 0) throw DomainError("ebs_normalization: k and M must be >= 0");
  if (eta == 0.0) {
    // |eta=0, M> = |0>, so (a^dagger)^k |0> = sqrt(k!) |k>.
    return 1.0 / std::sqrt(std::tgamma(k + 1.0));
  }
  const double x = eta * eta;
  double ratio = 1.0;  // (M+k)! / M!
  for (int j = 1; j <= k; ++j) ratio *= M + j;
  const double f = hypergeom_2F1_terminating(-M, -M, -M - k, (x - 1.0) / x);
  return 1.0 / std::sqrt(std::pow(x, M) * ratio * f);
}

double mean_parity(const DensityMatrix& rho) {
  double p = 0.0;
  for (std::size_t l = 0; l < rho.dim(); ++l) p += (l % 2 == 0 ? 1.0 : -1.0) * rho.population(l);
  return p;
}

double mean_photon_number(const DensityMatrix& rho) {
  double n = 0.0;
  for (std::size_t l = 0; l < rho.dim(); ++l) n += static_cast<double>(l) * rho.population(l);
  return n;
}

double tail_population(const DensityMatrix& rho, std::size_t levels) {
  double tail = 0.0;
  const std::size_t n = std::min(levels, rho.dim());
  for (std::size_t l = rho.dim() - n; l < rho.dim(); ++l) tail += rho.population(l);
  return tail;
}

}  // namespace qparity
