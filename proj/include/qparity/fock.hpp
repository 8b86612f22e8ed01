#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace qparity {

using Complex = std::complex<double>;

inline constexpr double kDefaultTailTolerance = 1e-10;
inline constexpr std::size_t kDefaultDimCap = 512;

/// Normalized pure state in a truncated Fock basis, amplitude l belongs to |l>.
class FockState {
 public:
  /// Normalizes the given amplitudes; throws DomainError on a zero vector.
  explicit FockState(Eigen::VectorXcd amplitudes);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(amplitudes_.size()); }
  const Eigen::VectorXcd& amplitudes() const noexcept { return amplitudes_; }
  Complex amplitude(std::size_t l) const { return l < dim() ? amplitudes_(static_cast<Eigen::Index>(l)) : Complex{}; }
  double population(std::size_t l) const { return std::norm(amplitude(l)); }

  /// One past the highest occupied level.
  std::size_t support() const noexcept;

  /// Same state embedded in a larger basis.
  FockState padded(std::size_t dim) const;

 private:
  Eigen::VectorXcd amplitudes_;
};

/// Hermitian, unit-trace operator on a truncated Fock basis.
class DensityMatrix {
 public:
  /// Validates Hermiticity (1e-12 absolute) and unit trace (1e-10).
  explicit DensityMatrix(Eigen::MatrixXcd entries);

  static DensityMatrix from_pure(const FockState& state);
  /// Diagonal state; populations are renormalized.
  static DensityMatrix from_populations(const std::vector<double>& populations);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  const Eigen::MatrixXcd& matrix() const noexcept { return entries_; }
  Complex operator()(std::size_t m, std::size_t n) const {
    return entries_(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  }
  double population(std::size_t l) const { return l < dim() ? (*this)(l, l).real() : 0.0; }
  std::vector<double> populations() const;

  DensityMatrix padded(std::size_t dim) const;

 private:
  Eigen::MatrixXcd entries_;
};

struct FockSpec {
  int l = 0;
};
struct CoherentSpec {
  Complex alpha;
};
struct ThermalSpec {
  double nbar = 0.0;
};
struct BinomialSpec {
  double eta = 0.0;
  int M = 0;
};

using BaseSpec = std::variant<FockSpec, CoherentSpec, ThermalSpec, BinomialSpec>;

/// k photons added to a non-added base state.
struct PhotonAddedSpec {
  int k = 1;
  BaseSpec base;
};

using StateSpec = std::variant<FockSpec, CoherentSpec, ThermalSpec, BinomialSpec, PhotonAddedSpec>;

/// Throws DomainError when a parameter leaves its range.
void validate(const StateSpec& spec);

/// Canonical text form, e.g. "ebs k=1 eta=0.5 M=2".
std::string to_string(const StateSpec& spec);

struct BuildOptions {
  double tail_tolerance = kDefaultTailTolerance;
  std::size_t dim_cap = kDefaultDimCap;
};

/// Builds the state. With no dimension, finite-support states get exactly their support and
/// the others are auto-sized so the neglected population stays below the tail tolerance.
DensityMatrix build_state(const StateSpec& spec, std::optional<std::size_t> dim = std::nullopt,
                          const BuildOptions& options = {});

/// Binomial state |eta, M> embedded in dimension `dim` (>= M+1).
FockState build_binomial(double eta, int M, std::size_t dim);
FockState build_binomial(double eta, int M);

/// Normalized (a^dagger)^k |psi>. The target dimension defaults to dim + k.
FockState photon_add(const FockState& state, int k, std::optional<std::size_t> dim = std::nullopt);

/// Normalization constant N(k, eta, M) of the photon-added binomial state through the
/// terminating 2F1. At eta = 0 the hypergeometric argument diverges; the limit (k!)^(-1/2) of
/// (a^dagger)^k |0> is returned instead.
double ebs_normalization(int k, double eta, int M);

/// Sum_{j=0}^{-a} (a)_j (b)_j / ((c)_j j!) x^j for a <= 0. Throws DomainError if (c)_j
/// vanishes inside the summation range.
double hypergeom_2F1_terminating(int a, double b, double c, double x);

/// <Pi> = sum_l (-1)^l rho_ll.
double mean_parity(const DensityMatrix& rho);
double mean_photon_number(const DensityMatrix& rho);

/// Population in the top `levels` basis states.
double tail_population(const DensityMatrix& rho, std::size_t levels = 1);

}  // namespace qparity
