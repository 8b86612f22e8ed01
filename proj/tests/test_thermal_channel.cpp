#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "qparity/errors.hpp"
#include "qparity/thermal_channel.hpp"

using namespace qparity;

namespace {

constexpr double kTwoOverPi = 2.0 / std::numbers::pi;

// gamma t at which r = (sigma - s^2)/(sigma + s^2) takes the value r.
double time_of_r(double r, double n) {
  const double a = 1.0 + 2.0 * n;
  return -std::log(a * (1.0 - r) / (a * (1.0 - r) + 1.0 + r));
}

std::vector<double> linspace(double a, double b, std::size_t intervals) {
  std::vector<double> v(intervals + 1);
  for (std::size_t i = 0; i <= intervals; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(intervals);
  return v;
}

}  // namespace

TEST_CASE("threshold decay times") {
  CHECK(threshold_tc(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(threshold_tc(0.5) == doctest::Approx(std::log(1.5)).epsilon(1e-15));
  CHECK(std::abs(threshold_tc1(std::sqrt(2.0), 0.0) - std::log(4.0 / 3.0)) < 1e-12);
  CHECK(threshold_tc1(1.0, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK_THROWS_AS(threshold_tc1(0.9, 0.0), RegimeError);
  CHECK_THROWS_AS(threshold_tc(-0.1), DomainError);
}

TEST_CASE("OU propagator parameters") {
  const auto p = ou_propagator({0.5, std::log(2.0)});
  CHECK(p.sigma == doctest::Approx(1.0));
  CHECK(p.shrink == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("closed-form origin values agree with the Fock-population form") {
  for (double n : {0.0, 0.5, 1.0}) {
    for (double t : {0.0, 0.1, 0.4, 0.9, 1.5}) {
      for (double a : {0.0, 0.5, 1.0, 2.0}) {
        const auto rho = build_state(PhotonAddedSpec{1, CoherentSpec{{a, 0.0}}});
        CHECK(ecs_origin_value(a, {n, t}) == doctest::Approx(fock_origin_value(rho.populations(), {n, t})).scale(1.0).epsilon(1e-9));
      }
      for (double nbar : {0.0, 0.5, 1.0}) {
        const auto rho = build_state(PhotonAddedSpec{1, ThermalSpec{nbar}});
        CHECK(ets_origin_value(nbar, {n, t}) == doctest::Approx(fock_origin_value(rho.populations(), {n, t})).scale(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("origin values at special times") {
  for (double n : {0.0, 0.5, 1.0}) {
    CHECK(std::abs(ecs_origin_value(0.5, {n, threshold_tc(n)})) < 1e-12);
    CHECK(std::abs(ets_origin_value(1.0, {n, threshold_tc(n)})) < 1e-12);
    for (double nbar : {0.0, 0.5, 1.0, 2.0})
      CHECK(ets_origin_value(nbar, {n, 0.0}) == doctest::Approx(-kTwoOverPi / ((1 + 2 * nbar) * (1 + 2 * nbar))).epsilon(1e-12));
  }
  CHECK(std::abs(ecs_origin_value(std::sqrt(2.0), {0.0, std::log(4.0 / 3.0)})) < 1e-12);
  // Vacuum heats to a thermal state of occupation n (1 - e^{-gamma t}).
  for (double t : {0.2, 1.0}) {
    const double neff = 0.7 * (1.0 - std::exp(-t));
    CHECK(fock_origin_value({1.0}, {0.7, t}) == doctest::Approx(kTwoOverPi / (1.0 + 2.0 * neff)));
  }
  // |1> under pure loss: W(0,0) = (2/pi)(1 - 2 e^{-gamma t}).
  CHECK(fock_origin_value({0.0, 1.0}, {0.0, 0.3}) == doctest::Approx(kTwoOverPi * (1.0 - 2.0 * std::exp(-0.3))));
}

TEST_CASE("Lindblad evolution: loss, heating and the thermal fixed point") {
  // Pure loss of |1>: p_1 = e^{-gamma t}.
  const auto one = evolve_lindblad(build_state(FockSpec{1}), {0.0, 0.8});
  CHECK(one.population(1) == doctest::Approx(std::exp(-0.8)).epsilon(1e-10));
  // Heating the vacuum gives a geometric distribution.
  const auto heated = evolve_lindblad(build_state(FockSpec{0}), {1.0, 0.6});
  const double neff = 1.0 - std::exp(-0.6);
  for (std::size_t l = 0; l < 6; ++l)
    CHECK(heated.population(l) == doctest::Approx(std::pow(neff, l) / std::pow(1 + neff, l + 1.0)).epsilon(1e-9));
  // Thermal state at the bath occupation does not move.
  const auto th = build_state(ThermalSpec{0.5});
  LindbladDiagnostics diag;
  const auto later = evolve_lindblad(th, {0.5, 2.0}, 0, {}, &diag);
  const Eigen::MatrixXcd diff = later.matrix() - th.padded(later.dim()).matrix();
  CHECK(diff.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(diag.max_trace_drift < 1e-12);
  CHECK(diag.dim >= th.dim());
}

TEST_CASE("Lindblad origin trajectory matches the closed forms") {
  const auto times = linspace(0.0, 1.5, 30);
  const auto ecs = build_state(PhotonAddedSpec{1, CoherentSpec{{1.2, 0.4}}});
  const auto traj = lindblad_origin_trajectory(ecs, 0.5, times);
  for (std::size_t i = 0; i < times.size(); ++i)
    CHECK(std::abs(traj.w00[i] - ecs_origin_value(std::abs(Complex(1.2, 0.4)), {0.5, times[i]})) < 1e-8);
  CHECK_THROWS_AS(lindblad_origin_trajectory(ecs, 0.5, {0.5, 0.2}), ConfigError);
}

TEST_CASE("Gaussian propagation of the vacuum is a thermal Gaussian") {
  const auto vac = build_state(FockSpec{0});
  const WignerGrid g0 = wigner_grid(vac, default_window(1.0, 121));
  const double t = 0.7, n = 1.0;
  const WignerGrid g = propagate_wigner_gaussian(g0, {n, t});
  const double neff = n * (1.0 - std::exp(-t));
  for (std::size_t i = 20; i < 100; i += 13)
    for (std::size_t j = 20; j < 100; j += 17)
      CHECK(g.at(i, j) == doctest::Approx(oracle::thermal_wigner(neff, g.window.q(i), g.window.p(j))).scale(1.0).epsilon(1e-8));
  CHECK_THROWS_AS(propagate_wigner_gaussian(g0, {n, 1e-6}), NumericalError);
  CHECK(propagate_wigner_gaussian(g0, {n, 0.0}).values == g0.values);
}

TEST_CASE("Gaussian point propagation agrees with Lindblad off the origin") {
  const auto rho = build_state(PhotonAddedSpec{1, BinomialSpec{0.6, 3}});
  const ChannelParams params{0.5, 0.3};
  const auto evolved = evolve_lindblad(rho, params);
  for (PhasePoint pt : {PhasePoint{0.5, 0.3}, PhasePoint{-1.0, 0.2}, PhasePoint{0.0, 0.0}})
    CHECK(std::abs(gaussian_propagated_point(rho, pt, params) - wigner_point(evolved, pt)) < 1e-7);
}

TEST_CASE("finite-difference solver against the exact propagator") {
  const auto rho = build_state(FockSpec{1});
  const double n = 0.5;
  const WignerGrid g0 = wigner_grid(rho, fd_window(rho, n));
  CHECK(g0.boundary_max_abs() < 1e-10);
  const auto times = linspace(0.0, 1.0, 10);
  const auto fd = fd_origin_trajectory(g0, n, times);
  for (std::size_t i = 0; i < times.size(); ++i) CHECK(std::abs(fd.w00[i] - fock_origin_value(rho.populations(), {n, times[i]})) < 1e-4);

  FdOptions ftcs;
  ftcs.scheme = FdScheme::ftcs;
  const auto g = propagate_wigner_fd(g0, {n, 0.5}, ftcs);
  CHECK(std::abs(g.interpolate(0, 0) - fock_origin_value(rho.populations(), {n, 0.5})) < 1e-3);

  FdOptions bad;
  bad.cfl = 0.9;
  CHECK_THROWS_AS(propagate_wigner_fd(g0, {n, 0.1}, bad), ConfigError);
  const WignerGrid narrow = wigner_grid(rho, GridWindow{-1.5, 1.5, -1.5, 1.5, 61, 61});
  CHECK_THROWS_AS(propagate_wigner_fd(narrow, {n, 0.1}), WindowError);
}

TEST_CASE("zero crossings of sampled trajectories") {
  OriginTrajectory traj{linspace(0.0, 1.0, 100), {}, "test"};
  for (double t : traj.times) traj.w00.push_back(std::cos(3.0 * t));
  auto ev = origin_zero_crossings(traj);
  REQUIRE(ev.crossings.size() == 1);
  CHECK(ev.crossings[0] == doctest::Approx(std::numbers::pi / 6.0).epsilon(1e-5));
  ev = origin_zero_crossings(traj, [](double t) { return std::cos(3.0 * t); });
  CHECK(std::abs(ev.crossings[0] - std::numbers::pi / 6.0) < 1e-12);

  OriginTrajectory touch{linspace(0.0, 1.0, 10), {}, "test"};
  for (double t : touch.times) touch.w00.push_back((t - 0.5) * (t - 0.5));
  ev = origin_zero_crossings(touch);
  CHECK(ev.crossings.empty());
  REQUIRE(ev.touches.size() == 1);
  CHECK(ev.touches[0] == doctest::Approx(0.5));
}

TEST_CASE("regime labels") {
  OriginTrajectory traj{linspace(0.0, 1.0, 100), {}, "test"};
  auto label = [&](auto f, double tc) {
    traj.w00.clear();
    for (double t : traj.times) traj.w00.push_back(f(t));
    return classify_regime(traj, origin_zero_crossings(traj, f), tc, 1e-9, 1e-12);
  };
  CHECK(label([](double t) { return t - 0.6; }, 0.6) == "negative-throughout");
  CHECK(label([](double t) { return (0.3 - t) * (0.6 - t); }, 0.6) == "positive-then-negative");
  CHECK(label([](double t) { return (t - 0.2) * (t - 0.4) * (t - 0.6); }, 0.6) == "negative-positive-negative");
  // A zero at t = 0 counts as non-negative.
  CHECK(label([](double t) { return t * (t - 0.6); }, 0.6) == "positive-then-negative");
  CHECK(sign_of(1e-13, 1e-12) == 0);
  CHECK(sign_of(-1e-11, 1e-12) == -1);
}

TEST_CASE("initial parity polynomial of photon-added binomial states") {
  auto f = [](int k, int M, double x) { return bernstein_value(ebs_parity_bernstein(k, M), x); };
  for (double x : {0.0, 0.13, 0.5, 0.77, 1.0}) {
    CHECK(f(1, 3, x) == doctest::Approx(5.0 * (x - 0.2) * (2 * x - 1) * (2 * x - 1)).scale(1.0));
    CHECK(f(1, 4, x) == doctest::Approx(-48.0 * std::pow(x - 0.5, 3) * (x - 1.0 / 6.0)).scale(1.0));
    CHECK(f(2, 2, x) == doctest::Approx(2.0 * (13 * x * x - 8 * x + 1)).scale(1.0));
  }
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 1 + trial % 3, M = trial % 7;
    const double eta = unit(rng);
    CHECK(f(k, M, eta * eta) ==
          doctest::Approx(oracle::ebs_parity(k, eta, M) * oracle::ebs_norm_squared(k, eta, M)).scale(1.0).epsilon(1e-10));
  }
}

TEST_CASE("initial parity roots") {
  auto roots = initial_parity_roots(1, 3);
  REQUIRE(roots.size() == 2);
  CHECK(std::abs(roots[0].eta - std::sqrt(0.2)) < 1e-10);
  CHECK(roots[0].crossing);
  CHECK(std::abs(roots[1].eta - std::sqrt(0.5)) < 1e-10);
  CHECK_FALSE(roots[1].crossing);
  roots = initial_parity_roots(1, 4);
  REQUIRE(roots.size() == 2);
  CHECK(std::abs(roots[0].eta - 1.0 / std::sqrt(6.0)) < 1e-10);
  CHECK(std::abs(roots[1].eta - std::sqrt(0.5)) < 1e-10);
  CHECK(roots[1].crossing);
  // M = 2: -(4x - 1)(2x - 1) with x = eta^2.
  roots = initial_parity_roots(1, 2);
  REQUIRE(roots.size() == 2);
  CHECK(std::abs(roots[0].eta - 0.5) < 1e-10);
  CHECK(std::abs(roots[1].eta - std::sqrt(0.5)) < 1e-10);
  CHECK_THROWS_AS(initial_parity_roots(0, 3), DomainError);
  CHECK_THROWS_AS(initial_parity_roots(1, 31), DomainError);
}

TEST_CASE("exact zeros of Fock-diagonal origin values") {
  auto ev = fock_origin_zero_events({0.0, 1.0}, 0.5, 0.0, 1.5);
  REQUIRE(ev.crossings.size() == 1);
  CHECK(std::abs(ev.crossings[0] - std::log(1.5)) < 1e-12);

  // k = 1 binomial: roots at r = -(1-x)/x (multiplicity M-1), -(1-x)/(x(M+1)) and 0.
  const double eta = 0.9, x = eta * eta, n = 0.5;
  const auto rho = build_state(PhotonAddedSpec{1, BinomialSpec{eta, 3}});
  ev = fock_origin_zero_events(rho.populations(), n, 0.0, 1.5);
  REQUIRE(ev.touches.size() == 1);
  CHECK(std::abs(ev.touches[0] - time_of_r(-(1 - x) / x, n)) < 1e-7);
  REQUIRE(ev.crossings.size() == 2);
  CHECK(std::abs(ev.crossings[0] - time_of_r(-(1 - x) / (4 * x), n)) < 1e-10);
  CHECK(std::abs(ev.crossings[1] - std::log(1.5)) < 1e-10);

  // A zero sitting on the range end is a touch.
  ev = fock_origin_zero_events({0.0, 1.0}, 0.5, 0.0, std::log(1.5));
  CHECK(ev.crossings.empty());
  CHECK(ev.touches.size() == 1);
}

TEST_CASE("property: ETS origin value increases strictly up to the threshold") {
  for (double nbar : {0.0, 0.5, 1.0, 2.0})
    for (double n : {0.0, 0.5, 1.0, 2.0}) {
      double prev = -INFINITY;
      for (double t : linspace(0.0, threshold_tc(n), 400)) {
        const double w = ets_origin_value(nbar, {n, t});
        CHECK(w > prev);
        prev = w;
      }
    }
}

TEST_CASE("two-photon binomial state loses its negativity before the threshold") {
  const auto rho = build_state(PhotonAddedSpec{2, BinomialSpec{0.55, 2}});
  CHECK(fock_origin_value(rho.populations(), {0.0, 0.0}) < 0.0);
  const auto ev = fock_origin_zero_events(rho.populations(), 0.0, 0.0, 1.5);
  REQUIRE_FALSE(ev.crossings.empty());
  CHECK(ev.crossings.back() < std::log(2.0));
  for (double t : linspace(ev.crossings.back() + 1e-6, 1.5, 200)) CHECK(fock_origin_value(rho.populations(), {0.0, t}) >= 0.0);
}

TEST_CASE("property: evolutions keep trace, Hermiticity and positivity") {
  std::mt19937 rng(77);
  for (int trial = 0; trial < 12; ++trial) {
    const auto rho0 = build_state(oracle::random_spec(rng));
    const double n = 0.5 * (trial % 3);
    for (double t : {0.2, 0.7, 1.5}) {
      LindbladDiagnostics diag;
      const auto rho = evolve_lindblad(rho0, {n, t}, 0, {}, &diag);
      CHECK(diag.max_trace_drift < 1e-10);
      CHECK(diag.max_hermiticity_defect < 1e-12);
      const Eigen::MatrixXcd& m = rho.matrix();
      CHECK(std::abs(m.trace() - Complex(1.0, 0.0)) < 1e-10);
      CHECK((m - m.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(m);
      CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
    }
  }
  // Gaussian propagation keeps the Wigner bound and the normalization.
  const auto rho = build_state(PhotonAddedSpec{1, CoherentSpec{{1.2, -0.4}}});
  const auto grid0 = wigner_grid(rho, default_window(2.0));
  for (double t : {0.3, 1.0}) {
    const auto g = propagate_wigner_gaussian(grid0, {0.5, t});
    for (double v : g.values) CHECK(std::abs(v) <= kTwoOverPi + 1e-9);
    CHECK(std::abs(g.integral() - 1.0) < 1e-3);
  }
}

TEST_CASE("negativity volume of a weak ECS vanishes at the threshold") {
  const auto rho = build_state(PhotonAddedSpec{1, CoherentSpec{{0.5, 0.0}}});
  const auto grid0 = wigner_grid(rho, default_window(rho, 241));
  double prev = negativity_volume(grid0);
  CHECK(prev > 0.0);
  for (double t : {0.3, 0.5, 0.65, 0.69}) {
    const double v = negativity_volume(propagate_wigner_gaussian(grid0, {0.0, t}));
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 1e-4);
  CHECK(negativity_volume(propagate_wigner_gaussian(grid0, {0.0, 0.75})) < 1e-12);
}

TEST_CASE("property: four backends agree on the origin trajectory") {
  const auto times = linspace(0.0, 1.5, 30);
  for (const StateSpec& spec : {StateSpec{PhotonAddedSpec{1, BinomialSpec{0.5, 3}}}, StateSpec{FockSpec{2}},
                                StateSpec{PhotonAddedSpec{1, CoherentSpec{{0.8, 0.3}}}}, StateSpec{PhotonAddedSpec{1, ThermalSpec{0.5}}}}) {
    const auto rho = build_state(spec);
    const double n = 0.5;
    const auto exact = fock_origin_trajectory(rho, n, times);
    const auto lind = lindblad_origin_trajectory(rho, n, times);
    const auto gauss = gaussian_origin_trajectory(rho, n, times);
    const auto fd = fd_origin_trajectory(wigner_grid(rho, fd_window(rho, n)), n, times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      CHECK(std::abs(lind.w00[i] - exact.w00[i]) < 1e-6);
      CHECK(std::abs(gauss.w00[i] - exact.w00[i]) < 1e-6);
      CHECK(std::abs(fd.w00[i] - exact.w00[i]) < 1e-3);
    }
  }
}

TEST_CASE("clustered roots near the threshold stay resolved") {
  // eta close to 1: the double root and the extra crossing crowd against r = 0.
  const double eta = 0.995, x = eta * eta, n = 0.5;
  const auto rho = build_state(PhotonAddedSpec{1, BinomialSpec{eta, 3}});
  const auto ev = fock_origin_zero_events(rho.populations(), n, 0.0, 1.5);
  REQUIRE(ev.crossings.size() == 2);
  REQUIRE(ev.touches.size() == 1);
  CHECK(ev.touches[0] == doctest::Approx(time_of_r(-(1 - x) / x, n)).epsilon(1e-7));
  CHECK(ev.crossings[0] == doctest::Approx(time_of_r(-(1 - x) / (4 * x), n)).epsilon(1e-9));
  CHECK(std::abs(ev.crossings[1] - threshold_tc(n)) < 1e-9);
}
