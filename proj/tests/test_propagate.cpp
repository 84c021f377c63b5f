#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bohm/analytic.hpp"
#include "bohm/propagate.hpp"

using namespace bohm;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr auto SF = PropagatorMethod::SplitFourier;
constexpr auto CN = PropagatorMethod::CrankNicolson;

Boundary boundary_for(PropagatorMethod m) { return m == SF ? Boundary::Periodic : Boundary::Boxed; }

ScalarWaveFunction gaussian(const Grid& g, double x0 = 0.0, double s = 1.0, double k = 0.0) {
  return normalized(ScalarWaveFunction::from_function(
      g, [&](double x) { return std::exp(-(x - x0) * (x - x0) / (2 * s * s) + kI * k * x); }));
}

double max_distance(const ComplexField& a, const ComplexField& b) {
  double e = 0;
  for (std::size_t p = 0; p < a.size(); ++p) e = std::max(e, std::abs(a[p] - b[p]));
  return e;
}

double l1_density_distance(const ScalarWaveFunction& a, const ScalarWaveFunction& b) {
  const Grid& g = a.grid();
  RealField d(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) d[p] = std::abs(std::norm(a[p]) - std::norm(b[p]));
  return integrate(g, d);
}

double variance(const ScalarWaveFunction& psi) {
  const Grid& g = psi.grid();
  const auto rho = density(psi);
  RealField x(g.size()), x2(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    x[p] = g.coord(p, 0) * rho[p];
    x2[p] = g.coord(p, 0) * g.coord(p, 0) * rho[p];
  }
  const double m = integrate(g, x);
  return integrate(g, x2) - m * m;
}

}  // namespace

TEST(Method, ParseAndCompatibility) {
  EXPECT_EQ(parse_method("split-fourier"), SF);
  EXPECT_EQ(parse_method("crank-nicolson"), CN);
  EXPECT_FALSE(parse_method("euler"));
  const Grid per = Grid::line(-1, 1, 16), box = Grid::line(-1, 1, 16, Boundary::Boxed);
  EXPECT_EQ(default_method(per), SF);
  EXPECT_EQ(default_method(box), CN);
  const auto c = PhysicalConstants::natural(1);
  EXPECT_THROW(Propagator(box, potential::Free{}, c, 1e-3, SF), IncompatibleMethod);
  EXPECT_THROW(Propagator(per, potential::Free{}, c, 1e-3, CN), IncompatibleMethod);
  EXPECT_THROW(Propagator(per, potential::Free{}, c, 0.0, SF), PreconditionError);
}

TEST(Step, FreePlaneWavePhase) {
  const Grid g = Grid::line(-10, 10, 128);
  const double k = 2 * kPi / g.axis(0).length() * 5;
  const PhysicalConstants c{1.3, {0.7}};
  const double dt = 1e-2;
  const auto psi = ScalarWaveFunction::from_function(g, [&](double x) { return std::exp(kI * k * x); });
  const auto out = step(psi, potential::Free{}, c, dt, SF);
  const Complex phase = std::exp(-kI * c.hbar * k * k * dt / (2 * c.mass(0)));
  for (std::size_t p = 0; p < g.size(); ++p) {
    EXPECT_LT(std::abs(out[p] - phase * psi[p]), 1e-10);
    EXPECT_NEAR(std::abs(out[p]), 1.0, 1e-10);
  }
}

TEST(Step, HarmonicGroundStateIsStationary) {
  for (auto m : {SF, CN}) {
    const Grid g = Grid::line(-10, 10, m == SF ? 256 : 2001, boundary_for(m));
    const auto psi = gaussian(g);
    const double dt = 1e-3;
    const auto out = step(psi, potential::Harmonic{{1.0}}, PhysicalConstants::natural(1), dt, m);
    const Complex phase = std::exp(-kI * dt / 2.0);
    for (std::size_t p = 0; p < g.size(); ++p) {
      EXPECT_NEAR(std::abs(out[p]), std::abs(psi[p]), 1e-6) << to_string(m);
      EXPECT_LT(std::abs(out[p] - phase * psi[p]), 1e-6) << to_string(m);
    }
  }
}

TEST(Evolve, ZeroDurationKeepsOnlyInitialState) {
  const Grid g = Grid::line(-10, 10, 64);
  const auto psi = gaussian(g);
  const auto rec = evolve(psi, potential::Free{}, PhysicalConstants::natural(1), 0.0, 1e-3, SF, 1);
  ASSERT_EQ(rec.snapshots.size(), 1u);
  EXPECT_EQ(rec.times, std::vector<double>{0.0});
  EXPECT_EQ(rec.snapshots[0].amplitudes(), psi.amplitudes());
}

TEST(Evolve, RejectsUnnormalizedAndMisalignedDurations) {
  const Grid g = Grid::line(-10, 10, 64);
  const auto c = PhysicalConstants::natural(1);
  auto psi = gaussian(g);
  EXPECT_THROW(evolve(psi, potential::Free{}, c, 1.00005, 1e-3, SF, 1), PreconditionError);
  for (auto& z : psi.amplitudes()) z *= 2.0;
  EXPECT_THROW(evolve(psi, potential::Free{}, c, 1.0, 1e-3, SF, 1), PreconditionError);
}

TEST(Evolve, SnapshotStrideKeepsLast) {
  const Grid g = Grid::line(-10, 10, 64);
  const auto rec = evolve(gaussian(g), potential::Free{}, PhysicalConstants::natural(1), 0.025, 1e-3, SF, 10);
  ASSERT_EQ(rec.times.size(), 4u);
  EXPECT_NEAR(rec.times[1], 0.01, 1e-15);
  EXPECT_NEAR(rec.times[3], 0.025, 1e-15);
}

TEST(Evolve, FreeGaussianSpreadsAndMatchesFineReference) {
  for (auto m : {SF, CN}) {
    const Grid g = Grid::line(-30, 30, m == SF ? 1024 : 3001, boundary_for(m));
    const auto psi = gaussian(g);
    const auto c = PhysicalConstants::natural(1);
    const auto coarse = evolve(psi, potential::Free{}, c, 1.0, 1e-3, m, 100);
    const auto fine = evolve(psi, potential::Free{}, c, 1.0, 1e-4, m, 1000);
    double prev = 0.0;
    for (const auto& s : coarse.snapshots) {
      EXPECT_NEAR(norm(s), 1.0, 1e-9) << to_string(m);
      const double v = variance(s);
      EXPECT_GT(v, prev);
      prev = v;
    }
    EXPECT_LT(max_distance(coarse.snapshots.back().amplitudes(), fine.snapshots.back().amplitudes()), 1e-5);
  }
}

TEST(Evolve, CoherentStateReturnsAfterOnePeriod) {
  const Grid g = Grid::line(-12, 12, 256);
  const auto psi = gaussian(g, 2.0);
  const auto c = PhysicalConstants::natural(1);
  const double period = 2 * kPi;
  const auto dt = period / 6000;
  const auto rec = evolve(psi, potential::Harmonic{{1.0}}, c, period, dt, SF, 6000);
  const auto ref = evolve(psi, potential::Harmonic{{1.0}}, c, period, dt / 10, SF, 60000);
  EXPECT_LT(l1_density_distance(rec.snapshots.back(), psi), 1e-4);
  EXPECT_LT(l1_density_distance(rec.snapshots.back(), ref.snapshots.back()), 1e-4);
}

TEST(Continuity, StationaryStateHasTinyResidual) {
  const Grid g = Grid::line(-10, 10, 256);
  const auto rec = evolve(gaussian(g), potential::Harmonic{{1.0}}, PhysicalConstants::natural(1), 0.05, 1e-3, SF, 1);
  EXPECT_LT(continuity_residual(rec, rec.constants), 1e-6);
}

TEST(Continuity, NeedsThreeSnapshots) {
  const Grid g = Grid::line(-10, 10, 64);
  const auto rec = evolve(gaussian(g), potential::Free{}, PhysicalConstants::natural(1), 0.0, 1e-3, SF, 1);
  EXPECT_THROW(continuity_residual(rec, rec.constants), PreconditionError);
}

TEST(Continuity, SecondOrderInDt) {
  const Grid g = Grid::line(-30, 30, 1024);
  const auto psi = gaussian(g, 0.0, 1.0, 1.0);
  const auto c = PhysicalConstants::natural(1);
  std::vector<double> r;
  for (double dt : {4e-3, 2e-3, 1e-3}) r.push_back(continuity_residual(evolve(psi, potential::Free{}, c, 0.2, dt, SF, 1), c));
  EXPECT_NEAR(r[0] / r[1], 4.0, 0.4);
  EXPECT_NEAR(r[1] / r[2], 4.0, 0.4);
}

TEST(Unitarity, NormDriftBothMethods) {
  for (auto m : {SF, CN}) {
    const Grid g = Grid::line(-20, 20, 512, boundary_for(m));
    const auto c = PhysicalConstants::natural(1);
    Propagator prop(g, potential::Harmonic{{0.5}}, c, 1e-3, m);
    auto psi = gaussian(g, 1.0, 1.0, 0.5);
    const double n0 = norm(psi);
    ComplexField f = psi.amplitudes();
    prop.advance(f);
    EXPECT_LT(std::abs(std::sqrt(norm_squared(g, f)) - n0), 1e-12) << to_string(m);
    for (int k = 1; k < 10000; ++k) prop.advance(f);
    EXPECT_LT(std::abs(std::sqrt(norm_squared(g, f)) - n0), 1e-9) << to_string(m);
  }
}

// The packet reaches the walls and reflects; the walls stay at zero and the norm holds.
TEST(Unitarity, CrankNicolsonAtTheWalls) {
  const Grid g = Grid::line(-8, 8, 401, Boundary::Boxed);
  const auto c = PhysicalConstants::natural(1);
  Propagator prop(g, potential::Free{}, c, 1e-3, CN);
  ComplexField f = gaussian(g, 2.0, 1.0, 3.0).amplitudes();
  f.front() = f.back() = 0.0;
  double edge = 0.0;
  for (int k = 0; k < 5000; ++k) {
    prop.advance(f);
    edge = std::max(edge, std::norm(f[1]) + std::norm(f[399]));
    ASSERT_EQ(f.front(), 0.0);
    ASSERT_EQ(f.back(), 0.0);
  }
  EXPECT_GT(edge, 1e-4);
  EXPECT_LT(std::abs(norm_squared(g, f) - 1.0), 1e-10);
}

TEST(Unitarity, TwoDimensionalBothMethods) {
  for (auto m : {SF, CN}) {
    const Grid g = Grid::plane(-8, 8, 64, -8, 8, 64, boundary_for(m));
    const auto c = PhysicalConstants::natural(2);
    Propagator prop(g, potential::CoupledOscillator{1.0}, c, 1e-3, m);
    auto psi = normalized(ScalarWaveFunction::from_function(
        g, [](double x, double y) { return std::exp(-((x - 1) * (x - 1) + y * y) / 2 + kI * 0.3 * y); }));
    ComplexField f = psi.amplitudes();
    for (int k = 0; k < 1000; ++k) prop.advance(f);
    EXPECT_LT(std::abs(std::sqrt(norm_squared(g, f)) - 1.0), 1e-10) << to_string(m);
  }
}

// Forward by t, conjugate, forward by t, conjugate: back to the start.
TEST(TimeReversal, ConjugationUndoesEvolution) {
  for (auto m : {SF, CN}) {
    const Grid g = Grid::line(-20, 20, m == SF ? 512 : 1601, boundary_for(m));
    const auto c = PhysicalConstants::natural(1);
    const Potential v = potential::Harmonic{{0.7}};
    const auto psi = gaussian(g, 1.0, 0.8, 1.5);
    const double t = 0.5, dt = 1e-3;
    auto fwd = evolve(psi, v, c, t, dt, m, 500).snapshots.back();
    const auto fine = evolve(psi, v, c, t, dt / 8, m, 4000).snapshots.back();
    const double one_way = max_distance(fwd.amplitudes(), fine.amplitudes());
    for (auto& z : fwd.amplitudes()) z = std::conj(z);
    auto back = evolve(fwd, v, c, t, dt, m, 500).snapshots.back();
    for (auto& z : back.amplitudes()) z = std::conj(z);
    EXPECT_LE(max_distance(back.amplitudes(), psi.amplitudes()), std::max(10 * one_way, 1e-12)) << to_string(m);
  }
}

// Richardson triplet on the final amplitude: successive differences shrink by 4.
TEST(Convergence, SecondOrderRichardsonTriplet) {
  for (auto m : {SF, CN}) {
    const Grid g = Grid::line(-20, 20, m == SF ? 512 : 801, boundary_for(m));
    const auto c = PhysicalConstants::natural(1);
    const Potential v = potential::SoftCoulomb{1.0};
    const auto psi = gaussian(g, 2.0, 1.0, -1.0);
    std::vector<ComplexField> out;
    for (double dt : {8e-3, 4e-3, 2e-3}) out.push_back(evolve(psi, v, c, 0.4, dt, m, 1000).snapshots.back().amplitudes());
    const double ratio = max_distance(out[0], out[1]) / max_distance(out[1], out[2]);
    EXPECT_NEAR(std::log2(ratio), 2.0, 0.2) << to_string(m);
  }
}

TEST(CrossCheck, SplitFourierAgreesWithCrankNicolson) {
  const auto c = PhysicalConstants::natural(1);
  const Potential v = potential::Harmonic{{1.0}};
  const Grid gp = Grid::line(-16, 16, 512);
  const Grid gb = Grid::line(-16, 16, 2561, Boundary::Boxed);
  const auto a = evolve(gaussian(gp, 1.0, 1.0, 0.5), v, c, 1.0, 1e-3, SF, 1000).snapshots.back();
  const auto b = evolve(gaussian(gb, 1.0, 1.0, 0.5), v, c, 1.0, 1e-3, CN, 1000).snapshots.back();
  // Compare on the periodic grid points, which are every 5th boxed point after the lower end.
  double e = 0;
  for (std::size_t i = 0; i < gp.size(); ++i) e = std::max(e, std::abs(a[i] - b[5 * i]));
  EXPECT_LT(e, 1e-3);
}

TEST(CoupledOscillator, MatchesNormalModeSolutionOnCoarseGrid) {
  for (double kappa : {1.0, 0.5}) {
    const Grid g = Grid::plane(-10, 10, 128, -10, 10, 128);
    const auto c = PhysicalConstants::natural(2);
    const analytic::CoupledOscillator osc(kappa);
    const auto psi0 = ScalarWaveFunction::from_function(g, [&](double x, double y) { return osc.wavefunction(x, y, 0); });
    const auto psi = evolve(psi0, potential::CoupledOscillator{kappa}, c, 0.5, 1e-3, SF, 500).snapshots.back();
    double e = 0;
    for (std::size_t p = 0; p < g.size(); ++p)
      e = std::max(e, std::abs(psi[p] - osc.wavefunction(g.coord(p, 0), g.coord(p, 1), 0.5)));
    EXPECT_LT(e, 1e-3) << "kappa=" << kappa;
  }
}
