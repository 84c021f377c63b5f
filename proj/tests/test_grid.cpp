#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bohm/fields.hpp"
#include "bohm/fft.hpp"

using namespace bohm;

namespace {

constexpr double kPi = std::numbers::pi;

Grid periodic_line(std::size_t n = 256, double half = 20.0) { return Grid::line(-half, half, n); }

// Lattice wavenumber closest to k on a periodic axis.
double lattice_k(const Axis& a, double k) {
  const double dk = 2.0 * kPi / a.length();
  return std::round(k / dk) * dk;
}

}  // namespace

TEST(Axis, PeriodicAndBoxedSpacing) {
  const Axis p = Axis::span(-1.0, 1.0, 10, Boundary::Periodic);
  const Axis b = Axis::span(-1.0, 1.0, 11, Boundary::Boxed);
  EXPECT_DOUBLE_EQ(p.spacing, 0.2);
  EXPECT_DOUBLE_EQ(b.spacing, 0.2);
  EXPECT_DOUBLE_EQ(p.upper(), 1.0);
  EXPECT_DOUBLE_EQ(b.upper(), 1.0);
  EXPECT_FALSE(p.contains(1.0));
  EXPECT_TRUE(b.contains(1.0));
  EXPECT_DOUBLE_EQ(b.weight(0), 0.1);
  EXPECT_DOUBLE_EQ(p.weight(0), 0.2);
}

TEST(Grid, RejectsBadShapes) {
  EXPECT_THROW(Grid(std::vector<Axis>{}), PreconditionError);
  const Axis a = Axis::span(0, 1, 16, Boundary::Periodic);
  EXPECT_THROW(Grid({a, a, a}), PreconditionError);
  EXPECT_THROW(Grid({Axis::span(0, 1, 4, Boundary::Periodic)}), PreconditionError);
}

TEST(Grid, RowMajorIndexing) {
  const Grid g = Grid::plane(-1, 1, 8, -2, 2, 16);
  EXPECT_EQ(g.size(), 128u);
  const std::size_t p = g.index(3, 5);
  EXPECT_EQ(g.axis_index(p, 0), 3u);
  EXPECT_EQ(g.axis_index(p, 1), 5u);
  EXPECT_DOUBLE_EQ(g.coord(p, 0), g.axis(0).coord(3));
  EXPECT_DOUBLE_EQ(g.coord(p, 1), g.axis(1).coord(5));
}

TEST(Norm, UnitGaussian1D) {
  const Grid g = periodic_line(512, 15.0);
  const auto psi = ScalarWaveFunction::from_function(g, [](double x) { return std::pow(kPi, -0.25) * std::exp(-x * x / 2); });
  EXPECT_NEAR(norm(psi), 1.0, 1e-6);
}

TEST(Norm, ProductGaussian2D) {
  const Grid g = Grid::plane(-10, 10, 128, -10, 10, 128);
  const auto psi = ScalarWaveFunction::from_function(
      g, [](double x, double y) { return std::exp(-(x * x + y * y) / 2) / std::sqrt(kPi); });
  EXPECT_NEAR(norm(psi), 1.0, 1e-6);
}

TEST(Norm, BoxedTrapezoid) {
  const Grid g = Grid::line(-15, 15, 601, Boundary::Boxed);
  const auto psi = ScalarWaveFunction::from_function(g, [](double x) { return std::pow(kPi, -0.25) * std::exp(-x * x / 2); });
  EXPECT_NEAR(norm(psi), 1.0, 1e-6);
}

TEST(Norm, ZeroField) {
  const Grid g = periodic_line();
  EXPECT_EQ(norm(ScalarWaveFunction(g, ComplexField(g.size()))), 0.0);
}

TEST(Density, PlaneWaveIsUniform) {
  const Grid g = periodic_line();
  const double L = g.axis(0).length();
  const double k = lattice_k(g.axis(0), 1.3);
  const auto psi = ScalarWaveFunction::from_function(g, [&](double x) { return std::exp(kI * k * x) / std::sqrt(L); });
  for (double r : density(psi)) EXPECT_NEAR(r, 1.0 / L, 1e-15);
}

TEST(Density, RealGaussianSquares) {
  const Grid g = periodic_line();
  const auto psi = ScalarWaveFunction::from_function(g, [](double x) { return std::exp(-x * x / 2); });
  const auto rho = density(psi);
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double x = g.coord(p, 0);
    EXPECT_NEAR(rho[p], std::exp(-x * x), 1e-15);
  }
}

TEST(Density, DisjointBumpsHaveNoCrossTerm) {
  const Grid g = periodic_line(512);
  auto bump = [](double x, double c) { return std::abs(x - c) < 2 ? std::pow(std::cos(kPi * (x - c) / 4), 2) : 0.0; };
  const auto psi = ScalarWaveFunction::from_function(g, [&](double x) { return bump(x, -5) + Complex(0, 2) * bump(x, 5); });
  const auto rho = density(psi);
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double x = g.coord(p, 0);
    EXPECT_NEAR(rho[p], bump(x, -5) * bump(x, -5) + 4 * bump(x, 5) * bump(x, 5), 1e-14);
  }
}

TEST(Gradient, PlaneWaveIsSpectrallyExact) {
  const Grid g = periodic_line();
  const double k = lattice_k(g.axis(0), 2.1);
  const auto psi = ScalarWaveFunction::from_function(g, [&](double x) { return std::exp(kI * k * x); });
  const auto d = gradient(psi, 0);
  for (std::size_t p = 0; p < g.size(); ++p) EXPECT_LT(std::abs(d[p] - kI * k * psi[p]), 1e-8);
}

TEST(Gradient, ConstantIsZero) {
  for (auto b : {Boundary::Periodic, Boundary::Boxed}) {
    const Grid g = Grid::line(-5, 5, 64, b);
    const auto d = gradient(ScalarWaveFunction(g, ComplexField(g.size(), Complex(0.3, -2))), 0);
    for (const auto& z : d) EXPECT_LT(std::abs(z), 1e-12);
  }
}

TEST(Gradient, BoxedGaussianConvergesFourthOrder) {
  auto max_err = [](std::size_t n) {
    const Grid g = Grid::line(-8, 8, n, Boundary::Boxed);
    const auto psi = ScalarWaveFunction::from_function(g, [](double x) { return std::exp(-x * x / 2); });
    const auto d = gradient(psi, 0);
    double e = 0;
    for (std::size_t p = 0; p < g.size(); ++p) e = std::max(e, std::abs(d[p] + g.coord(p, 0) * psi[p]));
    return e;
  };
  const double e1 = max_err(161), e2 = max_err(321);
  EXPECT_LT(e2, 1e-4);
  EXPECT_GT(std::log2(e1 / e2), 3.5);
}

TEST(Gradient, Linearity) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  for (auto b : {Boundary::Periodic, Boundary::Boxed}) {
    const Grid g = Grid::plane(-4, 4, 16, -4, 4, 32, b);
    ComplexField f(g.size()), h(g.size());
    for (auto& z : f) z = {n01(rng), n01(rng)};
    for (auto& z : h) z = {n01(rng), n01(rng)};
    const Complex a(0.7, -1.2), c(-0.4, 2.5);
    ComplexField mix(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) mix[p] = a * f[p] + c * h[p];
    for (std::size_t axis : {0u, 1u}) {
      const auto df = derivative(g, axis, f), dh = derivative(g, axis, h), dm = derivative(g, axis, mix);
      for (std::size_t p = 0; p < g.size(); ++p) EXPECT_LT(std::abs(dm[p] - (a * df[p] + c * dh[p])), 1e-11);
    }
  }
}

TEST(Current, RealWaveFunctionCarriesNoCurrent) {
  const Grid g = Grid::plane(-10, 10, 64, -10, 10, 64);
  const auto psi = ScalarWaveFunction::from_function(
      g, [](double x, double y) { return std::exp(-(x * x + y * y) / 2) / std::sqrt(kPi); });
  const auto j = probability_current(psi, PhysicalConstants::natural(2));
  for (const auto& comp : j.components)
    for (double v : comp) EXPECT_EQ(v, 0.0);
}

TEST(Current, PlaneWave) {
  const Grid g = periodic_line();
  const double L = g.axis(0).length();
  const double k = lattice_k(g.axis(0), -1.7);
  const PhysicalConstants c{0.5, {2.0}};
  const auto psi = ScalarWaveFunction::from_function(g, [&](double x) { return std::exp(kI * k * x) / std::sqrt(L); });
  const auto j = probability_current(psi, c);
  for (double v : j.components[0]) EXPECT_NEAR(v, c.hbar * k / (c.mass(0) * L), 1e-12);
}

// Property: J = rho * v on points above the node threshold, with v from the phase gradient.
TEST(Current, EqualsDensityTimesVelocity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const double k = 2 * u(rng), x0 = 3 * u(rng), s = 1 + 0.5 * u(rng), chirp = u(rng);
    const Grid g = periodic_line(512, 25);
    const auto psi = ScalarWaveFunction::from_function(g, [&](double x) {
      return std::exp(-(x - x0) * (x - x0) / (2 * s * s) + kI * (k * x + chirp * x * x / 2));
    });
    const auto j = probability_current(psi, PhysicalConstants::natural(1));
    const auto rho = density(psi);
    for (std::size_t p = 0; p < g.size(); ++p) {
      if (rho[p] < 1e-9) continue;
      const double v = k + chirp * g.coord(p, 0);
      EXPECT_NEAR(j.components[0][p] / rho[p], v, 1e-6);
    }
  }
}

TEST(Integrate, DensityIntegralEqualsNormSquared) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (auto b : {Boundary::Periodic, Boundary::Boxed}) {
    const Grid g = Grid::plane(-3, 3, 12, -2, 2, 20, b);
    ComplexField f(g.size());
    for (auto& z : f) z = {n01(rng), n01(rng)};
    const auto rho = density(f);
    for (double r : rho) EXPECT_GE(r, 0.0);
    EXPECT_NEAR(integrate(g, rho), norm_squared(g, f), 1e-12);
  }
}

TEST(Fft, RoundTrip) {
  const Grid g = Grid::plane(-3, 3, 16, -2, 2, 32);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  ComplexField f(g.size());
  for (auto& z : f) z = {n01(rng), n01(rng)};
  ComplexField h = f;
  for (std::size_t axis : {0u, 1u}) {
    AxisFft fft(g, axis);
    fft.forward(h);
    fft.backward(h);
  }
  for (std::size_t p = 0; p < f.size(); ++p) EXPECT_LT(std::abs(h[p] - f[p]), 1e-13);
}

TEST(Potential, ValuesAndChecks) {
  const Grid g = Grid::plane(-2, 2, 8, -2, 2, 8);
  const auto c = PhysicalConstants::natural(2);
  const auto v = sample_potential(potential::CoupledOscillator{2.0}, g, c);
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double d = g.coord(p, 0) - g.coord(p, 1);
    EXPECT_DOUBLE_EQ(v[p], d * d);
  }
  EXPECT_THROW(sample_potential(potential::Harmonic{{1.0}}, g, c), PreconditionError);
  EXPECT_THROW(sample_potential(potential::CoupledOscillator{1.0}, Grid::line(0, 1, 8), PhysicalConstants::natural(1)),
               PreconditionError);
  EXPECT_THROW(sample_potential(potential::Sampled{{1.0}}, g, c), PreconditionError);
}

TEST(WaveFunction, RejectsNonFinite) {
  const Grid g = periodic_line(16);
  ComplexField f(16);
  f[3] = {std::nan(""), 0};
  EXPECT_THROW(ScalarWaveFunction(g, f), PreconditionError);
  EXPECT_THROW(ScalarWaveFunction(g, ComplexField(15)), PreconditionError);
}
