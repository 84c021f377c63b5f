#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bohm/analytic.hpp"
#include "bohm/equilibrium.hpp"

using namespace bohm;

namespace {

constexpr double kPi = std::numbers::pi;
const PhysicalConstants k1D = PhysicalConstants::natural(1);
const PhysicalConstants k2D = PhysicalConstants::natural(2);
constexpr auto SF = PropagatorMethod::SplitFourier;

ScalarWaveFunction gaussian(const Grid& g, double x0 = 0.0, double s = 1.0, double k = 0.0) {
  return normalized(ScalarWaveFunction::from_function(
      g, [&](double x) { return std::exp(-(x - x0) * (x - x0) / (2 * s * s) + kI * k * x); }));
}

// Restores the worker count on scope exit.
struct ThreadScope {
  explicit ThreadScope(std::size_t n) : saved(thread_limit()) { thread_limit() = n; }
  ~ThreadScope() { thread_limit() = saved; }
  std::size_t saved;
};

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double var(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / double(v.size() - 1);
}

}  // namespace

TEST(Stats, KolmogorovCriticalValues) {
  EXPECT_NEAR(stats::kolmogorov_q(1.3581), 0.05, 2e-4);
  EXPECT_NEAR(stats::kolmogorov_q(1.6276), 0.01, 1e-4);
  EXPECT_EQ(stats::kolmogorov_q(0.0), 1.0);
  EXPECT_LT(stats::kolmogorov_q(5.0), 1e-20);
}

TEST(Stats, TwoSampleIdenticalAndDisjoint) {
  const std::vector<double> a{1, 2, 3, 4, 5};
  EXPECT_EQ(stats::ks_two_sample(a, a).statistic, 0.0);
  EXPECT_EQ(stats::ks_two_sample(a, {6, 7, 8}).statistic, 1.0);
  // Hand count: at x=2 the ECDFs are 2/4 and 0/2.
  EXPECT_DOUBLE_EQ(stats::ks_two_sample({1, 2, 5, 6}, {3, 4}).statistic, 0.5);
}

TEST(Stats, OneSampleUniform) {
  const auto r = stats::ks_one_sample({0.1, 0.4, 0.7}, [](double x) { return std::clamp(x, 0.0, 1.0); });
  // max(i+1)/n - F and F - i/n: 1/3-0.1, 0.4-1/3, 2/3-0.4, 0.7-2/3, 1-0.7 -> 0.3
  EXPECT_NEAR(r.statistic, 0.3, 1e-15);
}

TEST(Sampling, ConcentratedDensityStaysInItsCell) {
  const Grid g = Grid::line(-5, 5, 64);
  ComplexField f(g.size());
  f[20] = 1.0 / std::sqrt(g.axis(0).spacing);
  const ScalarWaveFunction psi(g, f);
  const auto ens = sample_density(psi, 500, 3);
  const double lo = g.axis(0).coord(20) - 0.5 * g.axis(0).spacing, hi = lo + g.axis(0).spacing;
  for (const auto& m : ens.members) {
    EXPECT_GE(m.q[0], lo);
    EXPECT_LT(m.q[0], hi);
  }
}

TEST(Sampling, GaussianMoments) {
  const Grid g = Grid::line(-10, 10, 512);
  const auto psi = gaussian(g);
  const auto xs = sample_density(psi, 10000, 42).coordinate(0);
  EXPECT_LT(std::abs(mean(xs)), 0.04);
  EXPECT_NEAR(var(xs), 0.5, 0.05);
  // Independent draw from the same discrete cell measure.
  std::vector<double> w(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) w[p] = std::norm(psi[p]);
  std::mt19937_64 rng(2024);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::uniform_real_distribution<double> jit(-0.5, 0.5);
  std::vector<double> ref(10000);
  for (auto& x : ref) x = g.axis(0).coord(pick(rng)) + jit(rng) * g.axis(0).spacing;
  EXPECT_LT(std::abs(mean(ref)), 0.04);
  EXPECT_NEAR(var(ref), 0.5, 0.05);
  EXPECT_GT(stats::ks_two_sample(xs, ref).p_value, 0.01);
}

TEST(Sampling, DeterministicUnderSeedAndThreads) {
  const Grid g = Grid::plane(-6, 6, 64, -6, 6, 64);
  const auto psi = normalized(ScalarWaveFunction::from_function(g, [](double x, double y) { return std::exp(-(x * x + y * y) / 2); }));
  Ensemble a, b, c;
  {
    ThreadScope one(1);
    a = sample_density(psi, 3000, 7);
    b = sample_density(psi, 3000, 7);
  }
  {
    ThreadScope four(4);
    c = sample_density(psi, 3000, 7);
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.members[i].q, b.members[i].q);
    EXPECT_EQ(a.members[i].q, c.members[i].q);
  }
  const auto d = sample_density(psi, 3000, 8);
  EXPECT_NE(a.members[0].q, d.members[0].q);
}

TEST(Sampling, RequiresNormalizedInput) {
  const Grid g = Grid::line(-5, 5, 64);
  auto psi = gaussian(g);
  for (auto& z : psi.amplitudes()) z *= 1.1;
  EXPECT_THROW(sample_density(psi, 10, 1), PreconditionError);
}

TEST(Transport, StationaryStateLeavesEnsembleInPlace) {
  const Grid g = Grid::line(-10, 10, 256);
  const auto psi = gaussian(g);
  const auto rec = evolve(psi, potential::Harmonic{{1.0}}, k1D, 1.0, 2e-5, SF, 500);
  const auto ens = sample_density(psi, 200, 5);
  const auto out = evolve_ensemble(ens, rec, NodePolicy::halt(), 1e-2);
  ASSERT_EQ(out.ensemble.size(), ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i) EXPECT_NEAR(out.ensemble.members[i].q[0], ens.members[i].q[0], 1e-9);
}

TEST(Transport, DiagonalMembersScaleRadially) {
  const Grid g = Grid::plane(-10, 10, 128, -10, 10, 128);
  const auto psi0 = ScalarWaveFunction::from_function(
      g, [](double x, double y) { return analytic::coupled_oscillator_wavefunction(x, y, 0); });
  const auto rec = evolve(psi0, potential::CoupledOscillator{analytic::kExampleCoupling}, k2D, 1.0, 1e-3, SF, 10);
  Ensemble ens;
  for (double s : {-1.2, -0.4, 0.3, 0.9}) ens.members.push_back(Configuration::at(s, s, 0.0));
  const auto out = evolve_ensemble(ens, rec, NodePolicy::halt(), 1e-2);
  ASSERT_EQ(out.ensemble.size(), ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i) {
    EXPECT_NEAR(out.ensemble.members[i].q[0], ens.members[i].q[0] * std::sqrt(2.0), 1e-3);
    EXPECT_NEAR(out.ensemble.members[i].q[1], ens.members[i].q[1] * std::sqrt(2.0), 1e-3);
  }
}

TEST(Transport, FreeSpreadingEquilibriumHitsNoNodes) {
  const Grid g = Grid::line(-30, 30, 1024);
  const auto psi = gaussian(g, 0.0, 1.0, 0.5);
  const auto rec = evolve(psi, potential::Free{}, k1D, 1.0, 1e-3, SF, 10);
  const auto out = evolve_ensemble(sample_density(psi, 2000, 9), rec, NodePolicy::halt(), 1e-2);
  EXPECT_EQ(out.hit_node, 0u);
  EXPECT_EQ(out.left_grid, 0u);
}

TEST(Distance, IidSampleIsClose) {
  const Grid g = Grid::line(-10, 10, 512);
  const auto psi = gaussian(g);
  const auto d = equivariance_distance(sample_density(psi, 10000, 11), psi, 50);
  EXPECT_LT(d.l1, 0.05);
  ASSERT_TRUE(d.ks);
  EXPECT_GT(d.ks->p_value, 0.01);
}

TEST(Distance, ShiftedSampleIsFar) {
  const Grid g = Grid::line(-10, 10, 512);
  const auto psi = gaussian(g);
  const double sigma = 1.0 / std::sqrt(2.0);  // of |psi|^2
  const auto shifted = gaussian(g, sigma);
  const auto d = equivariance_distance(sample_density(shifted, 10000, 11), psi, 50);
  // Exact L1 gap between the binned densities.
  const auto a = CellMeasure(psi).bin_masses(50), b = CellMeasure(shifted).bin_masses(50);
  double gap = 0;
  for (std::size_t i = 0; i < a.size(); ++i) gap += std::abs(a[i] - b[i]);
  EXPECT_GT(gap, 0.3);
  EXPECT_GT(d.l1, 0.3);
  EXPECT_NEAR(d.l1, gap, 0.05);
}

TEST(Distance, SingleMember) {
  const Grid g = Grid::line(-10, 10, 512);
  const auto psi = gaussian(g);
  const auto ens = sample_density(psi, 1, 1);
  const auto masses = CellMeasure(psi).bin_masses(50);
  const auto d = equivariance_distance(ens, psi, 50);
  const double mmax = *std::max_element(masses.begin(), masses.end());
  EXPECT_GE(d.l1, 2 * (1 - mmax) - 1e-12);
  EXPECT_LE(d.l1, 2.0);
}

TEST(Distance, BinMassesSumToOne) {
  for (auto b : {Boundary::Periodic, Boundary::Boxed}) {
    const Grid g = Grid::plane(-5, 5, 40, -3, 3, 30, b);
    const auto psi = normalized(ScalarWaveFunction::from_function(g, [](double x, double y) { return std::exp(-(x * x + y * y) / 4) + 0.0 * kI; }));
    const auto m = CellMeasure(psi).bin_masses(7);
    double s = 0;
    for (double v : m) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

// Sample, transport to t=1 and compare with |psi_1|^2 and with a fresh sample from it.
TEST(Equivariance, FreeGaussianTransport) {
  const Grid g = Grid::line(-25, 25, 1024);
  const auto psi0 = gaussian(g, 0.0, 1.0, 0.7);
  const auto rec = evolve(psi0, potential::Free{}, k1D, 1.0, 1e-3, SF, 10);
  const auto out = evolve_ensemble(sample_density(psi0, 10000, 21), rec, NodePolicy::halt(), 1e-2);
  ASSERT_EQ(out.ensemble.size(), 10000u);
  const auto& psi1 = rec.snapshots.back();
  EXPECT_LT(equivariance_distance(out.ensemble, psi1, 50).l1, 0.05);
  const auto fresh = sample_density(psi1, 10000, 22, 1.0);
  EXPECT_GT(stats::ks_two_sample(out.ensemble.coordinate(0), fresh.coordinate(0)).p_value, 0.01);
}

TEST(Conditional, ProductStateGivesSystemFactor) {
  const Grid g = Grid::plane(-8, 8, 64, -8, 8, 64);
  auto sys = [](double x) { return std::exp(-(x - 1) * (x - 1) / 2 + kI * 0.4 * x); };
  auto env = [](double y) { return std::exp(-y * y / 3) * (1.0 + 0.2 * y); };
  const auto psi = ScalarWaveFunction::from_function(g, [&](double x, double y) { return sys(x) * env(y); });
  const auto ref = normalized(ScalarWaveFunction::from_function(g.axis_grid(0), sys));
  for (double y : {-1.3, 0.0, 0.77, 2.5}) EXPECT_LT(phase_aligned_distance(conditional_wavefunction(psi, y), ref), 1e-8);
}

TEST(Conditional, OutsideGridAndZeroSlice) {
  const Grid g = Grid::plane(-8, 8, 64, -8, 8, 64, Boundary::Boxed);
  const auto psi = ScalarWaveFunction::from_function(g, [](double x, double y) { return Complex(std::abs(y) < 4 ? std::exp(-x * x) : 0.0); });
  EXPECT_THROW(conditional_wavefunction(psi, 9.0), OutOfBounds);
  EXPECT_THROW(conditional_wavefunction(psi, 6.0), ZeroSlice);
}

// Numerically evolved Psi_t sliced at Y_t against the closed-form conditional wave function.
TEST(Conditional, CoupledOscillatorAlongTrajectory) {
  const Grid g = Grid::plane(-10, 10, 256, -10, 10, 256);
  const auto psi0 = ScalarWaveFunction::from_function(
      g, [](double x, double y) { return analytic::coupled_oscillator_wavefunction(x, y, 0); });
  const auto rec = evolve(psi0, potential::CoupledOscillator{analytic::kExampleCoupling}, k2D, 1.0, 1e-3, SF, 1000);
  const auto& psi1 = rec.snapshots.back();
  for (auto [x0, y0] : {std::pair{0.3, -0.2}, std::pair{-1.0, 0.8}, std::pair{1.2, 1.1}}) {
    const double yt = analytic::coupled_oscillator_trajectory(x0, y0, 1.0).y;
    const auto oracle = normalized(ScalarWaveFunction::from_function(
        g.axis_grid(0), [&](double x) { return analytic::conditional_oracle(x0, y0, 1.0, x); }));
    EXPECT_LT(phase_aligned_distance(conditional_wavefunction(psi1, yt), oracle), 1e-3);
  }
}

// The conditional wave function of the entangled closed form obeys no quadratic Schroedinger equation.
TEST(Conditional, NoSystemSchrodingerEquation) {
  std::vector<double> xs;
  for (double x = -2; x <= 2; x += 0.1) xs.push_back(x);
  for (auto [x0, y0] : {std::pair{0.3, -0.2}, std::pair{-1.0, 0.8}}) {
    auto oracle = [&](double x, double t) { return analytic::conditional_oracle(x0, y0, t, x); };
    EXPECT_GT(best_quadratic_schrodinger_residual(oracle, 1.0, xs), 1e-2);
    const analytic::CoupledOscillator osc(1.0);
    auto stated = [&](double x, double t) { return osc.wavefunction(x, osc.trajectory(x0, y0, t).y, t); };
    EXPECT_GT(best_quadratic_schrodinger_residual(stated, 1.0, xs), 1e-2);
  }
  // Control: a free Gaussian does satisfy one.
  auto free_packet = [](double x, double t) {
    const Complex z{1.0, t};
    return std::exp(-x * x / (2.0 * z)) / std::sqrt(z);
  };
  EXPECT_LT(best_quadratic_schrodinger_residual(free_packet, 1.0, xs), 1e-6);
}

TEST(Effective, ProductInOneCell) {
  const Grid g = Grid::plane(-8, 8, 64, -10, 10, 128);
  auto sys = [](double x) { return std::exp(-x * x / 2 + kI * 0.3 * x); };
  auto env = [](double y) { return std::exp(-(y - 5) * (y - 5)); };
  const auto psi = normalized(ScalarWaveFunction::from_function(g, [&](double x, double y) { return sys(x) * env(y); }));
  const MacroPartition part{1, {{-10, 0, 1}, {0, 10, 2}}};
  const auto eff = effective_decomposition(psi, part, 5.2);
  ASSERT_TRUE(eff);
  EXPECT_EQ(eff->label, 2);
  EXPECT_LT(eff->overlap, 1e-8);
  EXPECT_LT(norm(eff->remainder), 1e-8);
  EXPECT_NEAR(norm(eff->system), 1.0, 1e-12);
  EXPECT_LT(phase_aligned_distance(eff->system, normalized(ScalarWaveFunction::from_function(g.axis_grid(0), sys))), 1e-8);
  EXPECT_LT(phase_aligned_distance(normalized(eff->environment),
                                   normalized(ScalarWaveFunction::from_function(g.axis_grid(1), [&](double y) { return Complex(env(y)); }))),
            1e-8);
  EXPECT_NEAR(norm(eff->environment), 1.0, 1e-8);
}

TEST(Effective, TwoBranchesPickTheOccupiedCell) {
  const Grid g = Grid::plane(-8, 8, 64, -12, 12, 128);
  auto s1 = [](double x) { return std::exp(-(x + 2) * (x + 2) / 2); };
  auto s2 = [](double x) { return std::exp(-(x - 2) * (x - 2) / 2 + kI * x); };
  const auto psi = normalized(ScalarWaveFunction::from_function(
      g, [&](double x, double y) { return 0.6 * s1(x) * std::exp(-(y + 6) * (y + 6)) + 0.8 * s2(x) * std::exp(-(y - 6) * (y - 6)); }));
  const MacroPartition part{1, {{-12, 0, 1}, {0, 12, 2}}};
  const auto eff = effective_decomposition(psi, part, -5.5);
  ASSERT_TRUE(eff);
  EXPECT_EQ(eff->label, 1);
  EXPECT_LT(eff->overlap, 1e-8);
  EXPECT_LT(phase_aligned_distance(eff->system, normalized(ScalarWaveFunction::from_function(g.axis_grid(0), s1))), 1e-6);
  EXPECT_LT(phase_aligned_distance(conditional_wavefunction(psi, -5.5), eff->system), 1e-4);
  EXPECT_THROW(effective_decomposition(psi, MacroPartition{1, {{-12, -1, 1}}}, 3.0), PreconditionError);
}

TEST(Effective, EntangledGaussianHasNone) {
  const Grid g = Grid::plane(-10, 10, 128, -10, 10, 128);
  const auto psi = ScalarWaveFunction::from_function(
      g, [](double x, double y) { return analytic::coupled_oscillator_wavefunction(x, y, 1.0); });
  const MacroPartition part{1, {{-10, 0, 1}, {0, 10, 2}}};
  EXPECT_FALSE(effective_decomposition(psi, part, 0.5));
  EXPECT_FALSE(effective_decomposition(psi, part, -0.5));
}

// Whenever an effective wave function exists it agrees with the conditional one at the same Y.
TEST(Effective, AgreesWithConditionalWheneverItExists) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  const Grid g = Grid::plane(-8, 8, 64, -12, 12, 128);
  const MacroPartition part{1, {{-12, 0, 1}, {0, 12, 2}}};
  int found = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const double a = 2 * u(rng), k = u(rng), sep = 4 + 3 * u(rng), mix = u(rng), w = 1 + 0.5 * u(rng);
    const auto psi = normalized(ScalarWaveFunction::from_function(g, [&](double x, double y) {
      return std::exp(-(x - a) * (x - a) / 2 + kI * k * x) * std::exp(-(y + sep) * (y + sep) / (2 * w * w)) +
             mix * std::exp(-(x + a) * (x + a) / 2) * std::exp(-(y - sep) * (y - sep) / (2 * w * w)) *
                 std::exp(kI * mix * x * (y - sep));
    }));
    for (double y : {-sep + 0.3 * u(rng), sep + 0.3 * u(rng)}) {
      const auto eff = effective_decomposition(psi, part, y);
      if (!eff) continue;
      ++found;
      EXPECT_LT(phase_aligned_distance(conditional_wavefunction(psi, y), eff->system), 1e-4);
    }
  }
  EXPECT_GT(found, 10);
}

TEST(Partition, Validation) {
  EXPECT_THROW((MacroPartition{1, {}}).validate(), PreconditionError);
  EXPECT_THROW((MacroPartition{1, {{0, 1, 1}, {0.5, 2, 2}}}).validate(), PreconditionError);
  EXPECT_THROW((MacroPartition{1, {{0, 1, 1}, {1, 2, 1}}}).validate(), PreconditionError);
  const MacroPartition p{1, {{0, 1, 1}, {1, 2, 2}}};
  EXPECT_EQ(p.cell_of(1.0), 1u);
  EXPECT_FALSE(p.cell_of(2.0));
}

TEST(Collapse, CertainOutcome) {
  CollapseConfig cfg;
  cfg.c1 = 1.0;
  cfg.c2 = 0.0;
  cfg.members = 1000;
  const auto rep = collapse_experiment(cfg);
  ASSERT_EQ(rep.outcomes.size(), 2u);
  EXPECT_EQ(rep.outcomes[0].frequency, 1.0);
  EXPECT_EQ(rep.outcomes[1].count, 0u);
  ASSERT_TRUE(rep.outcomes[0].effective_error);
  EXPECT_LT(*rep.outcomes[0].effective_error, 1e-3);
  EXPECT_EQ(rep.hit_node, 0u);
  EXPECT_LE(rep.classification_time, cfg.t_meas);
}

TEST(Collapse, EqualWeights) {
  CollapseConfig cfg;
  const auto rep = collapse_experiment(cfg);
  EXPECT_EQ(rep.classified, cfg.members);
  EXPECT_GE(rep.outcomes[0].frequency, 0.47);
  EXPECT_LE(rep.outcomes[0].frequency, 0.53);
  for (const auto& o : rep.outcomes) {
    ASSERT_TRUE(o.effective_error);
    EXPECT_LT(*o.effective_error, 1e-3);
    EXPECT_LT(*o.conditional_error, 1e-4);
  }
  // Cell disjointness grows: leakage is non-increasing once the pointer moves.
  for (std::size_t k = 1; k < rep.leakage.size(); ++k) EXPECT_LE(rep.leakage[k], rep.leakage[k - 1] * (1 + 1e-9) + 1e-15);
  EXPECT_LT(double(rep.hit_node) / double(cfg.members), 1e-3);
}

TEST(Collapse, UnequalWeights) {
  CollapseConfig cfg;
  cfg.c1 = std::sqrt(0.8);
  cfg.c2 = std::sqrt(0.2);
  cfg.seed = 2;
  const auto rep = collapse_experiment(cfg);
  EXPECT_GE(rep.outcomes[0].frequency, 0.77);
  EXPECT_LE(rep.outcomes[0].frequency, 0.83);
}

TEST(Collapse, WeakCouplingIsInsufficient) {
  CollapseConfig cfg;
  cfg.coupling = 0.5;
  cfg.members = 10;
  cfg.t_meas = 0.1;
  EXPECT_THROW(collapse_experiment(cfg), InsufficientSeparation);
}
