#pragma once

// Quantum-equilibrium ensembles: sampling from |psi|^2, transport along the guidance flow,
// empirical-vs-|psi|^2 distances, conditional and effective wave functions, and a two-outcome
// pointer measurement demonstrating collapse.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bohm/analytic.hpp"
#include "bohm/fields.hpp"
#include "bohm/guidance.hpp"
#include "bohm/parallel.hpp"
#include "bohm/propagate.hpp"
#include "bohm/random.hpp"
#include "bohm/stats.hpp"

namespace bohm {

struct Ensemble {
  std::vector<Configuration> members;
  std::uint64_t seed = 0;
  std::string source;

  double time() const { return members.empty() ? 0.0 : members.front().time; }
  std::size_t size() const { return members.size(); }

  std::vector<double> coordinate(std::size_t axis) const {
    std::vector<double> out;
    out.reserve(members.size());
    for (const auto& m : members) out.push_back(m.q[axis]);
    return out;
  }
};

namespace detail {

struct Interval {
  double lo, hi;
};

// Support of grid cell i along an axis (one or two pieces after periodic wrapping).
inline std::vector<Interval> cell_pieces(const Axis& a, std::size_t i) {
  const double x = a.coord(i), h = a.spacing;
  if (a.boundary == Boundary::Boxed) {
    return {{std::max(a.lower, x - 0.5 * h), std::min(a.last(), x + 0.5 * h)}};
  }
  const double lo = x - 0.5 * h, hi = x + 0.5 * h;
  if (lo < a.lower) return {{a.lower, hi}, {lo + a.length(), a.upper()}};
  if (hi > a.upper()) return {{lo, a.upper()}, {a.lower, hi - a.length()}};
  return {{lo, hi}};
}

inline double cell_length(const Axis& a, std::size_t i) {
  double s = 0.0;
  for (const auto& p : cell_pieces(a, i)) s += p.hi - p.lo;
  return s;
}

// Uniform draw inside cell i.
inline double jitter_in_cell(const Axis& a, std::size_t i, double u) {
  double pos = u * cell_length(a, i);
  for (const auto& p : cell_pieces(a, i)) {
    if (pos <= p.hi - p.lo) return std::min(p.lo + pos, std::nextafter(p.hi, p.lo));
    pos -= p.hi - p.lo;
  }
  return cell_pieces(a, i).back().lo;
}

inline double overlap(const Interval& a, double lo, double hi) { return std::max(0.0, std::min(a.hi, hi) - std::max(a.lo, lo)); }

}  // namespace detail

// The discrete cell measure |psi_p|^2 w_p with uniform density inside each cell.
class CellMeasure {
 public:
  explicit CellMeasure(const ScalarWaveFunction& psi) : grid_(psi.grid()), mass_(psi.size()), cumulative_(psi.size()) {
    double s = 0.0;
    for (std::size_t p = 0; p < psi.size(); ++p) {
      mass_[p] = grid_.weight(p) * std::norm(psi[p]);
      s += mass_[p];
      cumulative_[p] = s;
    }
    total_ = s;
  }

  const Grid& grid() const { return grid_; }
  double total() const { return total_; }
  double mass(std::size_t p) const { return mass_[p] / total_; }

  Configuration sample(std::mt19937_64& rng) const {
    const double u = uniform01(rng) * total_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    // Skip zero-mass cells that share a cumulative value with their predecessor.
    if (it == cumulative_.end()) it = std::prev(it);
    auto p = static_cast<std::size_t>(it - cumulative_.begin());
    while (mass_[p] == 0.0 && p > 0) --p;
    Configuration c;
    c.dimension = grid_.dimension();
    for (std::size_t k = 0; k < c.dimension; ++k)
      c.q[k] = detail::jitter_in_cell(grid_.axis(k), grid_.axis_index(p, k), uniform01(rng));
    return c;
  }

  // CDF along a 1D grid.
  double cdf(double x) const {
    const Axis& a = grid_.axis(0);
    double s = 0.0;
    for (std::size_t i = 0; i < a.count; ++i) {
      if (mass_[i] == 0.0) continue;
      const double len = detail::cell_length(a, i);
      for (const auto& piece : detail::cell_pieces(a, i)) s += mass_[i] * detail::overlap(piece, a.lower, x) / len;
    }
    return s / total_;
  }

  // Mass of every bin of a uniform binning of each axis over [lower, upper].
  std::vector<double> bin_masses(std::size_t bins) const {
    const std::size_t d = grid_.dimension();
    std::vector<std::vector<std::vector<std::pair<std::size_t, double>>>> per_axis(d);
    for (std::size_t k = 0; k < d; ++k) {
      const Axis& a = grid_.axis(k);
      const double bw = a.length() / static_cast<double>(bins);
      per_axis[k].resize(a.count);
      for (std::size_t i = 0; i < a.count; ++i) {
        const double len = detail::cell_length(a, i);
        for (const auto& piece : detail::cell_pieces(a, i)) {
          const auto b0 = static_cast<std::size_t>(std::clamp((piece.lo - a.lower) / bw, 0.0, double(bins - 1)));
          const auto b1 = static_cast<std::size_t>(std::clamp((piece.hi - a.lower) / bw, 0.0, double(bins - 1)));
          for (std::size_t b = b0; b <= b1; ++b) {
            const double f = detail::overlap(piece, a.lower + b * bw, a.lower + (b + 1) * bw) / len;
            if (f > 0.0) per_axis[k][i].emplace_back(b, f);
          }
        }
      }
    }
    std::vector<double> out(d == 1 ? bins : bins * bins, 0.0);
    for (std::size_t p = 0; p < mass_.size(); ++p) {
      if (mass_[p] == 0.0) continue;
      const auto& fx = per_axis[0][grid_.axis_index(p, 0)];
      if (d == 1) {
        for (auto [b, f] : fx) out[b] += mass_[p] * f / total_;
      } else {
        const auto& fy = per_axis[1][grid_.axis_index(p, 1)];
        for (auto [bx, f1] : fx)
          for (auto [by, f2] : fy) out[bx * bins + by] += mass_[p] * f1 * f2 / total_;
      }
    }
    return out;
  }

 private:
  Grid grid_;
  std::vector<double> mass_;
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

inline constexpr double kSamplingNormTolerance = 1e-6;

// n configurations distributed as |psi|^2; member i draws from its own (seed, i) stream.
inline Ensemble sample_density(const ScalarWaveFunction& psi, std::size_t n, std::uint64_t seed, double time = 0.0) {
  require(n >= 1, "ensemble size must be at least 1");
  require(std::abs(norm(psi) - 1.0) < kSamplingNormTolerance, "sampling requires a normalized wave function");
  const CellMeasure measure(psi);
  Ensemble ens{std::vector<Configuration>(n), seed, "|psi|^2 sample"};
  parallel_for(n, [&](std::size_t i) {
    auto rng = member_rng(seed, i);
    ens.members[i] = measure.sample(rng);
    ens.members[i].time = time;
  });
  return ens;
}

struct EnsembleTransport {
  Ensemble ensemble;  // Completed members only, at the final time
  std::vector<Trajectory> trajectories;
  std::size_t hit_node = 0;
  std::size_t left_grid = 0;
};

inline EnsembleTransport evolve_ensemble(const Ensemble& ens, const RecordField& field, double dt_ode,
                                         bool keep_trajectories = false) {
  std::vector<Trajectory> tr(ens.size());
  parallel_for(ens.size(), [&](std::size_t i) { tr[i] = integrate_trajectory(ens.members[i], field, dt_ode); });
  EnsembleTransport out;
  out.ensemble.seed = ens.seed;
  out.ensemble.source = ens.source + " transported";
  for (const auto& t : tr) {
    if (t.status == TrajectoryStatus::Completed)
      out.ensemble.members.push_back(t.final());
    else if (t.status == TrajectoryStatus::HitNode)
      ++out.hit_node;
    else
      ++out.left_grid;
  }
  if (keep_trajectories) out.trajectories = std::move(tr);
  return out;
}

inline EnsembleTransport evolve_ensemble(const Ensemble& ens, const EvolutionRecord& rec, const NodePolicy& policy,
                                         double dt_ode) {
  return evolve_ensemble(ens, RecordField(rec, policy), dt_ode);
}

struct EquivarianceDistance {
  double l1 = 0.0;
  std::optional<stats::KsResult> ks;  // 1D only
};

// L1 distance between the binned empirical density and |psi|^2 integrated per bin; bins span the
// full extent of each axis. Also the one-sample KS statistic against the |psi|^2 CDF in 1D.
inline EquivarianceDistance equivariance_distance(const Ensemble& ens, const ScalarWaveFunction& psi, std::size_t bins) {
  require(bins >= 1, "need at least one bin");
  require(ens.size() >= 1, "empty ensemble");
  const CellMeasure measure(psi);
  const std::vector<double> expected = measure.bin_masses(bins);
  std::vector<double> counts(expected.size(), 0.0);
  const Grid& g = psi.grid();
  for (const auto& m : ens.members) {
    std::size_t flat = 0;
    for (std::size_t k = 0; k < g.dimension(); ++k) {
      const Axis& a = g.axis(k);
      const auto b = static_cast<std::size_t>(
          std::clamp(std::floor((m.q[k] - a.lower) / (a.length() / double(bins))), 0.0, double(bins - 1)));
      flat = flat * bins + b;
    }
    counts[flat] += 1.0;
  }
  EquivarianceDistance out;
  const double n = static_cast<double>(ens.size());
  for (std::size_t b = 0; b < counts.size(); ++b) out.l1 += std::abs(counts[b] / n - expected[b]);
  if (g.dimension() == 1) out.ks = stats::ks_one_sample(ens.coordinate(0), [&](double x) { return measure.cdf(x); });
  return out;
}

// --- conditional and effective wave functions -------------------------------------------------

inline constexpr double kZeroSliceNorm = 1e-12;

// x -> Psi(x, Y), normalized.
inline ScalarWaveFunction conditional_wavefunction(const ScalarWaveFunction& psi, double y) {
  const Grid& g = psi.grid();
  require(g.dimension() == 2, "conditional wave function needs a 2D field");
  const detail::Stencil st = detail::cubic_stencil(g.axis(1), y);
  const std::size_t nx = g.axis(0).count, ny = g.axis(1).count;
  ComplexField slice(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    Complex s{};
    for (int b = 0; b < 4; ++b) s += st.weight[b] * psi[i * ny + st.index[b]];
    slice[i] = s;
  }
  ScalarWaveFunction out(g.axis_grid(0), std::move(slice));
  const double n = norm(out);
  if (n < kZeroSliceNorm) throw ZeroSlice("conditional slice at y=" + std::to_string(y) + " has zero norm");
  for (auto& z : out.amplitudes()) z /= n;
  return out;
}

struct MacroCell {
  double lower;
  double upper;  // [lower, upper)
  int label;
};

struct MacroPartition {
  std::size_t axis = 1;  // environment coordinate
  std::vector<MacroCell> cells;

  void validate() const {
    require(!cells.empty(), "partition has no cells");
    std::vector<MacroCell> sorted = cells;
    std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.lower < b.lower; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      require(sorted[i].lower < sorted[i].upper, "partition cell is empty");
      if (i > 0) require(sorted[i - 1].upper <= sorted[i].lower, "partition cells overlap");
      for (std::size_t j = 0; j < i; ++j) require(sorted[i].label != sorted[j].label, "partition labels must be unique");
    }
  }

  std::optional<std::size_t> cell_of(double y) const {
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (y >= cells[i].lower && y < cells[i].upper) return i;
    return std::nullopt;
  }
};

struct EffectiveDecomposition {
  int label = 0;
  ScalarWaveFunction system;       // psi(x), unit norm
  ScalarWaveFunction environment;  // Phi(y), supported in the cell; carries the branch amplitude
  ScalarWaveFunction remainder;    // Psi - psi (x) Phi
  double overlap = 0.0;            // mass of the remainder on the cell
  double fit_residual = 0.0;       // relative Frobenius residual of the rank-one fit in the cell
};

inline constexpr double kRankOneResidual = 1e-3;

// Best product fit psi(x) Phi(y) of Psi restricted to the partition cell containing Y.
// Returns nullopt when the fit residual exceeds `max_residual` (no effective wave function).
inline std::optional<EffectiveDecomposition> effective_decomposition(const ScalarWaveFunction& psi,
                                                                     const MacroPartition& part, double y,
                                                                     double max_residual = kRankOneResidual) {
  const Grid& g = psi.grid();
  require(g.dimension() == 2, "effective decomposition needs a 2D field");
  require(part.axis == 1, "the environment must be the second coordinate");
  part.validate();
  const auto ci = part.cell_of(y);
  if (!ci) throw PreconditionError("Y=" + std::to_string(y) + " lies in no partition cell");
  const MacroCell& cell = part.cells[*ci];
  const Axis& ax = g.axis(0);
  const Axis& ay = g.axis(1);
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < ay.count; ++j)
    if (ay.coord(j) >= cell.lower && ay.coord(j) < cell.upper) cols.push_back(j);
  require(!cols.empty(), "partition cell contains no grid points");

  Eigen::MatrixXcd m(ax.count, cols.size());
  for (std::size_t i = 0; i < ax.count; ++i)
    for (std::size_t c = 0; c < cols.size(); ++c)
      m(i, c) = std::sqrt(ax.weight(i) * ay.weight(cols[c])) * psi[g.index(i, cols[c])];
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double total = sv.squaredNorm();
  if (total == 0.0) return std::nullopt;
  const double residual = std::sqrt(std::max(0.0, total - sv(0) * sv(0)) / total);
  if (residual > max_residual) return std::nullopt;

  Eigen::VectorXcd u = svd.matrixU().col(0);
  Eigen::VectorXcd v = svd.matrixV().col(0);
  // Fix the phase: largest system amplitude real and positive.
  Eigen::Index imax = 0;
  u.cwiseAbs().maxCoeff(&imax);
  const Complex phase = std::conj(u(imax)) / std::abs(u(imax));
  u *= phase;
  v *= phase;  // M = s u v^H is unchanged

  EffectiveDecomposition out;
  out.label = cell.label;
  out.fit_residual = residual;
  ComplexField sys(ax.count), env(ay.count, Complex{});
  for (std::size_t i = 0; i < ax.count; ++i) sys[i] = u(static_cast<Eigen::Index>(i)) / std::sqrt(ax.weight(i));
  for (std::size_t c = 0; c < cols.size(); ++c)
    env[cols[c]] = sv(0) * std::conj(v(static_cast<Eigen::Index>(c))) / std::sqrt(ay.weight(cols[c]));
  out.system = ScalarWaveFunction(g.axis_grid(0), sys);
  out.environment = ScalarWaveFunction(g.axis_grid(1), env);
  ComplexField rem(g.size());
  double on_cell = 0.0;
  for (std::size_t i = 0; i < ax.count; ++i)
    for (std::size_t j = 0; j < ay.count; ++j) {
      const std::size_t p = g.index(i, j);
      rem[p] = psi[p] - sys[i] * env[j];
      if (ay.coord(j) >= cell.lower && ay.coord(j) < cell.upper) on_cell += g.weight(p) * std::norm(rem[p]);
    }
  out.remainder = ScalarWaveFunction(g, std::move(rem));
  out.overlap = on_cell;
  return out;
}

// Relative residual of i d_t psi = [-1/2 d_x^2 + c0 + c1 x + c2 x^2] psi for the best real c1, c2
// and complex c0, where psi_t(x) = field(x, t) is supplied as a function (hbar = m = 1).
template <class Field>
double best_quadratic_schrodinger_residual(const Field& field, double t, const std::vector<double>& xs) {
  const double dt = 1e-3, dx = 1e-3;
  const std::size_t n = xs.size();
  Eigen::MatrixXd a(2 * n, 4);
  Eigen::VectorXd b(2 * n);
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xs[i];
    auto f = [&](double xx, double tt) { return field(xx, tt); };
    const Complex psi = f(x, t);
    const Complex dpsi_dt =
        (-f(x, t + 2 * dt) + 8.0 * f(x, t + dt) - 8.0 * f(x, t - dt) + f(x, t - 2 * dt)) / (12.0 * dt);
    const Complex d2 = (-f(x + 2 * dx, t) + 16.0 * f(x + dx, t) - 30.0 * psi + 16.0 * f(x - dx, t) - f(x - 2 * dx, t)) /
                       (12.0 * dx * dx);
    const Complex rhs = kI * dpsi_dt + 0.5 * d2;
    const Complex basis[4] = {psi, kI * psi, x * psi, x * x * psi};
    for (int k = 0; k < 4; ++k) {
      a(2 * i, k) = basis[k].real();
      a(2 * i + 1, k) = basis[k].imag();
    }
    b(2 * i) = rhs.real();
    b(2 * i + 1) = rhs.imag();
    scale += std::norm(dpsi_dt);
  }
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);
  return (a * coef - b).norm() / std::sqrt(scale);
}

// --- collapse by a pointer measurement --------------------------------------------------------

struct CollapseConfig {
  Complex c1{std::sqrt(0.5), 0.0};
  Complex c2{std::sqrt(0.5), 0.0};
  double coupling = 16.0;      // g in V = g s(x) y
  double t_meas = 1.0;
  std::size_t members = 4000;
  std::uint64_t seed = 1;
  double packet_offset = 6.0;  // phi_1 at -offset (s = +1), phi_2 at +offset (s = -1)
  double packet_width = 1.0;
  double pointer_width = 1.0;
  double x_extent = 16.0;
  std::size_t nx = 128;
  double y_extent = 20.0;
  std::size_t ny = 512;
  double dt = 1e-3;
  std::size_t stride = 10;
  double dt_ode = 1e-2;
  double leakage_threshold = 1e-6;
};

struct CollapseOutcome {
  int label = 0;
  double probability = 0.0;  // |c_alpha|^2 on the grid
  std::size_t count = 0;
  double frequency = 0.0;
  double band = 0.0;  // 4 sigma binomial half-width
  bool within_band = false;
  std::optional<double> effective_error;    // L2 distance of the effective wf to phi_alpha(t_meas), phase-aligned
  std::optional<double> conditional_error;  // conditional vs effective wf at the same Y
};

struct CollapseReport {
  double classification_time = 0.0;
  std::vector<double> leakage_times;
  std::vector<double> leakage;  // max over branches of mass outside the branch's pointer cell
  std::vector<CollapseOutcome> outcomes;
  std::size_t classified = 0;
  std::size_t hit_node = 0;
  std::size_t left_grid = 0;
  std::size_t unclassified = 0;
};

struct InsufficientSeparation : Error {
  using Error::Error;
};

namespace detail {
inline ComplexField gaussian_packet(const Axis& a, double centre, double width) {
  ComplexField f(a.count);
  for (std::size_t i = 0; i < a.count; ++i) {
    const double s = (a.coord(i) - centre) / width;
    f[i] = std::exp(-0.5 * s * s);
  }
  return f;
}
}  // namespace detail

inline CollapseReport collapse_experiment(const CollapseConfig& cfg) {
  require(std::abs(std::norm(cfg.c1) + std::norm(cfg.c2) - 1.0) < 1e-12, "|c1|^2 + |c2|^2 must be 1");
  const Grid grid({Axis::span(-cfg.x_extent, cfg.x_extent, cfg.nx, Boundary::Periodic),
                   Axis::span(-cfg.y_extent, cfg.y_extent, cfg.ny, Boundary::Periodic)});
  const Grid gx = grid.axis_grid(0), gy = grid.axis_grid(1);
  const PhysicalConstants consts = PhysicalConstants::natural(2);
  const PhysicalConstants consts_x = PhysicalConstants::natural(1);

  auto unit = [&](ComplexField f) { return normalized(ScalarWaveFunction(gx, std::move(f))); };
  const ScalarWaveFunction phi1 = unit(detail::gaussian_packet(gx.axis(0), -cfg.packet_offset, cfg.packet_width));
  ScalarWaveFunction phi2 = unit(detail::gaussian_packet(gx.axis(0), cfg.packet_offset, cfg.packet_width));
  // Gram-Schmidt against phi1 so the branches are orthonormal on the grid.
  const Complex ov = inner(phi1, phi2);
  for (std::size_t i = 0; i < phi2.size(); ++i) phi2[i] -= ov * phi1[i];
  phi2 = normalized(phi2);
  const ScalarWaveFunction pointer =
      normalized(ScalarWaveFunction(gy, detail::gaussian_packet(gy.axis(0), 0.0, cfg.pointer_width)));

  RealField v(grid.size());
  for (std::size_t p = 0; p < v.size(); ++p) {
    const double s = grid.coord(p, 0) < 0.0 ? 1.0 : -1.0;
    v[p] = cfg.coupling * s * grid.coord(p, 1);
  }
  const Potential pot = potential::Sampled{v};
  const MacroPartition part{1, {{-cfg.y_extent, 0.0, 1}, {0.0, cfg.y_extent + 1.0, 2}}};

  auto product = [&](const ComplexField& sx) {
    ComplexField f(grid.size());
    for (std::size_t i = 0; i < cfg.nx; ++i)
      for (std::size_t j = 0; j < cfg.ny; ++j) f[grid.index(i, j)] = sx[i] * pointer[j];
    return f;
  };
  ComplexField sys0(cfg.nx);
  for (std::size_t i = 0; i < cfg.nx; ++i) sys0[i] = cfg.c1 * phi1[i] + cfg.c2 * phi2[i];
  const ScalarWaveFunction psi0 = normalized(ScalarWaveFunction(grid, product(sys0)));

  CollapseReport rep;
  // Branch leakage history, from separately evolved branches.
  {
    const Propagator prop(grid, pot, consts, cfg.dt, PropagatorMethod::SplitFourier);
    struct Branch {
      ComplexField f;
      int label;
    };
    std::vector<Branch> branches;
    if (std::norm(cfg.c1) > 0.0) branches.push_back({product(phi1.amplitudes()), 1});
    if (std::norm(cfg.c2) > 0.0) branches.push_back({product(phi2.amplitudes()), 2});
    const std::size_t n = step_count(cfg.t_meas, cfg.dt);
    auto leakage = [&](const Branch& b) {
      double outside = 0.0, all = 0.0;
      for (std::size_t p = 0; p < grid.size(); ++p) {
        const double m = grid.weight(p) * std::norm(b.f[p]);
        all += m;
        const auto c = part.cell_of(grid.coord(p, 1));
        if (!c || part.cells[*c].label != b.label) outside += m;
      }
      return outside / all;
    };
    bool found = false;
    for (std::size_t k = 0; k <= n; ++k) {
      if (k > 0)
        for (auto& b : branches) prop.advance(b.f);
      if (k % cfg.stride == 0 || k == n) {
        double worst = 0.0;
        for (const auto& b : branches) worst = std::max(worst, leakage(b));
        rep.leakage_times.push_back(static_cast<double>(k) * cfg.dt);
        rep.leakage.push_back(worst);
        if (!found && worst < cfg.leakage_threshold) {
          found = true;
          rep.classification_time = rep.leakage_times.back();
        }
      }
    }
    if (rep.leakage.back() >= cfg.leakage_threshold)
      throw InsufficientSeparation("pointer cells not disjoint at t_meas: leakage " +
                                   std::to_string(rep.leakage.back()));
  }

  const EvolutionRecord rec = evolve(psi0, pot, consts, cfg.t_meas, cfg.dt, PropagatorMethod::SplitFourier, cfg.stride);
  const RecordField field(rec, NodePolicy::halt());
  const Ensemble ens = sample_density(psi0, cfg.members, cfg.seed);
  const EnsembleTransport moved = evolve_ensemble(ens, field, cfg.dt_ode);
  rep.hit_node = moved.hit_node;
  rep.left_grid = moved.left_grid;

  const ScalarWaveFunction& final_state = rec.snapshots.back();
  const Propagator free_x(gx, potential::Free{}, consts_x, cfg.dt, PropagatorMethod::SplitFourier);
  const std::size_t steps = step_count(cfg.t_meas, cfg.dt);
  auto evolved_free = [&](ScalarWaveFunction s) {
    for (std::size_t k = 0; k < steps; ++k) free_x.advance(s.amplitudes());
    return s;
  };

  std::map<int, std::size_t> counts;
  std::map<int, double> first_y;
  for (const auto& m : moved.ensemble.members) {
    const auto c = part.cell_of(m.q[1]);
    if (!c) {
      ++rep.unclassified;
      continue;
    }
    const int label = part.cells[*c].label;
    ++counts[label];
    first_y.emplace(label, m.q[1]);
    ++rep.classified;
  }
  for (int label : {1, 2}) {
    CollapseOutcome o;
    o.label = label;
    const ScalarWaveFunction& phi = label == 1 ? phi1 : phi2;
    o.probability = std::norm(inner(phi.grid(), phi.amplitudes(), sys0)) / norm_squared(gx, sys0);
    o.count = counts[label];
    const double n = static_cast<double>(rep.classified);
    o.frequency = n > 0 ? static_cast<double>(o.count) / n : 0.0;
    o.band = 4.0 * std::sqrt(o.probability * (1.0 - o.probability) / std::max(n, 1.0));
    o.within_band = std::abs(o.frequency - o.probability) <= o.band;
    if (auto it = first_y.find(label); it != first_y.end()) {
      const auto eff = effective_decomposition(final_state, part, it->second);
      if (eff) {
        const ScalarWaveFunction target = normalized(evolved_free(phi));
        o.effective_error = phase_aligned_distance(eff->system, target);
        o.conditional_error = phase_aligned_distance(conditional_wavefunction(final_state, it->second), eff->system);
      }
    }
    rep.outcomes.push_back(o);
  }
  return rep;
}

}  // namespace bohm
