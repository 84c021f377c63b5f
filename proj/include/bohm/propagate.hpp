#pragma once

// Time-dependent Schroedinger evolution by Strang split-step Fourier (periodic grids)
// or Crank-Nicolson in Cayley form (boxed grids), and continuity diagnostics.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bohm/fft.hpp"
#include "bohm/fields.hpp"
#include "bohm/grid.hpp"

namespace bohm {

enum class PropagatorMethod { SplitFourier, CrankNicolson };

inline const char* to_string(PropagatorMethod m) {
  return m == PropagatorMethod::SplitFourier ? "split-fourier" : "crank-nicolson";
}

inline std::optional<PropagatorMethod> parse_method(const std::string& s) {
  if (s == "split-fourier") return PropagatorMethod::SplitFourier;
  if (s == "crank-nicolson") return PropagatorMethod::CrankNicolson;
  return std::nullopt;
}

// The natural method for a grid whose axes share one boundary flag.
inline PropagatorMethod default_method(const Grid& g) {
  return g.all(Boundary::Periodic) ? PropagatorMethod::SplitFourier : PropagatorMethod::CrankNicolson;
}

inline void check_method(PropagatorMethod m, const Grid& g) {
  if (m == PropagatorMethod::SplitFourier && !g.all(Boundary::Periodic))
    throw IncompatibleMethod("split-step Fourier requires periodic axes");
  if (m == PropagatorMethod::CrankNicolson && !g.all(Boundary::Boxed))
    throw IncompatibleMethod("Crank-Nicolson requires boxed axes");
}

inline constexpr double kSolveTolerance = 1e-12;

namespace detail {

// Factorized tridiagonal system (I + i tau/(2 hbar) H) along one axis, for every line of the grid.
// H = -hbar^2/(2m) D2 + share * V on the interior nodes; the two end nodes are the walls, psi = 0 there.
class CayleySweep {
 public:
  CayleySweep() = default;
  CayleySweep(const Grid& grid, std::size_t axis, const RealField& v, double share, double tau,
              const PhysicalConstants& c)
      : axis_(axis), n_(grid.axis(axis).count), stride_(grid.stride(axis)), lines_(grid.size() / n_) {
    require(n_ >= 3, "Crank-Nicolson needs at least one interior node per axis");
    const double h = grid.axis(axis).spacing;
    const double kin = c.hbar * c.hbar / (c.mass(axis) * h * h);
    const Complex mu = kI * tau / (2.0 * c.hbar);
    off_a_ = mu * (-0.5 * kin);
    diag_a_.resize(grid.size());
    diag_b_.resize(grid.size());
    cp_.resize(grid.size());
    inv_den_.resize(grid.size());
    for (std::size_t line = 0; line < lines_; ++line) {
      const std::size_t base = line_base(line);
      for (std::size_t i = 1; i + 1 < n_; ++i) {
        const std::size_t p = base + i * stride_;
        const double hd = kin + share * v[p];
        diag_a_[p] = 1.0 + mu * hd;
        diag_b_[p] = 1.0 - mu * hd;
      }
      // Thomas factorization with constant off-diagonals.
      Complex cprev{};
      for (std::size_t i = 1; i + 1 < n_; ++i) {
        const std::size_t p = base + i * stride_;
        const Complex den = i == 1 ? diag_a_[p] : diag_a_[p] - off_a_ * cprev;
        inv_den_[p] = 1.0 / den;
        cprev = off_a_ * inv_den_[p];
        cp_[p] = cprev;
      }
    }
  }

  void apply(ComplexField& f) const {
    std::vector<Complex> rhs(n_), x(n_);
    const Complex off_b = -off_a_;
    for (std::size_t line = 0; line < lines_; ++line) {
      const std::size_t base = line_base(line);
      for (std::size_t i = 1; i + 1 < n_; ++i) {
        const std::size_t p = base + i * stride_;
        Complex r = diag_b_[p] * f[p];
        if (i > 1) r += off_b * f[p - stride_];
        if (i + 2 < n_) r += off_b * f[p + stride_];
        rhs[i] = r;
      }
      // Forward elimination then back substitution.
      Complex dprev{};
      for (std::size_t i = 1; i + 1 < n_; ++i) {
        const std::size_t p = base + i * stride_;
        dprev = (rhs[i] - (i == 1 ? Complex{} : off_a_ * dprev)) * inv_den_[p];
        x[i] = dprev;
      }
      for (std::size_t i = n_ - 2; i-- > 1;) x[i] -= cp_[base + i * stride_] * x[i + 1];
      check_residual(base, rhs, x);
      f[base] = 0.0;
      f[base + (n_ - 1) * stride_] = 0.0;
      for (std::size_t i = 1; i + 1 < n_; ++i) f[base + i * stride_] = x[i];
    }
  }

 private:
  std::size_t line_base(std::size_t line) const {
    const std::size_t outer = line / stride_;
    const std::size_t inner = line % stride_;
    return outer * n_ * stride_ + inner;
  }

  void check_residual(std::size_t base, const std::vector<Complex>& rhs, const std::vector<Complex>& x) const {
    double rmax = 0.0, bmax = 0.0;
    for (std::size_t i = 1; i + 1 < n_; ++i) {
      Complex ax = diag_a_[base + i * stride_] * x[i];
      if (i > 1) ax += off_a_ * x[i - 1];
      if (i + 2 < n_) ax += off_a_ * x[i + 1];
      rmax = std::max(rmax, std::abs(ax - rhs[i]));
      bmax = std::max(bmax, std::abs(rhs[i]));
    }
    if (bmax > 0.0 && rmax > kSolveTolerance * bmax)
      throw SolveToleranceError("Crank-Nicolson solve residual " + std::to_string(rmax / bmax) +
                                " exceeds tolerance; reduce dt");
  }

  std::size_t axis_ = 0, n_ = 0, stride_ = 1, lines_ = 0;
  Complex off_a_{};
  ComplexField diag_a_, diag_b_, cp_, inv_den_;
};

}  // namespace detail

// Reusable one-step propagator for fixed grid, potential, constants and dt.
class Propagator {
 public:
  Propagator(const Grid& grid, const Potential& v, const PhysicalConstants& c, double dt, PropagatorMethod method)
      : grid_(grid), constants_(c), dt_(dt), method_(method) {
    require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
    c.check(grid);
    check_method(method, grid);
    const RealField vals = sample_potential(v, grid, c);
    if (method == PropagatorMethod::SplitFourier) {
      half_potential_.resize(grid.size());
      for (std::size_t p = 0; p < vals.size(); ++p) half_potential_[p] = std::exp(-kI * vals[p] * dt / (2.0 * c.hbar));
      for (std::size_t k = 0; k < grid.dimension(); ++k) {
        ffts_.emplace_back(grid, k);
        const RealField kk = wavenumbers(grid.axis(k));
        ComplexField phase(kk.size());
        for (std::size_t j = 0; j < kk.size(); ++j)
          phase[j] = std::exp(-kI * c.hbar * kk[j] * kk[j] * dt / (2.0 * c.mass(k)));
        kinetic_phase_.push_back(std::move(phase));
      }
    } else if (grid.dimension() == 1) {
      sweeps_.emplace_back(grid, 0, vals, 1.0, dt, c);
    } else {
      sweeps_.emplace_back(grid, 0, vals, 0.5, 0.5 * dt, c);
      sweeps_.emplace_back(grid, 1, vals, 0.5, dt, c);
    }
  }

  const Grid& grid() const { return grid_; }
  double dt() const { return dt_; }
  PropagatorMethod method() const { return method_; }

  void advance(ComplexField& f) const {
    if (method_ == PropagatorMethod::SplitFourier) {
      for (std::size_t p = 0; p < f.size(); ++p) f[p] *= half_potential_[p];
      for (const auto& fft : ffts_) fft.forward(f);
      if (grid_.dimension() == 1) {
        for (std::size_t p = 0; p < f.size(); ++p) f[p] *= kinetic_phase_[0][p];
      } else {
        const std::size_t ny = grid_.axis(1).count;
        for (std::size_t p = 0; p < f.size(); ++p) f[p] *= kinetic_phase_[0][p / ny] * kinetic_phase_[1][p % ny];
      }
      for (auto it = ffts_.rbegin(); it != ffts_.rend(); ++it) it->backward(f);
      for (std::size_t p = 0; p < f.size(); ++p) f[p] *= half_potential_[p];
    } else if (sweeps_.size() == 1) {
      sweeps_[0].apply(f);
    } else {
      sweeps_[0].apply(f);
      sweeps_[1].apply(f);
      sweeps_[0].apply(f);
    }
  }

  ScalarWaveFunction step(const ScalarWaveFunction& psi) const {
    require(psi.grid() == grid_, "wave function grid does not match the propagator");
    ScalarWaveFunction out = psi;
    advance(out.amplitudes());
    return out;
  }

 private:
  Grid grid_;
  PhysicalConstants constants_;
  double dt_;
  PropagatorMethod method_;
  ComplexField half_potential_;
  std::vector<ComplexField> kinetic_phase_;
  std::vector<AxisFft> ffts_;
  std::vector<detail::CayleySweep> sweeps_;
};

inline ScalarWaveFunction step(const ScalarWaveFunction& psi, const Potential& v, const PhysicalConstants& c, double dt,
                               PropagatorMethod method) {
  return Propagator(psi.grid(), v, c, dt, method).step(psi);
}

struct EvolutionRecord {
  Grid grid;
  PhysicalConstants constants;
  Potential potential;
  PropagatorMethod method = PropagatorMethod::SplitFourier;
  double dt = 0.0;
  std::size_t stride = 1;
  std::vector<double> times;
  std::vector<ScalarWaveFunction> snapshots;

  double start() const { return times.front(); }
  double end() const { return times.back(); }
  bool spans(double t0, double t1) const {
    const double eps = 1e-12 * std::max(1.0, std::abs(end()));
    return t0 >= start() - eps && t1 <= end() + eps;
  }
};

inline constexpr double kRecordNormTolerance = 1e-8;

// Number of steps of size dt covering t_final; t_final must be a multiple of dt.
inline std::size_t step_count(double t_final, double dt) {
  const double n = std::round(t_final / dt);
  require(std::abs(n * dt - t_final) <= 1e-9 * std::max(1.0, t_final), "t_final must be a multiple of dt");
  return static_cast<std::size_t>(n);
}

// Repeated steps from t0; keeps every stride-th snapshot plus the first and the last.
inline EvolutionRecord evolve(const ScalarWaveFunction& psi0, const Potential& v, const PhysicalConstants& c,
                              double t_final, double dt, PropagatorMethod method, std::size_t stride,
                              double t0 = 0.0) {
  require(t_final >= 0.0, "t_final must be non-negative");
  require(stride >= 1, "snapshot stride must be at least 1");
  require(std::abs(norm(psi0) - 1.0) < kRecordNormTolerance, "initial wave function must be normalized");
  EvolutionRecord rec{psi0.grid(), c, v, method, dt, stride, {t0}, {psi0}};
  const std::size_t n = step_count(t_final, dt);
  if (n == 0) return rec;
  Propagator prop(psi0.grid(), v, c, dt, method);
  ComplexField f = psi0.amplitudes();
  for (std::size_t k = 1; k <= n; ++k) {
    prop.advance(f);
    if (k % stride == 0 || k == n) {
      rec.times.push_back(t0 + static_cast<double>(k) * dt);
      rec.snapshots.emplace_back(psi0.grid(), f);
    }
  }
  return rec;
}

// Max over interior snapshots and points of |d_t |psi|^2 + div J| using centered time differences.
inline double continuity_residual(const EvolutionRecord& rec, const PhysicalConstants& c) {
  require(rec.snapshots.size() >= 3, "continuity residual needs at least three snapshots");
  const Grid& g = rec.grid;
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < rec.snapshots.size(); ++k) {
    const RealField before = density(rec.snapshots[k - 1]);
    const RealField after = density(rec.snapshots[k + 1]);
    const double span = rec.times[k + 1] - rec.times[k - 1];
    const RealField div = divergence(probability_current(rec.snapshots[k], c));
    for (std::size_t p = 0; p < g.size(); ++p) {
      bool interior = true;
      for (std::size_t a = 0; a < g.dimension(); ++a) {
        const auto& ax = g.axis(a);
        const std::size_t i = g.axis_index(p, a);
        if (ax.boundary == Boundary::Boxed && (i < 2 || i + 2 >= ax.count)) interior = false;
      }
      if (!interior) continue;
      worst = std::max(worst, std::abs((after[p] - before[p]) / span + div[p]));
    }
  }
  return worst;
}

}  // namespace bohm
