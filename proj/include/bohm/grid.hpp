#pragma once

// Discretized configuration space and the fields that live on it.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <variant>
#include <type_traits>
#include <vector>

#include "bohm/errors.hpp"

namespace bohm {

using Complex = std::complex<double>;
using ComplexField = std::vector<Complex>;
using RealField = std::vector<double>;

inline constexpr Complex kI{0.0, 1.0};
inline constexpr std::size_t kMaxDimension = 2;

enum class Boundary { Periodic, Boxed };

inline const char* to_string(Boundary b) { return b == Boundary::Periodic ? "periodic" : "boxed"; }

struct Axis {
  double lower = 0.0;
  std::size_t count = 0;
  double spacing = 0.0;
  Boundary boundary = Boundary::Periodic;

  // Uniform axis with `count` points from `lower` to `upper` inclusive (boxed) or
  // covering the period [lower, upper) (periodic).
  static Axis span(double lower, double upper, std::size_t count, Boundary boundary) {
    require(count >= 2, "axis needs at least two points");
    const double h = boundary == Boundary::Periodic ? (upper - lower) / static_cast<double>(count)
                                                    : (upper - lower) / static_cast<double>(count - 1);
    return Axis{lower, count, h, boundary};
  }

  double coord(std::size_t i) const { return lower + static_cast<double>(i) * spacing; }
  double last() const { return coord(count - 1); }
  // Upper end of the admissible coordinate range.
  double upper() const {
    return boundary == Boundary::Periodic ? lower + static_cast<double>(count) * spacing : last();
  }
  double length() const { return upper() - lower; }
  bool contains(double x) const {
    return boundary == Boundary::Periodic ? (x >= lower && x < upper()) : (x >= lower && x <= upper());
  }
  // Quadrature weight: trapezoid on boxed axes, rectangle on periodic axes.
  double weight(std::size_t i) const {
    if (boundary == Boundary::Boxed && (i == 0 || i + 1 == count)) return 0.5 * spacing;
    return spacing;
  }

  friend bool operator==(const Axis&, const Axis&) = default;
};

class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<Axis> axes) : axes_(std::move(axes)) {
    require(!axes_.empty() && axes_.size() <= kMaxDimension, "grid dimension must be 1 or 2");
    for (const auto& a : axes_) {
      require(a.count >= 8, "grid axes need at least 8 points");
      require(a.spacing > 0.0 && std::isfinite(a.spacing), "grid spacing must be positive");
      require(std::isfinite(a.lower), "grid lower bound must be finite");
    }
  }

  static Grid line(double lower, double upper, std::size_t n, Boundary b = Boundary::Periodic) {
    return Grid({Axis::span(lower, upper, n, b)});
  }
  static Grid plane(double xlo, double xhi, std::size_t nx, double ylo, double yhi, std::size_t ny,
                    Boundary b = Boundary::Periodic) {
    return Grid({Axis::span(xlo, xhi, nx, b), Axis::span(ylo, yhi, ny, b)});
  }

  std::size_t dimension() const { return axes_.size(); }
  const Axis& axis(std::size_t k) const { return axes_.at(k); }
  const std::vector<Axis>& axes() const { return axes_; }

  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& a : axes_) n *= a.count;
    return n;
  }
  // Row-major: the last axis is contiguous.
  std::size_t stride(std::size_t k) const {
    std::size_t s = 1;
    for (std::size_t j = k + 1; j < axes_.size(); ++j) s *= axes_[j].count;
    return s;
  }
  std::size_t index(std::size_t i) const { return i; }
  std::size_t index(std::size_t i, std::size_t j) const { return i * axes_[1].count + j; }

  // Per-axis index of flat point `p`.
  std::size_t axis_index(std::size_t p, std::size_t k) const { return (p / stride(k)) % axes_[k].count; }
  double coord(std::size_t p, std::size_t k) const { return axes_[k].coord(axis_index(p, k)); }

  double weight(std::size_t p) const {
    double w = 1.0;
    for (std::size_t k = 0; k < axes_.size(); ++k) w *= axes_[k].weight(axis_index(p, k));
    return w;
  }
  RealField weights() const {
    RealField w(size());
    for (std::size_t p = 0; p < w.size(); ++p) w[p] = weight(p);
    return w;
  }

  bool all(Boundary b) const {
    return std::all_of(axes_.begin(), axes_.end(), [b](const Axis& a) { return a.boundary == b; });
  }
  bool contains(double x) const { return dimension() == 1 && axes_[0].contains(x); }
  bool contains(double x, double y) const {
    return dimension() == 2 && axes_[0].contains(x) && axes_[1].contains(y);
  }

  Grid axis_grid(std::size_t k) const { return Grid({axis(k)}); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::vector<Axis> axes_;
};

struct PhysicalConstants {
  double hbar = 1.0;
  std::vector<double> masses{1.0};

  static PhysicalConstants natural(std::size_t dimension) {
    return PhysicalConstants{1.0, std::vector<double>(dimension, 1.0)};
  }

  double mass(std::size_t k) const { return masses.at(k); }

  void check(const Grid& grid) const {
    require(hbar > 0.0, "hbar must be positive");
    require(masses.size() == grid.dimension(), "one mass per grid axis is required");
    for (double m : masses) require(m > 0.0, "masses must be positive");
  }
};

class ScalarWaveFunction {
 public:
  ScalarWaveFunction() = default;
  ScalarWaveFunction(Grid grid, ComplexField amplitudes)
      : grid_(std::move(grid)), amps_(std::move(amplitudes)) {
    require(amps_.size() == grid_.size(), "amplitude count does not match the grid");
    for (const auto& z : amps_)
      require(std::isfinite(z.real()) && std::isfinite(z.imag()), "wave function has non-finite entries");
  }

  template <class F>
  static ScalarWaveFunction from_function(const Grid& grid, F&& f) {
    ComplexField a(grid.size());
    for (std::size_t p = 0; p < a.size(); ++p) {
      if constexpr (std::is_invocable_v<F&, double>) {
        require(grid.dimension() == 1, "one-argument generator on a 2D grid");
        a[p] = f(grid.coord(p, 0));
      } else {
        require(grid.dimension() == 2, "two-argument generator on a 1D grid");
        a[p] = f(grid.coord(p, 0), grid.coord(p, 1));
      }
    }
    return ScalarWaveFunction(grid, std::move(a));
  }

  const Grid& grid() const { return grid_; }
  const ComplexField& amplitudes() const { return amps_; }
  ComplexField& amplitudes() { return amps_; }
  std::size_t size() const { return amps_.size(); }
  const Complex& operator[](std::size_t p) const { return amps_[p]; }
  Complex& operator[](std::size_t p) { return amps_[p]; }

 private:
  Grid grid_;
  ComplexField amps_;
};

struct SpinorWaveFunction {
  Grid grid;
  ComplexField up;
  ComplexField down;

  SpinorWaveFunction() = default;
  SpinorWaveFunction(Grid g, ComplexField u, ComplexField d)
      : grid(std::move(g)), up(std::move(u)), down(std::move(d)) {
    require(grid.dimension() == 1, "spinor wave functions live on 1D grids");
    require(up.size() == grid.size() && down.size() == grid.size(), "spinor component size mismatch");
  }
};

namespace potential {
struct Free {};
struct Harmonic {
  std::vector<double> omega;  // per axis
};
// V = kappa/2 (x - y)^2 on a 2D grid.
struct CoupledOscillator {
  double kappa = 1.0;
};
// V = -1/sqrt(r^2 + eps^2)
struct SoftCoulomb {
  double softening = 1.0;
};
struct Sampled {
  RealField values;
};
}  // namespace potential

using Potential = std::variant<potential::Free, potential::Harmonic, potential::CoupledOscillator,
                               potential::SoftCoulomb, potential::Sampled>;

inline std::string potential_name(const Potential& v) {
  static constexpr const char* names[] = {"free", "harmonic", "coupled-oscillator", "soft-coulomb", "sampled"};
  return names[v.index()];
}

inline void check_potential(const Potential& v, const Grid& grid) {
  if (auto* h = std::get_if<potential::Harmonic>(&v)) {
    require(h->omega.size() == grid.dimension(), "harmonic potential needs one frequency per axis");
  } else if (auto* c = std::get_if<potential::CoupledOscillator>(&v)) {
    require(c->kappa > 0.0, "coupling kappa must be positive");
    require(grid.dimension() == 2, "coupled oscillator needs a 2D grid");
  } else if (auto* s = std::get_if<potential::SoftCoulomb>(&v)) {
    require(s->softening > 0.0, "soft-Coulomb softening must be positive");
  } else if (auto* s = std::get_if<potential::Sampled>(&v)) {
    require(s->values.size() == grid.size(), "sampled potential does not match the grid");
  }
}

// Potential values at every grid point.
inline RealField sample_potential(const Potential& v, const Grid& grid, const PhysicalConstants& c) {
  check_potential(v, grid);
  RealField out(grid.size(), 0.0);
  const std::size_t d = grid.dimension();
  for (std::size_t p = 0; p < out.size(); ++p) {
    const double x = grid.coord(p, 0);
    const double y = d == 2 ? grid.coord(p, 1) : 0.0;
    out[p] = std::visit(
        [&](const auto& pot) -> double {
          using T = std::decay_t<decltype(pot)>;
          if constexpr (std::is_same_v<T, potential::Free>) {
            return 0.0;
          } else if constexpr (std::is_same_v<T, potential::Harmonic>) {
            double e = 0.5 * c.mass(0) * pot.omega[0] * pot.omega[0] * x * x;
            if (d == 2) e += 0.5 * c.mass(1) * pot.omega[1] * pot.omega[1] * y * y;
            return e;
          } else if constexpr (std::is_same_v<T, potential::CoupledOscillator>) {
            return 0.5 * pot.kappa * (x - y) * (x - y);
          } else if constexpr (std::is_same_v<T, potential::SoftCoulomb>) {
            return -1.0 / std::sqrt(x * x + y * y + pot.softening * pot.softening);
          } else {
            return pot.values[p];
          }
        },
        v);
  }
  return out;
}

struct CurrentField {
  Grid grid;
  std::vector<RealField> components;  // one per axis
};

}  // namespace bohm
