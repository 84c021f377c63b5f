#pragma once

// Closed-form two-particle coupled-oscillator solution (hbar = m = 1).
//
// H = -1/2 (d_x^2 + d_y^2) + kappa/2 (x - y)^2 with initial state
// Psi_0 = pi^{-1/2} exp(-(x^2 + y^2)/2). In the normal modes u = (x - y)/sqrt2 and
// w = (x + y)/sqrt2 the centre-of-mass mode w is free and the relative mode u is an
// oscillator of frequency omega = sqrt(2 kappa), so Psi_t factorizes into two Gaussians
// whose Bohm trajectories scale with the respective packet widths.
//
// At kappa = 1/2 the relative mode starts in its ground state and
//   Psi_t = pi^{-1/2} (1+it)^{-1/2} e^{-it/2} exp(-[(x-y)^2 + (x+y)^2/(1+it)]/4),
//   X_t = a(t) X + b(t) Y,  Y_t = b(t) X + a(t) Y,
//   a(t) = [sqrt(1+t^2) + 1]/2,  b(t) = [sqrt(1+t^2) - 1]/2.
// The free functions below evaluate these formulas.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <utility>

#include "bohm/grid.hpp"

namespace bohm::analytic {

struct AbCoefficients {
  double a;
  double b;
};

struct Point2 {
  double x;
  double y;
};

// One Gaussian mode exp(-alpha(t) s^2 / 2) evolving under -1/2 d^2 + omega^2 s^2 / 2 from alpha(0) = 1.
class GaussianMode {
 public:
  explicit GaussianMode(double omega) : omega_(omega) {}

  // z(t) = cos(wt) + i sin(wt)/w, with the free-particle limit 1 + it.
  Complex z(double t) const {
    if (omega_ == 0.0) return {1.0, t};
    return {std::cos(omega_ * t), std::sin(omega_ * t) / omega_};
  }
  Complex zdot(double t) const {
    if (omega_ == 0.0) return {0.0, 1.0};
    return {-omega_ * std::sin(omega_ * t), std::cos(omega_ * t)};
  }

  // alpha(t) = -i zdot / z
  Complex alpha(double t) const { return -kI * zdot(t) / z(t); }

  // z^{-1/2} continued along t >= 0 (principal branch while Re z > 0).
  Complex inverse_sqrt_z(double t) const {
    const Complex zz = z(t);
    double arg = std::arg(zz);
    if (omega_ != 0.0) {
      const double theta = omega_ * t;
      arg += 2.0 * std::numbers::pi * std::floor((theta + std::numbers::pi) / (2.0 * std::numbers::pi));
    }
    return std::polar(1.0 / std::sqrt(std::abs(zz)), -0.5 * arg);
  }

  Complex amplitude(double s, double t) const {
    return std::pow(std::numbers::pi, -0.25) * inverse_sqrt_z(t) * std::exp(-0.5 * alpha(t) * s * s);
  }

  // Width scale |z(t)|; Bohm trajectories of the mode are s_t = s_0 |z(t)|.
  double width_scale(double t) const { return std::abs(z(t)); }
  double width_scale_rate(double t) const { return std::real(std::conj(z(t)) * zdot(t)) / std::abs(z(t)); }

  // Bohm velocity of the mode coordinate: Im(d_s psi / psi) = -Im(alpha) s.
  double velocity(double s, double t) const { return -std::imag(alpha(t)) * s; }

 private:
  double omega_;
};

class CoupledOscillator {
 public:
  explicit CoupledOscillator(double kappa = 1.0) : kappa_(kappa), relative_(std::sqrt(2.0 * kappa)), centre_(0.0) {
    require(kappa > 0.0, "kappa must be positive");
  }

  double kappa() const { return kappa_; }
  double relative_frequency() const { return std::sqrt(2.0 * kappa_); }

  Complex wavefunction(double x, double y, double t) const {
    const double u = (x - y) / std::numbers::sqrt2;
    const double w = (x + y) / std::numbers::sqrt2;
    return relative_.amplitude(u, t) * centre_.amplitude(w, t);
  }

  AbCoefficients coefficients(double t) const {
    const double sw = centre_.width_scale(t);
    const double su = relative_.width_scale(t);
    return {0.5 * (sw + su), 0.5 * (sw - su)};
  }
  AbCoefficients coefficient_rates(double t) const {
    const double dw = centre_.width_scale_rate(t);
    const double du = relative_.width_scale_rate(t);
    return {0.5 * (dw + du), 0.5 * (dw - du)};
  }

  Point2 trajectory(double x0, double y0, double t) const {
    const auto [a, b] = coefficients(t);
    return {a * x0 + b * y0, b * x0 + a * y0};
  }

  // Guidance velocity (Im grad Psi / Psi) at (x, y, t).
  Point2 velocity(double x, double y, double t) const {
    const double u = (x - y) / std::numbers::sqrt2;
    const double w = (x + y) / std::numbers::sqrt2;
    const double vu = relative_.velocity(u, t);
    const double vw = centre_.velocity(w, t);
    return {(vw + vu) / std::numbers::sqrt2, (vw - vu) / std::numbers::sqrt2};
  }

 private:
  double kappa_;
  GaussianMode relative_;
  GaussianMode centre_;
};

// The coupling at which the product ground-state initial condition keeps the relative mode stationary.
inline constexpr double kExampleCoupling = 0.5;

inline AbCoefficients ab_coefficients(double t) {
  const double r = std::sqrt(1.0 + t * t);
  return {0.5 * (r + 1.0), 0.5 * (r - 1.0)};
}

inline Complex coupled_oscillator_wavefunction(double x, double y, double t) {
  const Complex one_it{1.0, t};
  const double d = x - y;
  const double s = x + y;
  return std::pow(std::numbers::pi, -0.5) / std::sqrt(one_it) * std::exp(Complex{0.0, -0.5 * t}) *
         std::exp(-0.25 * (d * d + s * s / one_it));
}

// Literal transcription with (x+y)^2/(1+2it) and no energy phase. Not a solution of any
// Schroedinger equation; kept only to quantify the discrepancy.
inline Complex quoted_coupled_oscillator_wavefunction(double x, double y, double t) {
  const double d = x - y;
  const double s = x + y;
  return std::pow(std::numbers::pi, -0.5) / std::sqrt(Complex{1.0, t}) *
         std::exp(-0.25 * (d * d + s * s / Complex{1.0, 2.0 * t}));
}

inline Point2 coupled_oscillator_trajectory(double x0, double y0, double t) {
  const auto [a, b] = ab_coefficients(t);
  return {a * x0 + b * y0, b * x0 + a * y0};
}

// Conditional wave function x -> Psi_t(x, Y_t) along the environment trajectory from (X0, Y0).
inline Complex conditional_oracle(double x0, double y0, double t, double x) {
  return coupled_oscillator_wavefunction(x, coupled_oscillator_trajectory(x0, y0, t).y, t);
}

}  // namespace bohm::analytic
