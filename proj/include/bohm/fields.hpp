#pragma once

// Quadrature, densities, derivatives and probability currents of grid fields.

#include <cmath>
#include <complex>
#include <numeric>

#include "bohm/fft.hpp"
#include "bohm/grid.hpp"

namespace bohm {

inline double norm_squared(const Grid& grid, const ComplexField& f) {
  double s = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) s += grid.weight(p) * std::norm(f[p]);
  return s;
}

inline double norm(const ScalarWaveFunction& psi) { return std::sqrt(norm_squared(psi.grid(), psi.amplitudes())); }

inline double norm(const SpinorWaveFunction& psi) {
  return std::sqrt(norm_squared(psi.grid, psi.up) + norm_squared(psi.grid, psi.down));
}

// <a, b> under the grid quadrature rule.
inline Complex inner(const Grid& grid, const ComplexField& a, const ComplexField& b) {
  Complex s{};
  for (std::size_t p = 0; p < a.size(); ++p) s += grid.weight(p) * std::conj(a[p]) * b[p];
  return s;
}

inline Complex inner(const ScalarWaveFunction& a, const ScalarWaveFunction& b) {
  require(a.grid() == b.grid(), "inner product of fields on different grids");
  return inner(a.grid(), a.amplitudes(), b.amplitudes());
}

inline ScalarWaveFunction normalized(ScalarWaveFunction psi) {
  const double n = norm(psi);
  require(n > 0.0, "cannot normalize a zero field");
  for (auto& z : psi.amplitudes()) z /= n;
  return psi;
}

inline bool is_normalized(const ScalarWaveFunction& psi, double tol = 1e-9) { return std::abs(norm(psi) - 1.0) < tol; }

// L2 distance between two normalized states after removing the best global phase.
inline double phase_aligned_distance(const ScalarWaveFunction& a, const ScalarWaveFunction& b) {
  const Complex ov = inner(a, b);
  const Complex c = std::abs(ov) > 0.0 ? std::conj(ov) / std::abs(ov) : Complex{1.0};
  ComplexField diff(a.amplitudes().size());
  for (std::size_t p = 0; p < diff.size(); ++p) diff[p] = a[p] - c * b[p];
  return std::sqrt(norm_squared(a.grid(), diff));
}

inline RealField density(const ComplexField& f) {
  RealField rho(f.size());
  for (std::size_t p = 0; p < f.size(); ++p) rho[p] = std::norm(f[p]);
  return rho;
}

inline RealField density(const ScalarWaveFunction& psi) { return density(psi.amplitudes()); }

inline double integrate(const Grid& grid, const RealField& f) {
  double s = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) s += grid.weight(p) * f[p];
  return s;
}

namespace detail {

// 4th-order central differences; 4th-order one-sided closure at the two points nearest each end.
inline void boxed_derivative(const Grid& grid, std::size_t axis, const ComplexField& f, ComplexField& out) {
  const Axis& a = grid.axis(axis);
  const std::size_t n = a.count;
  const std::size_t s = grid.stride(axis);
  const double inv = 1.0 / (12.0 * a.spacing);
  const std::size_t lines = grid.size() / n;
  for (std::size_t line = 0; line < lines; ++line) {
    // Base offset of this line: enumerate points whose index along `axis` is zero.
    const std::size_t outer = line / s;
    const std::size_t inner_off = line % s;
    const std::size_t base = outer * n * s + inner_off;
    auto at = [&](std::size_t i) { return f[base + i * s]; };
    auto put = [&](std::size_t i, Complex v) { out[base + i * s] = v * inv; };
    put(0, -25.0 * at(0) + 48.0 * at(1) - 36.0 * at(2) + 16.0 * at(3) - 3.0 * at(4));
    put(1, -3.0 * at(0) - 10.0 * at(1) + 18.0 * at(2) - 6.0 * at(3) + at(4));
    for (std::size_t i = 2; i + 2 < n; ++i) put(i, -at(i + 2) + 8.0 * at(i + 1) - 8.0 * at(i - 1) + at(i - 2));
    put(n - 2, 3.0 * at(n - 1) + 10.0 * at(n - 2) - 18.0 * at(n - 3) + 6.0 * at(n - 4) - at(n - 5));
    put(n - 1, 25.0 * at(n - 1) - 48.0 * at(n - 2) + 36.0 * at(n - 3) - 16.0 * at(n - 4) + 3.0 * at(n - 5));
  }
}

inline void spectral_derivative(const Grid& grid, std::size_t axis, const ComplexField& f, ComplexField& out) {
  const Axis& a = grid.axis(axis);
  AxisFft fft(grid, axis);
  out = f;
  fft.forward(out);
  RealField k = wavenumbers(a);
  if (a.count % 2 == 0) k[a.count / 2] = 0.0;  // odd derivative: drop the unpaired Nyquist mode
  const std::size_t s = grid.stride(axis);
  for (std::size_t p = 0; p < out.size(); ++p) out[p] *= kI * k[(p / s) % a.count];
  fft.backward(out);
}

}  // namespace detail

// d f / d x_axis: spectral on periodic axes, 4th-order finite differences on boxed axes.
inline ComplexField derivative(const Grid& grid, std::size_t axis, const ComplexField& f) {
  require(axis < grid.dimension(), "derivative axis out of range");
  ComplexField out(f.size());
  if (grid.axis(axis).boundary == Boundary::Periodic)
    detail::spectral_derivative(grid, axis, f, out);
  else
    detail::boxed_derivative(grid, axis, f, out);
  return out;
}

inline ComplexField gradient(const ScalarWaveFunction& psi, std::size_t axis) {
  return derivative(psi.grid(), axis, psi.amplitudes());
}

inline RealField derivative(const Grid& grid, std::size_t axis, const RealField& f) {
  ComplexField c(f.begin(), f.end());
  ComplexField d = derivative(grid, axis, c);
  RealField out(f.size());
  for (std::size_t p = 0; p < f.size(); ++p) out[p] = d[p].real();
  return out;
}

// J_k = (hbar/m_k) Im(psi* d_k psi)
inline CurrentField probability_current(const ScalarWaveFunction& psi, const PhysicalConstants& c) {
  const Grid& g = psi.grid();
  c.check(g);
  CurrentField j{g, {}};
  for (std::size_t k = 0; k < g.dimension(); ++k) {
    const ComplexField d = gradient(psi, k);
    const double scale = c.hbar / c.mass(k);
    RealField comp(g.size());
    for (std::size_t p = 0; p < comp.size(); ++p) comp[p] = scale * std::imag(std::conj(psi[p]) * d[p]);
    j.components.push_back(std::move(comp));
  }
  return j;
}

inline RealField divergence(const CurrentField& j) {
  RealField div(j.grid.size(), 0.0);
  for (std::size_t k = 0; k < j.components.size(); ++k) {
    const RealField d = derivative(j.grid, k, j.components[k]);
    for (std::size_t p = 0; p < div.size(); ++p) div[p] += d[p];
  }
  return div;
}

}  // namespace bohm
