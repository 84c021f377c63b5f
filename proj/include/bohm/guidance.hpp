#pragma once

// Guidance velocity fields (scalar and spinor), node handling, Pauli spin evolution and
// RK4 integration of Bohm trajectories through stored evolutions.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bohm/fields.hpp"
#include "bohm/grid.hpp"
#include "bohm/propagate.hpp"

namespace bohm {

// A point in configuration space at a given time.
struct Configuration {
  std::array<double, kMaxDimension> q{};
  std::size_t dimension = 1;
  double time = 0.0;

  static Configuration at(double x, double t = 0.0) { return {{x, 0.0}, 1, t}; }
  static Configuration at(double x, double y, double t) { return {{x, y}, 2, t}; }

  double operator[](std::size_t k) const { return q[k]; }
  std::span<const double> coords() const { return {q.data(), dimension}; }
};

enum class TrajectoryStatus { Completed, HitNode, LeftGrid };

inline const char* to_string(TrajectoryStatus s) {
  switch (s) {
    case TrajectoryStatus::Completed: return "Completed";
    case TrajectoryStatus::HitNode: return "HitNode";
    case TrajectoryStatus::LeftGrid: return "LeftGrid";
  }
  return "?";
}

struct Trajectory {
  std::vector<Configuration> samples;
  TrajectoryStatus status = TrajectoryStatus::Completed;

  const Configuration& final() const { return samples.back(); }
};

struct NodePolicy {
  enum class Action { Halt, CapSpeed };
  // Node threshold as a fraction of the peak density of the field.
  double relative_threshold = 1e-12;
  Action action = Action::Halt;
  double max_speed = 0.0;

  static NodePolicy halt(double rel = 1e-12) { return {rel, Action::Halt, 0.0}; }
  static NodePolicy cap_speed(double vmax, double rel = 1e-12) { return {rel, Action::CapSpeed, vmax}; }
};

using Velocity = std::array<double, kMaxDimension>;

// --- interpolation --------------------------------------------------------------------------

namespace detail {

struct Stencil {
  std::array<std::size_t, 4> index{};
  std::array<double, 4> weight{};
};

// Four-point Lagrange stencil along one axis. Periodic axes wrap; boxed axes shift the stencil inward.
inline Stencil cubic_stencil(const Axis& a, double x) {
  if (!a.contains(x)) throw OutOfBounds("coordinate " + std::to_string(x) + " outside the grid");
  double s = (x - a.lower) / a.spacing;
  const double r = std::round(s);
  if (std::abs(s - r) < 1e-12) s = r;
  const auto n = static_cast<long>(a.count);
  long base = static_cast<long>(std::floor(s)) - 1;
  if (a.boundary == Boundary::Boxed) base = std::clamp(base, 0L, n - 4);
  Stencil st;
  for (int j = 0; j < 4; ++j) {
    const double node = static_cast<double>(base + j);
    double w = 1.0;
    for (int m = 0; m < 4; ++m)
      if (m != j) w *= (s - static_cast<double>(base + m)) / (node - static_cast<double>(base + m));
    st.weight[j] = w;
    st.index[j] = static_cast<std::size_t>(((base + j) % n + n) % n);
  }
  return st;
}

}  // namespace detail

// Precomputed interpolation stencils for one configuration on one grid.
class PointSampler {
 public:
  PointSampler(const Grid& g, std::span<const double> q) : dim_(g.dimension()), ny_(dim_ == 2 ? g.axis(1).count : 1) {
    require(q.size() == dim_, "configuration dimension does not match the grid");
    for (std::size_t k = 0; k < dim_; ++k) st_[k] = detail::cubic_stencil(g.axis(k), q[k]);
  }

  Complex operator()(const ComplexField& f) const {
    if (dim_ == 1) {
      Complex s{};
      for (int a = 0; a < 4; ++a) s += st_[0].weight[a] * f[st_[0].index[a]];
      return s;
    }
    Complex s{};
    for (int a = 0; a < 4; ++a) {
      Complex row{};
      const std::size_t off = st_[0].index[a] * ny_;
      for (int b = 0; b < 4; ++b) row += st_[1].weight[b] * f[off + st_[1].index[b]];
      s += st_[0].weight[a] * row;
    }
    return s;
  }

 private:
  std::size_t dim_, ny_;
  std::array<detail::Stencil, kMaxDimension> st_{};
};

inline Complex interpolate(const ScalarWaveFunction& psi, const Configuration& q) {
  return PointSampler(psi.grid(), q.coords())(psi.amplitudes());
}

// --- velocity fields ------------------------------------------------------------------------

namespace detail {

inline double peak_density(const ComplexField& f) {
  double m = 0.0;
  for (const auto& z : f) m = std::max(m, std::norm(z));
  return m;
}

// v_k = (hbar/m_k) numerator_k / rho, with the node policy applied when rho < threshold.
inline Velocity apply_guidance(std::span<const double> numerator, double rho, double threshold,
                               const PhysicalConstants& c, const NodePolicy& policy, std::span<const double> q) {
  Velocity v{};
  if (rho < threshold || rho <= 0.0) {
    if (policy.action == NodePolicy::Action::Halt) {
      std::string where;
      for (double x : q) where += std::to_string(x) + " ";
      throw HitNode("density below node threshold at " + where);
    }
    if (rho <= 0.0) return v;
    double speed2 = 0.0;
    for (std::size_t k = 0; k < numerator.size(); ++k) {
      v[k] = c.hbar / c.mass(k) * numerator[k] / rho;
      speed2 += v[k] * v[k];
    }
    const double speed = std::sqrt(speed2);
    if (speed > policy.max_speed && speed > 0.0)
      for (std::size_t k = 0; k < numerator.size(); ++k) v[k] *= policy.max_speed / speed;
    return v;
  }
  for (std::size_t k = 0; k < numerator.size(); ++k) v[k] = c.hbar / c.mass(k) * numerator[k] / rho;
  return v;
}

}  // namespace detail

// psi together with its grid gradients, for repeated velocity evaluation.
class GuidanceField {
 public:
  GuidanceField(ScalarWaveFunction psi, PhysicalConstants c) : psi_(std::move(psi)), constants_(std::move(c)) {
    constants_.check(psi_.grid());
    for (std::size_t k = 0; k < psi_.grid().dimension(); ++k) grad_.push_back(gradient(psi_, k));
    peak_ = detail::peak_density(psi_.amplitudes());
  }

  const ScalarWaveFunction& psi() const { return psi_; }
  const ComplexField& gradient_component(std::size_t k) const { return grad_[k]; }
  double peak_density() const { return peak_; }

  Velocity velocity(const Configuration& q, const NodePolicy& policy) const {
    const PointSampler at(psi_.grid(), q.coords());
    const Complex v = at(psi_.amplitudes());
    std::array<double, kMaxDimension> num{};
    for (std::size_t k = 0; k < grad_.size(); ++k) num[k] = std::imag(std::conj(v) * at(grad_[k]));
    return detail::apply_guidance({num.data(), grad_.size()}, std::norm(v), policy.relative_threshold * peak_,
                                  constants_, policy, q.coords());
  }

 private:
  ScalarWaveFunction psi_;
  PhysicalConstants constants_;
  std::vector<ComplexField> grad_;
  double peak_ = 0.0;
};

// v = (hbar/m) Im(grad psi / psi) at q.
inline Velocity velocity(const ScalarWaveFunction& psi, const Configuration& q, const PhysicalConstants& c,
                         const NodePolicy& policy = {}) {
  return GuidanceField(psi, c).velocity(q, policy);
}

// v = (hbar/m) Im(psi^dagger grad psi) / (psi^dagger psi) for a two-component spinor.
inline double spinor_velocity(const SpinorWaveFunction& psi, const Configuration& q, const PhysicalConstants& c,
                              const NodePolicy& policy = {}) {
  c.check(psi.grid);
  const ComplexField du = derivative(psi.grid, 0, psi.up);
  const ComplexField dd = derivative(psi.grid, 0, psi.down);
  const PointSampler at(psi.grid, q.coords());
  const Complex u = at(psi.up), d = at(psi.down);
  const double num = std::imag(std::conj(u) * at(du) + std::conj(d) * at(dd));
  double peak = 0.0;
  for (std::size_t p = 0; p < psi.up.size(); ++p) peak = std::max(peak, std::norm(psi.up[p]) + std::norm(psi.down[p]));
  const double rho = std::norm(u) + std::norm(d);
  return detail::apply_guidance({&num, 1}, rho, policy.relative_threshold * peak, c, policy, q.coords())[0];
}

// --- Pauli spin evolution -------------------------------------------------------------------

using FieldVector = std::array<double, 3>;

// exp(-i theta n.sigma) as a 2x2 matrix, theta = mu |B| tau / hbar.
inline std::array<Complex, 4> spin_rotation(const FieldVector& b, double mu, double tau, double hbar) {
  const double mag = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
  if (mag == 0.0) return {1.0, 0.0, 0.0, 1.0};
  const double theta = mu * mag * tau / hbar;
  const double c = std::cos(theta), s = std::sin(theta);
  const double nx = b[0] / mag, ny = b[1] / mag, nz = b[2] / mag;
  // cos I - i sin (nx sx + ny sy + nz sz)
  return {Complex{c, -s * nz}, Complex{-s * ny, -s * nx}, Complex{s * ny, -s * nx}, Complex{c, s * nz}};
}

// Strang step: half spin rotation, scalar kinetic+potential step per component, half spin rotation.
class PauliPropagator {
 public:
  PauliPropagator(const Grid& grid, const FieldVector& b, const Potential& v, const PhysicalConstants& c, double dt,
                  double mu = 1.0)
      : scalar_(grid, v, c, dt, default_method(grid)), half_(spin_rotation(b, mu, 0.5 * dt, c.hbar)) {
    require(grid.dimension() == 1, "Pauli evolution is implemented on 1D grids");
  }

  void advance(SpinorWaveFunction& psi) const {
    rotate(psi);
    scalar_.advance(psi.up);
    scalar_.advance(psi.down);
    rotate(psi);
  }

 private:
  void rotate(SpinorWaveFunction& psi) const {
    for (std::size_t p = 0; p < psi.up.size(); ++p) {
      const Complex u = psi.up[p], d = psi.down[p];
      psi.up[p] = half_[0] * u + half_[1] * d;
      psi.down[p] = half_[2] * u + half_[3] * d;
    }
  }

  Propagator scalar_;
  std::array<Complex, 4> half_;
};

inline SpinorWaveFunction step_spinor_pauli(const SpinorWaveFunction& psi, const FieldVector& b, const Potential& v,
                                            const PhysicalConstants& c, double dt, double mu = 1.0) {
  SpinorWaveFunction out = psi;
  PauliPropagator(psi.grid, b, v, c, dt, mu).advance(out);
  return out;
}

// --- time-dependent fields and trajectories ---------------------------------------------------

// Velocity field of a stored evolution, psi_t linearly interpolated in time between snapshots.
class RecordField {
 public:
  RecordField(const EvolutionRecord& rec, NodePolicy policy = {}) : rec_(&rec), policy_(policy) {
    require(!rec.snapshots.empty(), "empty evolution record");
    for (const auto& s : rec.snapshots) fields_.push_back(std::make_unique<GuidanceField>(s, rec.constants));
  }

  const EvolutionRecord& record() const { return *rec_; }
  double start() const { return rec_->start(); }
  double end() const { return rec_->end(); }

  Velocity operator()(std::span<const double> q, double t) const {
    const auto& times = rec_->times;
    const std::size_t dim = rec_->grid.dimension();
    const PointSampler at(rec_->grid, q);
    std::size_t k = 0;
    double theta = 0.0;
    if (times.size() > 1) {
      const auto it = std::upper_bound(times.begin(), times.end(), t);
      k = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - times.begin() - 1, 0,
                                                              static_cast<std::ptrdiff_t>(times.size()) - 2));
      theta = std::clamp((t - times[k]) / (times[k + 1] - times[k]), 0.0, 1.0);
    }
    auto blend = [&](auto&& get) {
      Complex v = (1.0 - theta) * at(get(*fields_[k]));
      if (theta > 0.0) v += theta * at(get(*fields_[k + 1]));
      return v;
    };
    const Complex psi = blend([](const GuidanceField& f) -> const ComplexField& { return f.psi().amplitudes(); });
    std::array<double, kMaxDimension> num{};
    for (std::size_t a = 0; a < dim; ++a) {
      const Complex d = blend([a](const GuidanceField& f) -> const ComplexField& { return f.gradient_component(a); });
      num[a] = std::imag(std::conj(psi) * d);
    }
    double peak = fields_[k]->peak_density();
    if (theta > 0.0) peak = (1.0 - theta) * peak + theta * fields_[k + 1]->peak_density();
    return detail::apply_guidance({num.data(), dim}, std::norm(psi), policy_.relative_threshold * peak,
                                  rec_->constants, policy_, q);
  }

 private:
  const EvolutionRecord* rec_;
  NodePolicy policy_;
  std::vector<std::unique_ptr<GuidanceField>> fields_;
};

// Classical fixed-step RK4 for dq/dt = field(q, t) from q0 to t_end. `field` throws OutOfBounds or
// HitNode, which end the trajectory with the matching status; the last sample is the last good state.
template <class Field>
Trajectory integrate_rk4(const Configuration& q0, double t_end, double dt, const Field& field) {
  require(dt > 0.0, "dt_ode must be positive");
  Trajectory tr;
  tr.samples.push_back(q0);
  const std::size_t d = q0.dimension;
  const auto nsteps = static_cast<std::size_t>(std::ceil((t_end - q0.time) / dt - 1e-9));
  Configuration cur = q0;
  auto eval = [&](const std::array<double, kMaxDimension>& q, double t) { return field(std::span<const double>(q.data(), d), t); };
  try {
    eval(cur.q, cur.time);
    for (std::size_t n = 0; n < nsteps; ++n) {
      const double h = std::min(dt, t_end - cur.time);
      if (h <= 0.0) break;
      const double t = cur.time;
      std::array<double, kMaxDimension> tmp{};
      const Velocity k1 = eval(cur.q, t);
      for (std::size_t a = 0; a < d; ++a) tmp[a] = cur.q[a] + 0.5 * h * k1[a];
      const Velocity k2 = eval(tmp, t + 0.5 * h);
      for (std::size_t a = 0; a < d; ++a) tmp[a] = cur.q[a] + 0.5 * h * k2[a];
      const Velocity k3 = eval(tmp, t + 0.5 * h);
      for (std::size_t a = 0; a < d; ++a) tmp[a] = cur.q[a] + h * k3[a];
      const Velocity k4 = eval(tmp, t + h);
      Configuration next = cur;
      for (std::size_t a = 0; a < d; ++a) next.q[a] = cur.q[a] + h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
      next.time = n + 1 == nsteps ? t_end : t + h;
      eval(next.q, next.time);
      tr.samples.push_back(next);
      cur = next;
    }
  } catch (const OutOfBounds&) {
    tr.status = TrajectoryStatus::LeftGrid;
  } catch (const HitNode&) {
    tr.status = TrajectoryStatus::HitNode;
  }
  return tr;
}

inline Trajectory integrate_trajectory(const Configuration& q0, const RecordField& field, double dt_ode,
                                       std::optional<double> t_end = std::nullopt) {
  const double end = t_end.value_or(field.end());
  require(field.record().spans(q0.time, end), "record does not span the requested interval");
  return integrate_rk4(q0, end, dt_ode, field);
}

inline Trajectory integrate_trajectory(const Configuration& q0, const EvolutionRecord& rec, const NodePolicy& policy,
                                       double dt_ode) {
  return integrate_trajectory(q0, RecordField(rec, policy), dt_ode);
}

}  // namespace bohm
