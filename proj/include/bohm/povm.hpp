#pragma once

// Finite-dimensional experiment models and the POVM they induce on the system.
//
// An experiment couples an n-dimensional system to an m-dimensional apparatus in its ready
// state Phi0 through a unitary U on the composite (system index major). The result is the
// calibration F applied to the apparatus basis index after the interaction. With the isometry
// V psi = U (psi (x) Phi0) and Pi_alpha the projector onto {e_i (x) e_j : F(j) = alpha},
// the outcome statistics are <psi, O_alpha psi> with O_alpha = V^dagger Pi_alpha V.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bohm/errors.hpp"
#include "bohm/grid.hpp"

namespace bohm::povm {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Label = int;

// Algebraic tolerance: 1e-10 up to n*m = 64, scaled by sqrt(n*m) above.
inline double tolerance(std::size_t n, std::size_t m) {
  const double nm = static_cast<double>(n * m);
  return nm <= 64.0 ? 1e-10 : 1e-10 * std::sqrt(nm);
}

struct ExperimentModel {
  std::string name;
  std::size_t system_dim = 1;
  std::size_t apparatus_dim = 1;
  Vector ready_state;
  Matrix interaction;
  std::vector<Label> calibration;  // apparatus index -> label

  void validate() const {
    const auto n = static_cast<Eigen::Index>(system_dim), m = static_cast<Eigen::Index>(apparatus_dim);
    require(system_dim >= 1 && apparatus_dim >= 1, "dimensions must be positive");
    require(ready_state.size() == m, "ready state has the wrong dimension");
    require(std::abs(ready_state.norm() - 1.0) < 1e-12, "ready state must have unit norm");
    require(interaction.rows() == n * m && interaction.cols() == n * m, "interaction has the wrong shape");
    const double err = (interaction.adjoint() * interaction - Matrix::Identity(n * m, n * m)).norm();
    require(err < 1e-10, "interaction is not unitary (|U^H U - I| = " + std::to_string(err) + ")");
    require(calibration.size() == apparatus_dim, "calibration must label every apparatus index");
  }

  double tol() const { return tolerance(system_dim, apparatus_dim); }

  std::vector<Label> labels() const {
    std::vector<Label> out;
    for (Label l : calibration)
      if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
    std::sort(out.begin(), out.end());
    return out;
  }
};

using OutcomeDistribution = std::map<Label, double>;

struct POVMeasure {
  std::vector<std::pair<Label, Matrix>> entries;

  std::size_t dimension() const { return entries.empty() ? 0 : static_cast<std::size_t>(entries.front().second.rows()); }

  const Matrix& at(Label l) const {
    for (const auto& [k, o] : entries)
      if (k == l) return o;
    throw PreconditionError("no POVM entry with label " + std::to_string(l));
  }

  // Largest deviation from self-adjointness, positivity and completeness.
  struct Check {
    double hermiticity = 0.0;
    double min_eigenvalue = 0.0;
    double completeness = 0.0;
  };
  Check check() const {
    Check c;
    c.min_eigenvalue = 0.0;
    const auto n = static_cast<Eigen::Index>(dimension());
    Matrix sum = Matrix::Zero(n, n);
    for (const auto& [label, o] : entries) {
      c.hermiticity = std::max(c.hermiticity, (o - o.adjoint()).norm());
      Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (o + o.adjoint()));
      c.min_eigenvalue = std::min(c.min_eigenvalue, es.eigenvalues().minCoeff());
      sum += o;
    }
    c.completeness = (sum - Matrix::Identity(n, n)).norm();
    return c;
  }
  bool valid(double tol) const {
    const Check c = check();
    return c.hermiticity < tol && c.min_eigenvalue > -tol && c.completeness < tol;
  }
};

// psi (x) Phi0, system index major.
inline Vector compose_initial(const Vector& psi, const ExperimentModel& model) {
  if (psi.size() != static_cast<Eigen::Index>(model.system_dim))
    throw PreconditionError("system state has the wrong dimension");
  require(std::abs(psi.norm() - 1.0) < 1e-10, "system state must have unit norm");
  const auto m = static_cast<Eigen::Index>(model.apparatus_dim);
  Vector out(psi.size() * m);
  for (Eigen::Index i = 0; i < psi.size(); ++i) out.segment(i * m, m) = psi(i) * model.ready_state;
  return out;
}

inline OutcomeDistribution outcome_distribution(const ExperimentModel& model, const Vector& psi) {
  const Vector final_state = model.interaction * compose_initial(psi, model);
  const auto m = static_cast<Eigen::Index>(model.apparatus_dim);
  OutcomeDistribution mu;
  for (Label l : model.labels()) mu[l] = 0.0;
  for (Eigen::Index k = 0; k < final_state.size(); ++k) mu[model.calibration[static_cast<std::size_t>(k % m)]] += std::norm(final_state(k));
  return mu;
}

// Outcome distribution for a calibration on the full composite index; no operator is associated.
inline OutcomeDistribution composite_outcome_distribution(const ExperimentModel& model, const Vector& psi,
                                                          const std::vector<Label>& composite_calibration) {
  require(composite_calibration.size() == model.system_dim * model.apparatus_dim,
          "composite calibration must label every composite index");
  const Vector final_state = model.interaction * compose_initial(psi, model);
  OutcomeDistribution mu;
  for (Eigen::Index k = 0; k < final_state.size(); ++k) mu[composite_calibration[static_cast<std::size_t>(k)]] += std::norm(final_state(k));
  return mu;
}

// The isometry V: C^n -> C^{nm}, V psi = U (psi (x) Phi0).
inline Matrix isometry(const ExperimentModel& model) {
  const auto n = static_cast<Eigen::Index>(model.system_dim), m = static_cast<Eigen::Index>(model.apparatus_dim);
  Matrix embed = Matrix::Zero(n * m, n);
  for (Eigen::Index i = 0; i < n; ++i) embed.block(i * m, i, m, 1) = model.ready_state;
  return model.interaction * embed;
}

inline POVMeasure povm_from_experiment(const ExperimentModel& model) {
  model.validate();
  const Matrix v = isometry(model);
  const auto m = static_cast<Eigen::Index>(model.apparatus_dim);
  POVMeasure out;
  for (Label l : model.labels()) {
    // V^H Pi V = sum over rows k with F(k mod m) = l of v_k^H v_k.
    Matrix o = Matrix::Zero(v.cols(), v.cols());
    for (Eigen::Index k = 0; k < v.rows(); ++k)
      if (model.calibration[static_cast<std::size_t>(k % m)] == l) o += v.row(k).adjoint() * v.row(k);
    out.entries.emplace_back(l, std::move(o));
  }
  return out;
}

inline bool is_projection_valued(const POVMeasure& p, double tol) {
  for (std::size_t a = 0; a < p.entries.size(); ++a) {
    const Matrix& oa = p.entries[a].second;
    if ((oa * oa - oa).norm() >= tol) return false;
    for (std::size_t b = 0; b < p.entries.size(); ++b)
      if (a != b && (oa * p.entries[b].second).norm() >= tol) return false;
  }
  return true;
}

inline constexpr double kProjectionTolerance = 1e-8;

inline Matrix operator_from_pv(const POVMeasure& p, const std::map<Label, double>& values) {
  if (!is_projection_valued(p, kProjectionTolerance))
    throw NotProjectionValued("POVM is not projection valued; no self-adjoint operator is associated");
  const auto n = static_cast<Eigen::Index>(p.dimension());
  Matrix a = Matrix::Zero(n, n);
  for (const auto& [label, o] : p.entries) {
    const auto it = values.find(label);
    if (it == values.end()) throw PreconditionError("no value assigned to label " + std::to_string(label));
    a += it->second * o;
  }
  return a;
}

// Probability that a second run with a fresh apparatus reproduces the first outcome.
inline double repeat_agreement(const ExperimentModel& model, const Vector& psi) {
  const auto n = static_cast<Eigen::Index>(model.system_dim), m = static_cast<Eigen::Index>(model.apparatus_dim);
  const Vector first = model.interaction * compose_initial(psi, model);  // index (i, j1)
  // Attach apparatus 2 and apply U to (system, apparatus 2): index (i, j1, j2).
  Vector second = Vector::Zero(n * m * m);
  for (Eigen::Index j1 = 0; j1 < m; ++j1) {
    Vector sys(n);
    for (Eigen::Index i = 0; i < n; ++i) sys(i) = first(i * m + j1);
    Vector composed(n * m);
    for (Eigen::Index i = 0; i < n; ++i) composed.segment(i * m, m) = sys(i) * model.ready_state;
    const Vector out = model.interaction * composed;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j2 = 0; j2 < m; ++j2) second(i * m * m + j1 * m + j2) = out(i * m + j2);
  }
  double agree = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j1 = 0; j1 < m; ++j1)
      for (Eigen::Index j2 = 0; j2 < m; ++j2)
        if (model.calibration[static_cast<std::size_t>(j1)] == model.calibration[static_cast<std::size_t>(j2)])
          agree += std::norm(second(i * m * m + j1 * m + j2));
  return agree;
}

// --- generators -------------------------------------------------------------------------------

inline Vector basis_vector(std::size_t dim, std::size_t k) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(dim));
  v(static_cast<Eigen::Index>(k)) = 1.0;
  return v;
}

// Shifts the apparatus index by the system index: |i, j> -> |i, (j + i) mod m>.
inline Matrix controlled_shift(std::size_t n, std::size_t m) {
  const auto nm = static_cast<Eigen::Index>(n * m);
  Matrix u = Matrix::Zero(nm, nm);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      u(static_cast<Eigen::Index>(i * m + (j + i) % m), static_cast<Eigen::Index>(i * m + j)) = 1.0;
  return u;
}

// Applies a Hadamard to the (two-level) apparatus iff the system is in basis state 1.
inline Matrix controlled_hadamard(std::size_t n) {
  const std::size_t m = 2;
  Matrix u = Matrix::Identity(static_cast<Eigen::Index>(n * m), static_cast<Eigen::Index>(n * m));
  if (n > 1) {
    const double r = 1.0 / std::sqrt(2.0);
    const Eigen::Index b = m;
    u(b, b) = r;
    u(b, b + 1) = r;
    u(b + 1, b) = r;
    u(b + 1, b + 1) = -r;
  }
  return u;
}

inline Matrix random_unitary(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix z(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) z(i, j) = Complex(g(rng), g(rng));
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < d; ++k) q.col(k) *= std::polar(1.0, std::arg(r(k, k)));
  return q;
}

inline Vector random_state(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = Complex(g(rng), g(rng));
  return v / v.norm();
}

inline std::vector<Label> identity_calibration(std::size_t m) {
  std::vector<Label> f(m);
  for (std::size_t j = 0; j < m; ++j) f[j] = static_cast<Label>(j);
  return f;
}

inline std::optional<Matrix> named_interaction(const std::string& name, std::size_t n, std::size_t m) {
  if (name == "identity") return Matrix::Identity(static_cast<Eigen::Index>(n * m), static_cast<Eigen::Index>(n * m));
  if (name == "controlled-flip") {
    if (n != 2 || m != 2) throw PreconditionError("controlled-flip needs n = m = 2");
    return controlled_shift(2, 2);
  }
  if (name == "controlled-shift") return controlled_shift(n, m);
  if (name == "hadamard-pointer") {
    if (m != 2) throw PreconditionError("hadamard-pointer needs a two-level apparatus");
    return controlled_hadamard(n);
  }
  return std::nullopt;
}

inline ExperimentModel make_model(std::string name, std::size_t n, std::size_t m, Vector ready, Matrix u,
                                  std::vector<Label> f) {
  ExperimentModel model{std::move(name), n, m, std::move(ready), std::move(u), std::move(f)};
  model.validate();
  return model;
}

// The bundled model zoo used by tests and the "povm" scenario.
inline std::vector<ExperimentModel> model_zoo(std::uint64_t seed = 7) {
  std::vector<ExperimentModel> zoo;
  zoo.push_back(make_model("trivial", 2, 2, basis_vector(2, 0), *named_interaction("identity", 2, 2), {0, 0}));
  Vector coin(2);
  coin << std::sqrt(0.5), std::sqrt(0.5);
  zoo.push_back(make_model("coin-flip", 2, 2, coin, *named_interaction("identity", 2, 2), identity_calibration(2)));
  zoo.push_back(make_model("controlled-flip", 2, 2, basis_vector(2, 0), *named_interaction("controlled-flip", 2, 2),
                           identity_calibration(2)));
  zoo.push_back(make_model("controlled-shift-3", 3, 3, basis_vector(3, 0), controlled_shift(3, 3),
                           identity_calibration(3)));
  zoo.push_back(make_model("coarse-shift-3", 3, 3, basis_vector(3, 0), controlled_shift(3, 3), {0, 1, 1}));
  zoo.push_back(make_model("hadamard-pointer", 2, 2, basis_vector(2, 0), *named_interaction("hadamard-pointer", 2, 2),
                           identity_calibration(2)));
  std::mt19937_64 rng(seed);
  zoo.push_back(make_model("random-2x3", 2, 3, random_state(3, rng), random_unitary(6, rng), {0, 1, 1}));
  zoo.push_back(make_model("random-3x4", 3, 4, random_state(4, rng), random_unitary(12, rng), identity_calibration(4)));
  zoo.push_back(make_model("random-4x16", 4, 16, random_state(16, rng), random_unitary(64, rng),
                           [] {
                             std::vector<Label> f(16);
                             for (int j = 0; j < 16; ++j) f[j] = j % 3;
                             return f;
                           }()));
  return zoo;
}

}  // namespace bohm::povm
