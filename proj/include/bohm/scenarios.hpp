#pragma once

// The named scenarios behind `bohmsim run`. Each one validates its configuration, runs, and
// produces a report (JSON) plus plot-ready CSV files. Reports carry no timings or paths, so the
// same configuration and seed give byte-identical output.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bohm/analytic.hpp"
#include "bohm/config.hpp"
#include "bohm/equilibrium.hpp"
#include "bohm/flux.hpp"
#include "bohm/io.hpp"
#include "bohm/povm.hpp"

namespace bohm::scenario {

using config::json;
using config::Param;
using config::ScenarioConfig;
using config::Source;

struct Check {
  std::string name;
  double value = 0.0;
  std::string relation;
  double threshold = 0.0;
  bool pass = false;
  bool gating = true;  // informational checks are reported but do not fail the run
};

struct Report {
  std::string scenario;
  json results = json::object();
  std::vector<Check> checks;
  std::vector<std::pair<std::string, std::string>> files;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass || !c.gating; });
  }
  const Check* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
  void below(const std::string& name, double v, double thr, bool gating = true) { checks.push_back({name, v, "<", thr, v < thr, gating}); }
  void above(const std::string& name, double v, double thr, bool gating = true) { checks.push_back({name, v, ">", thr, v > thr, gating}); }
  void at_most(const std::string& name, double v, double thr, bool gating = true) { checks.push_back({name, v, "<=", thr, v <= thr, gating}); }
  void holds(const std::string& name, bool ok, bool gating = true) { checks.push_back({name, ok ? 1.0 : 0.0, "==", 1.0, ok, gating}); }
};

namespace detail {

inline std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::size_t snapshot_at(const EvolutionRecord& rec, double t) {
  const auto it = std::min_element(rec.times.begin(), rec.times.end(),
                                   [&](double a, double b) { return std::abs(a - t) < std::abs(b - t); });
  require(std::abs(*it - t) <= 1e-9 * std::max(1.0, t), "no snapshot at t = " + io::fmt(t));
  return static_cast<std::size_t>(it - rec.times.begin());
}

inline void require_natural(const Source& src, const ScenarioConfig& cfg) {
  if (cfg.constants.hbar != 1.0 || std::any_of(cfg.constants.masses.begin(), cfg.constants.masses.end(), [](double m) { return m != 1.0; }))
    src.fail("/constants", "this scenario's closed forms assume hbar = m = 1");
}

inline void require_snapshot_grid(const Source& src, const ScenarioConfig& cfg, double t, const std::string& ptr) {
  const auto n = config::whole_steps(src, t, cfg.dt, ptr);
  if (n % cfg.stride != 0) src.fail(ptr, "must fall on a stored snapshot (a multiple of dt * stride)");
}

}  // namespace detail

// --- oscillator-oracle ---------------------------------------------------------------------------

inline void check_oscillator_oracle(const ScenarioConfig& cfg, const Source& src) {
  if (cfg.grid->dimension() != 2) src.fail("/grid/lower", "needs a 2D grid");
  if (!std::holds_alternative<potential::CoupledOscillator>(cfg.potential))
    src.fail("/potential/type", "needs the coupled-oscillator potential");
  if (cfg.initial_state.at("generator") != "coupled-oscillator-ground")
    src.fail("/initial_state/generator", "needs the 'coupled-oscillator-ground' generator");
  detail::require_natural(src, cfg);
  detail::require_snapshot_grid(src, cfg, cfg.t_final, "/t_final");
  detail::require_snapshot_grid(src, cfg, cfg.number("trajectory_t_final"), "/parameters/trajectory_t_final");
}

inline Report run_oscillator_oracle(const ScenarioConfig& cfg) {
  Report rep{cfg.scenario, json::object(), {}, {}};
  const Grid& g = *cfg.grid;
  const double kappa = std::get<potential::CoupledOscillator>(cfg.potential).kappa;
  const double t_wf = cfg.t_final, t_tr = cfg.number("trajectory_t_final"), tol = cfg.number("tolerance");
  const auto rec = evolve(cfg.initial(), cfg.potential, cfg.constants, std::max(t_wf, t_tr), cfg.dt, cfg.propagator(), cfg.stride);
  const analytic::CoupledOscillator exact(kappa);

  const auto& psi = rec.snapshots[detail::snapshot_at(rec, t_wf)];
  double err_exact = 0.0, err_quoted = 0.0, err_corrected = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double x = g.coord(p, 0), y = g.coord(p, 1);
    err_exact = std::max(err_exact, std::abs(psi[p] - exact.wavefunction(x, y, t_wf)));
    err_quoted = std::max(err_quoted, std::abs(psi[p] - analytic::quoted_coupled_oscillator_wavefunction(x, y, t_wf)));
    err_corrected = std::max(err_corrected, std::abs(psi[p] - analytic::coupled_oscillator_wavefunction(x, y, t_wf)));
  }

  const std::size_t n = cfg.count("trajectory_points");
  const double r = cfg.number("start_radius");
  std::vector<std::array<double, 2>> starts(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = member_rng(cfg.seed, i);
    const double u = uniform01(rng), v = uniform01(rng);
    starts[i] = {r * (2 * u - 1), r * (2 * v - 1)};
  }
  const RecordField field(rec, cfg.node_policy);
  std::vector<Trajectory> trs(n);
  parallel_for(n, [&](std::size_t i) { trs[i] = integrate_trajectory(Configuration::at(starts[i][0], starts[i][1], 0.0), field, cfg.dt_ode, t_tr); });

  double tr_exact = 0.0, tr_quoted = 0.0;
  std::size_t completed = 0;
  json per_point = json::array();
  std::ostringstream csv;
  csv << "point,t,x,y,x_exact,y_exact,x_quoted,y_quoted\n";
  for (std::size_t i = 0; i < n; ++i) {
    const auto [x0, y0] = starts[i];
    double e1 = 0.0, e2 = 0.0;
    for (const auto& s : trs[i].samples) {
      const auto a = exact.trajectory(x0, y0, s.time);
      const auto b = analytic::coupled_oscillator_trajectory(x0, y0, s.time);
      e1 = std::max({e1, std::abs(s.q[0] - a.x), std::abs(s.q[1] - a.y)});
      e2 = std::max({e2, std::abs(s.q[0] - b.x), std::abs(s.q[1] - b.y)});
      csv << i << ',' << io::fmt(s.time) << ',' << io::fmt(s.q[0]) << ',' << io::fmt(s.q[1]) << ',' << io::fmt(a.x) << ','
          << io::fmt(a.y) << ',' << io::fmt(b.x) << ',' << io::fmt(b.y) << '\n';
    }
    if (trs[i].status == TrajectoryStatus::Completed) ++completed;
    tr_exact = std::max(tr_exact, e1);
    tr_quoted = std::max(tr_quoted, e2);
    per_point.push_back({{"x0", x0}, {"y0", y0}, {"status", to_string(trs[i].status)}, {"max_error_exact", e1}, {"max_error_quoted_ab", e2}});
  }
  rep.files.emplace_back("trajectories.csv", csv.str());

  rep.results = {{"kappa", kappa},
                 {"t_wavefunction", t_wf},
                 {"t_trajectories", t_tr},
                 {"wavefunction_max_error", {{"exact_closed_form", err_exact},
                                             {"quoted_closed_form", err_quoted},
                                             {"half_coupling_closed_form", err_corrected}}},
                 {"trajectory_max_error", {{"exact_closed_form", tr_exact}, {"quoted_ab", tr_quoted}}},
                 {"trajectories", per_point}};
  rep.below("wavefunction vs exact closed form (max norm)", err_exact, tol);
  rep.below("trajectories vs exact closed form", tr_exact, tol);
  rep.holds("all trajectories completed", completed == n);
  rep.below("wavefunction vs quoted closed form (max norm)", err_quoted, tol, false);
  rep.below("trajectories vs quoted a(t), b(t)", tr_quoted, tol, false);
  return rep;
}

// --- equivariance --------------------------------------------------------------------------------

inline void check_evolving(const ScenarioConfig& cfg, const Source& src) {
  try {
    cfg.initial();
  } catch (const PreconditionError& e) {
    src.fail("/initial_state", e.what());
  }
  detail::require_snapshot_grid(src, cfg, cfg.t_final, "/t_final");
}

inline void check_equivariance(const ScenarioConfig& cfg, const Source& src) { check_evolving(cfg, src); }

inline Report run_equivariance(const ScenarioConfig& cfg) {
  Report rep{cfg.scenario, json::object(), {}, {}};
  const Grid& g = *cfg.grid;
  const std::size_t bins = cfg.count("bins"), n = cfg.ensemble_size;
  const auto psi0 = cfg.initial();
  const auto rec = evolve(psi0, cfg.potential, cfg.constants, cfg.t_final, cfg.dt, cfg.propagator(), cfg.stride);
  const auto& psi_t = rec.snapshots.back();

  const Ensemble start = sample_density(psi0, n, cfg.seed);
  const auto moved = evolve_ensemble(start, RecordField(rec, cfg.node_policy), cfg.dt_ode, true);
  const Ensemble fresh = sample_density(psi_t, n, cfg.seed + 1, cfg.t_final);
  const auto d0 = equivariance_distance(start, psi0, bins);
  const auto d = equivariance_distance(moved.ensemble, psi_t, bins);
  const auto d_fresh = equivariance_distance(fresh, psi_t, bins);

  // Two-sample KS per axis, Bonferroni over axes.
  const double level = cfg.number("ks_level") / double(g.dimension());
  double p_min = 1.0;
  json ks = json::array();
  for (std::size_t k = 0; k < g.dimension(); ++k) {
    const auto r = stats::ks_two_sample(moved.ensemble.coordinate(k), fresh.coordinate(k));
    ks.push_back({{"axis", k}, {"statistic", r.statistic}, {"p_value", r.p_value}});
    p_min = std::min(p_min, r.p_value);
  }
  const std::size_t lost = moved.hit_node + moved.left_grid;

  if (g.dimension() == 1) {
    const auto expected = CellMeasure(psi_t).bin_masses(bins);
    std::vector<double> a(bins, 0.0), b(bins, 0.0);
    const Axis& ax = g.axis(0);
    auto bin_of = [&](double x) {
      return static_cast<std::size_t>(std::clamp(std::floor((x - ax.lower) / (ax.length() / double(bins))), 0.0, double(bins - 1)));
    };
    for (const auto& m : moved.ensemble.members) a[bin_of(m.q[0])] += 1.0 / double(moved.ensemble.size());
    for (const auto& m : fresh.members) b[bin_of(m.q[0])] += 1.0 / double(n);
    std::ostringstream csv;
    csv << "bin_lower,bin_upper,transported,fresh,expected\n";
    for (std::size_t k = 0; k < bins; ++k)
      csv << io::fmt(ax.lower + double(k) * ax.length() / double(bins)) << ',' << io::fmt(ax.lower + double(k + 1) * ax.length() / double(bins))
          << ',' << io::fmt(a[k]) << ',' << io::fmt(b[k]) << ',' << io::fmt(expected[k]) << '\n';
    rep.files.emplace_back("histogram.csv", csv.str());
  }
  std::ostringstream pos;
  pos << (g.dimension() == 1 ? "member,q1_start,q1_final\n" : "member,q1_start,q2_start,q1_final,q2_final\n");
  for (std::size_t i = 0; i < std::min<std::size_t>(n, 1000); ++i) {
    const auto& a = start.members[i];
    const auto& b = moved.trajectories[i].final();
    pos << i << ',' << io::fmt(a.q[0]);
    if (g.dimension() == 2) pos << ',' << io::fmt(a.q[1]);
    pos << ',' << io::fmt(b.q[0]);
    if (g.dimension() == 2) pos << ',' << io::fmt(b.q[1]);
    pos << '\n';
  }
  rep.files.emplace_back("members.csv", pos.str());

  rep.results = {{"members", n},
                 {"bins", bins},
                 {"t_final", cfg.t_final},
                 {"l1_initial", d0.l1},
                 {"l1_transported", d.l1},
                 {"l1_fresh_reference", d_fresh.l1},
                 {"ks_transported_vs_exact", d.ks ? json{{"statistic", d.ks->statistic}, {"p_value", d.ks->p_value}} : json(nullptr)},
                 {"ks_transported_vs_fresh", ks},
                 {"hit_node", moved.hit_node},
                 {"left_grid", moved.left_grid}};
  rep.below("L1 distance transported vs |psi_t|^2", d.l1, cfg.number("l1_threshold"));
  rep.above("two-sample KS p-value transported vs fresh", p_min, level);
  rep.below("fraction of members lost at nodes or grid edge", double(lost) / double(n), 1e-3);
  return rep;
}

// --- collapse ------------------------------------------------------------------------------------

inline void check_collapse(const ScenarioConfig& cfg, const Source& src) {
  const Grid& g = *cfg.grid;
  if (g.dimension() != 2) src.fail("/grid/lower", "needs a 2D grid (system x, pointer y)");
  if (!g.all(Boundary::Periodic)) src.fail("/grid/boundary", "needs a periodic grid");
  for (std::size_t k = 0; k < 2; ++k)
    if (std::abs(g.axis(k).lower + (g.axis(k).lower + g.axis(k).length())) > 1e-12)
      src.fail("/grid/lower/" + std::to_string(k), "needs a grid symmetric about zero");
  const json& s = cfg.initial_state;
  if (s.at("generator") != "pointer-superposition") src.fail("/initial_state/generator", "needs 'pointer-superposition'");
  src.only(s, "/initial_state", {"generator", "offset", "packet_width", "pointer_width"});
  for (const char* k : {"offset", "packet_width", "pointer_width"})
    if (s.contains(k)) src.positive(s[k], std::string("/initial_state/") + k);
  if (!std::holds_alternative<potential::Free>(cfg.potential)) src.fail("/potential", "the collapse model carries its own coupling");
  detail::require_natural(src, cfg);
  detail::require_snapshot_grid(src, cfg, cfg.number("t_measure"), "/parameters/t_measure");
  for (double p : cfg.numbers("probabilities"))
    if (!(p > 0.0 && p <= 1.0)) src.fail("/parameters/probabilities", "probabilities must lie in (0, 1]");
}

inline CollapseConfig collapse_config(const ScenarioConfig& cfg, double p) {
  CollapseConfig c;
  c.c1 = std::sqrt(p);
  c.c2 = std::sqrt(1.0 - p);
  c.coupling = cfg.number("coupling");
  c.t_meas = cfg.number("t_measure");
  c.members = cfg.ensemble_size;
  c.seed = cfg.seed;
  const json& s = cfg.initial_state;
  c.packet_offset = s.value("offset", c.packet_offset);
  c.packet_width = s.value("packet_width", c.packet_width);
  c.pointer_width = s.value("pointer_width", c.pointer_width);
  c.x_extent = -cfg.grid->axis(0).lower;
  c.nx = cfg.grid->axis(0).count;
  c.y_extent = -cfg.grid->axis(1).lower;
  c.ny = cfg.grid->axis(1).count;
  c.dt = cfg.dt;
  c.stride = cfg.stride;
  c.dt_ode = cfg.dt_ode;
  c.leakage_threshold = cfg.number("leakage_threshold");
  return c;
}

inline Report run_collapse(const ScenarioConfig& cfg) {
  Report rep{cfg.scenario, json::object(), {}, {}};
  json runs = json::array();
  std::ostringstream leak, outc;
  leak << "probability,t,leakage\n";
  outc << "probability,label,born,count,frequency,band,effective_error,conditional_error\n";
  for (double p : cfg.numbers("probabilities")) {
    const auto r = collapse_experiment(collapse_config(cfg, p));
    json outs = json::array();
    const std::string tag = "|c1|^2=" + detail::label(p) + ": ";
    for (const auto& o : r.outcomes) {
      outs.push_back({{"label", o.label},
                      {"probability", o.probability},
                      {"count", o.count},
                      {"frequency", o.frequency},
                      {"band", o.band},
                      {"within_band", o.within_band},
                      {"effective_error", o.effective_error ? json(*o.effective_error) : json(nullptr)},
                      {"conditional_error", o.conditional_error ? json(*o.conditional_error) : json(nullptr)}});
      outc << io::fmt(p) << ',' << o.label << ',' << io::fmt(o.probability) << ',' << o.count << ',' << io::fmt(o.frequency) << ','
           << io::fmt(o.band) << ',' << (o.effective_error ? io::fmt(*o.effective_error) : "") << ','
           << (o.conditional_error ? io::fmt(*o.conditional_error) : "") << '\n';
      const std::string lab = tag + "outcome " + std::to_string(o.label);
      rep.at_most(lab + " frequency within 4 sigma band", std::abs(o.frequency - o.probability), o.band);
      if (o.count > 0) {
        rep.below(lab + " effective wf vs phi_alpha (L2)", o.effective_error.value_or(NAN), cfg.number("effective_tolerance"));
        rep.below(lab + " conditional vs effective wf (L2)", o.conditional_error.value_or(NAN), cfg.number("conditional_tolerance"));
      }
    }
    for (std::size_t k = 0; k < r.leakage.size(); ++k) leak << io::fmt(p) << ',' << io::fmt(r.leakage_times[k]) << ',' << io::fmt(r.leakage[k]) << '\n';
    const std::size_t lost = r.hit_node + r.left_grid + r.unclassified;
    rep.below(tag + "fraction of members lost or unclassified", double(lost) / double(cfg.ensemble_size), 1e-3);
    runs.push_back({{"probability", p},
                    {"classification_time", r.classification_time},
                    {"final_leakage", r.leakage.empty() ? 0.0 : r.leakage.back()},
                    {"classified", r.classified},
                    {"hit_node", r.hit_node},
                    {"left_grid", r.left_grid},
                    {"unclassified", r.unclassified},
                    {"outcomes", outs}});
  }
  rep.files.emplace_back("leakage.csv", leak.str());
  rep.files.emplace_back("outcomes.csv", outc.str());
  rep.results = {{"members", cfg.ensemble_size}, {"runs", runs}};
  return rep;
}

// --- flux ----------------------------------------------------------------------------------------

inline CrossingSurface surface_of(const ScenarioConfig& cfg) {
  const json& s = cfg.parameters.at("surface");
  return {s.at("location").get<double>(), s.at("t0").get<double>(), s.at("t1").get<double>(), s.value("orientation", 1)};
}

inline void check_flux(const ScenarioConfig& cfg, const Source& src) {
  check_evolving(cfg, src);
  const auto s = surface_of(cfg);
  if (!cfg.grid->axis(0).contains(s.location)) src.fail("/parameters/surface/location", "lies outside the grid");
  if (s.t0 < 0.0 || s.t1 > cfg.t_final + 1e-12) src.fail("/parameters/surface/t1", "surface time span lies outside [0, t_final]");
}

inline Report run_flux(const ScenarioConfig& cfg) {
  Report rep{cfg.scenario, json::object(), {}, {}};
  const auto psi0 = cfg.initial();
  const auto rec = evolve(psi0, cfg.potential, cfg.constants, cfg.t_final, cfg.dt, cfg.propagator(), cfg.stride);
  const auto moved = evolve_ensemble(sample_density(psi0, cfg.ensemble_size, cfg.seed), RecordField(rec, cfg.node_policy), cfg.dt_ode, true);
  const auto surface = surface_of(cfg);
  const auto r = crossing_report(rec, moved.trajectories, surface);
  const auto per = count_crossings(moved.trajectories, surface);
  const double k = cfg.number("standard_errors");

  std::ostringstream csv;
  csv << "member,total,signed,status\n";
  for (std::size_t i = 0; i < per.per_member.size(); ++i)
    csv << i << ',' << per.per_member[i].total << ',' << per.per_member[i].signed_count << ',' << to_string(moved.trajectories[i].status) << '\n';
  rep.files.emplace_back("crossings.csv", csv.str());

  rep.results = io::to_json(r);
  rep.results["surface"] = {{"location", surface.location}, {"t0", surface.t0}, {"t1", surface.t1}, {"orientation", surface.orientation}};
  rep.results["hit_node"] = moved.hit_node;
  rep.results["left_grid"] = moved.left_grid;
  rep.at_most("total crossings: |empirical - expected| in standard errors", std::abs(r.empirical_total - r.expected_total) / r.stderr_total, k);
  rep.at_most("signed crossings: |empirical - expected| in standard errors", std::abs(r.empirical_signed - r.expected_signed) / r.stderr_signed, k);
  rep.at_most("empirical |signed| <= total", std::abs(r.empirical_signed) - r.empirical_total, 0.0);
  rep.at_most("expected |signed| <= total", std::abs(r.expected_signed) - r.expected_total, 1e-12);
  rep.below("fraction of members lost at nodes or grid edge", double(moved.hit_node + moved.left_grid) / double(cfg.ensemble_size), 1e-3);
  return rep;
}

// --- povm ----------------------------------------------------------------------------------------

inline void check_povm(const ScenarioConfig&, const Source&) {}

inline Report run_povm(const ScenarioConfig& cfg) {
  using namespace povm;
  Report rep{cfg.scenario, json::object(), {}, {}};
  const auto zoo = model_zoo(cfg.seed);
  const std::size_t states = cfg.count("random_states");
  std::mt19937_64 rng(cfg.seed);
  json models = json::array();
  std::ostringstream csv;
  csv << "model,n,m,labels,statistics_error,hermiticity,min_eigenvalue,completeness,polarization_error,projection_valued,min_repeat_agreement\n";
  double worst_stats = 0.0;
  for (const auto& m : zoo) {
    const auto p = povm_from_experiment(m);
    const auto c = p.check();
    double stats_err = 0.0, polar_err = 0.0, agree = 1.0;
    for (std::size_t k = 0; k < states; ++k) {
      const Vector psi = random_state(m.system_dim, rng), phi = random_state(m.system_dim, rng);
      const auto mu = outcome_distribution(m, psi);
      for (const auto& [l, o] : p.entries) {
        stats_err = std::max(stats_err, std::abs(mu.at(l) - psi.dot(o * psi).real()));
        // <phi, O psi> = 1/4 sum_k i^k mu(psi + i^k phi), mu extended as a quadratic form.
        Complex b{};
        for (Complex ik : {Complex(1, 0), Complex(0, 1), Complex(-1, 0), Complex(0, -1)}) {
          const Vector v = psi + ik * phi;
          const double n2 = v.squaredNorm();
          if (n2 > 0.0) b += ik * n2 * outcome_distribution(m, v / std::sqrt(n2)).at(l);
        }
        polar_err = std::max(polar_err, std::abs(0.25 * b - phi.dot(o * psi)));
      }
      agree = std::min(agree, repeat_agreement(m, psi));
    }
    const bool pv = is_projection_valued(p, kProjectionTolerance);
    worst_stats = std::max(worst_stats, stats_err);
    const double tol = m.tol();
    rep.below(m.name + ": |mu(a) - <psi,O_a psi>|", stats_err, tol);
    rep.below(m.name + ": completeness", c.completeness, tol);
    rep.above(m.name + ": min eigenvalue", c.min_eigenvalue, -tol);
    rep.below(m.name + ": hermiticity", c.hermiticity, tol);
    rep.below(m.name + ": polarization identity", polar_err, 1e-9);
    if (agree > 1.0 - 1e-10) rep.holds(m.name + ": reproducible implies projection valued", pv);
    models.push_back({{"name", m.name},
                      {"system_dim", m.system_dim},
                      {"apparatus_dim", m.apparatus_dim},
                      {"labels", m.labels()},
                      {"statistics_error", stats_err},
                      {"hermiticity", c.hermiticity},
                      {"min_eigenvalue", c.min_eigenvalue},
                      {"completeness", c.completeness},
                      {"polarization_error", polar_err},
                      {"projection_valued", pv},
                      {"min_repeat_agreement", agree}});
    csv << m.name << ',' << m.system_dim << ',' << m.apparatus_dim << ',' << m.labels().size() << ',' << io::fmt(stats_err) << ','
        << io::fmt(c.hermiticity) << ',' << io::fmt(c.min_eigenvalue) << ',' << io::fmt(c.completeness) << ',' << io::fmt(polar_err)
        << ',' << (pv ? 1 : 0) << ',' << io::fmt(agree) << '\n';
  }
  const ExperimentModel* flip = nullptr;
  const ExperimentModel* coin = nullptr;
  for (const auto& m : zoo) {
    if (m.name == "controlled-flip") flip = &m;
    if (m.name == "coin-flip") coin = &m;
  }
  const auto pflip = povm_from_experiment(*flip);
  rep.holds("controlled-flip is projection valued", is_projection_valued(pflip, kProjectionTolerance));
  Matrix z = Matrix::Zero(2, 2);
  z(0, 0) = 1.0;
  z(1, 1) = -1.0;
  const double a_err = (operator_from_pv(pflip, {{0, 1.0}, {1, -1.0}}) - z).norm();
  rep.below("controlled-flip operator vs diag(+1,-1)", a_err, 1e-12);
  rep.holds("coin-flip is not projection valued", !is_projection_valued(povm_from_experiment(*coin), kProjectionTolerance));
  rep.files.emplace_back("models.csv", csv.str());
  rep.results = {{"random_states", states}, {"worst_statistics_error", worst_stats}, {"controlled_flip_operator_error", a_err}, {"models", models}};
  return rep;
}

// --- classical-limit -----------------------------------------------------------------------------

inline void check_classical_limit(const ScenarioConfig& cfg, const Source& src) {
  if (cfg.grid->dimension() != 1) src.fail("/grid/lower", "needs a 1D grid");
  if (!std::holds_alternative<potential::Harmonic>(cfg.potential)) src.fail("/potential/type", "needs a harmonic potential");
  if (cfg.initial_state.at("generator") != "coherent") src.fail("/initial_state/generator", "needs the 'coherent' generator");
  const auto hs = cfg.numbers("hbar_values");
  for (std::size_t k = 0; k < hs.size(); ++k) {
    if (!(hs[k] > 0.0)) src.fail("/parameters/hbar_values", "values must be positive");
    if (k > 0 && !(hs[k] < hs[k - 1])) src.fail("/parameters/hbar_values", "values must be strictly decreasing");
  }
  if (cfg.parameters.contains("hbar_values") && hs.size() < 2) src.fail("/parameters/hbar_values", "need at least two values");
  for (double h : hs) {
    PhysicalConstants c = cfg.constants;
    c.hbar = h;
    try {
      cfg.initial(c);
    } catch (const PreconditionError& e) {
      src.fail("/initial_state", e.what());
    }
  }
  detail::require_snapshot_grid(src, cfg, cfg.t_final, "/t_final");
}

inline Report run_classical_limit(const ScenarioConfig& cfg) {
  Report rep{cfg.scenario, json::object(), {}, {}};
  const double omega = std::get<potential::Harmonic>(cfg.potential).omega[0];
  const double m = cfg.constants.mass(0);
  const double center = cfg.initial_state.at("center")[0].get<double>();
  const double p0 = cfg.initial_state.contains("momentum") ? cfg.initial_state["momentum"][0].get<double>() : 0.0;
  const double offset = cfg.number("offset_sigmas"), tol = cfg.number("tolerance");
  const auto hs = cfg.numbers("hbar_values");
  std::vector<Trajectory> tr(hs.size()), tr_center(hs.size());
  std::vector<double> sigma(hs.size());
  // One independent run per hbar; each writes only its own slot.
  parallel_for(hs.size(), [&](std::size_t i) {
    PhysicalConstants c = cfg.constants;
    c.hbar = hs[i];
    sigma[i] = std::sqrt(hs[i] / (2.0 * m * omega));
    const auto rec = evolve(cfg.initial(c), cfg.potential, c, cfg.t_final, cfg.dt, cfg.propagator(), cfg.stride);
    const RecordField field(rec, cfg.node_policy);
    tr[i] = integrate_trajectory(Configuration::at(center + offset * sigma[i], 0.0), field, cfg.dt_ode);
    tr_center[i] = integrate_trajectory(Configuration::at(center, 0.0), field, cfg.dt_ode);
  });
  auto classical = [&](double x0, double t) { return x0 * std::cos(omega * t) + p0 / (m * omega) * std::sin(omega * t); };
  json sweep = json::array();
  std::ostringstream s_csv, t_csv;
  s_csv << "hbar,sigma,start,max_deviation,oracle,center_deviation\n";
  t_csv << "hbar,t,bohm,classical\n";
  std::vector<double> dev(hs.size());
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const double x0 = center + offset * sigma[i];
    double d = 0.0, oracle = 0.0, dc = 0.0;
    for (const auto& s : tr[i].samples) {
      d = std::max(d, std::abs(s.q[0] - classical(x0, s.time)));
      // Coherent state: the whole packet translates, so q(t) = x0 + X(t) - X(0).
      oracle = std::max(oracle, std::abs((x0 - center) * (1.0 - std::cos(omega * s.time))));
      t_csv << io::fmt(hs[i]) << ',' << io::fmt(s.time) << ',' << io::fmt(s.q[0]) << ',' << io::fmt(classical(x0, s.time)) << '\n';
    }
    for (const auto& s : tr_center[i].samples) dc = std::max(dc, std::abs(s.q[0] - classical(center, s.time)));
    dev[i] = d;
    const std::string tag = "hbar=" + detail::label(hs[i]) + ": ";
    rep.holds(tag + "trajectory completed", tr[i].status == TrajectoryStatus::Completed && tr_center[i].status == TrajectoryStatus::Completed);
    rep.below(tag + "|deviation - packet-translation oracle|", std::abs(d - oracle), tol);
    rep.below(tag + "packet-centre deviation", dc, tol);
    sweep.push_back({{"hbar", hs[i]}, {"sigma", sigma[i]}, {"start", x0}, {"max_deviation", d}, {"oracle", oracle}, {"center_deviation", dc}});
    s_csv << io::fmt(hs[i]) << ',' << io::fmt(sigma[i]) << ',' << io::fmt(x0) << ',' << io::fmt(d) << ',' << io::fmt(oracle) << ','
          << io::fmt(dc) << '\n';
  }
  double worst_ratio = 0.0;
  for (std::size_t i = 1; i < dev.size(); ++i) worst_ratio = std::max(worst_ratio, dev[i] / dev[i - 1]);
  rep.below("largest ratio of successive deviations (monotone decrease)", worst_ratio, 1.0);
  rep.files.emplace_back("sweep.csv", s_csv.str());
  rep.files.emplace_back("trajectories.csv", t_csv.str());
  rep.results = {{"omega", omega}, {"offset_sigmas", offset}, {"sweep", sweep}};
  return rep;
}

// --- spin ----------------------------------------------------------------------------------------

struct SpinorSpec {
  std::vector<double> center, width, momentum;
  Complex up, down;
};

inline SpinorSpec read_spinor(const Source& src, const json& s) {
  src.only(s, "/initial_state", {"generator", "center", "width", "momentum", "up", "down"});
  SpinorSpec sp;
  sp.center = src.numbers(src.at(s, "/initial_state", "center"), "/initial_state/center", 1);
  sp.width = src.numbers(src.at(s, "/initial_state", "width"), "/initial_state/width", 1);
  if (!(sp.width[0] > 0.0)) src.fail("/initial_state/width/0", "must be positive");
  sp.momentum = s.contains("momentum") ? src.numbers(s["momentum"], "/initial_state/momentum", 1) : std::vector<double>{0.0};
  sp.up = src.complex(src.at(s, "/initial_state", "up"), "/initial_state/up");
  sp.down = src.complex(src.at(s, "/initial_state", "down"), "/initial_state/down");
  const double n = std::sqrt(std::norm(sp.up) + std::norm(sp.down));
  if (!(n > 0.0)) src.fail("/initial_state/up", "spinor must not vanish");
  sp.up /= n;
  sp.down /= n;
  return sp;
}

inline void check_spin(const ScenarioConfig& cfg, const Source& src) {
  if (cfg.grid->dimension() != 1) src.fail("/grid/lower", "needs a 1D grid");
  if (!cfg.grid->all(Boundary::Periodic)) src.fail("/grid/boundary", "needs a periodic grid");
  if (cfg.initial_state.at("generator") != "spinor-gaussian") src.fail("/initial_state/generator", "needs 'spinor-gaussian'");
  read_spinor(src, cfg.initial_state);
  const auto b = cfg.numbers("field");
  if (b[2] != 0.0 || std::hypot(b[0], b[1]) == 0.0) src.fail("/parameters/field", "the Rabi check needs a nonzero transverse field (Bz = 0)");
}

inline Report run_spin(const ScenarioConfig& cfg) {
  Report rep{cfg.scenario, json::object(), {}, {}};
  const Grid& g = *cfg.grid;
  const PhysicalConstants& c = cfg.constants;
  const auto sp = read_spinor(*cfg.source, cfg.initial_state);
  ComplexField f(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) f[p] = config::gaussian_value({g.coord(p, 0)}, sp.center, sp.width, sp.momentum, c.hbar);
  const double nf = std::sqrt(norm_squared(g, f));
  for (auto& z : f) z /= nf;
  const double mu = cfg.number("magnetic_moment");

  // Zero field: each component evolves as a scalar.
  ComplexField up(g.size()), down(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    up[p] = sp.up * f[p];
    down[p] = sp.down * f[p];
  }
  SpinorWaveFunction psi(g, up, down);
  const PauliPropagator pauli0(g, {0, 0, 0}, cfg.potential, c, cfg.dt, mu);
  const Propagator scalar(g, cfg.potential, c, cfg.dt, PropagatorMethod::SplitFourier);
  for (std::size_t n = 0; n < cfg.count("zero_field_steps"); ++n) {
    pauli0.advance(psi);
    scalar.advance(up);
    scalar.advance(down);
  }
  double zero_err = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) zero_err = std::max({zero_err, std::abs(psi.up[p] - up[p]), std::abs(psi.down[p] - down[p])});

  // Transverse field on spin-up: P_up(t) = cos^2(mu |B| t / hbar), period pi hbar / (mu |B|).
  const auto bv = cfg.numbers("field");
  const FieldVector b{bv[0], bv[1], bv[2]};
  const double bmag = std::hypot(b[0], b[1]);
  const double period = std::numbers::pi * c.hbar / (mu * bmag);
  const std::size_t steps = cfg.count("rabi_steps");
  const double dt = period / double(steps);
  SpinorWaveFunction rabi(g, f, ComplexField(g.size()));
  const PauliPropagator pauli(g, b, cfg.potential, c, dt, mu);
  std::vector<double> pop{1.0};
  double pop_err = 0.0;
  std::ostringstream csv;
  csv << "t,p_up,exact\n" << "0,1,1\n";
  for (std::size_t n = 1; n <= steps; ++n) {
    pauli.advance(rabi);
    const double t = double(n) * dt;
    const double p_up = norm_squared(g, rabi.up) / norm(rabi) / norm(rabi);
    const double ex = std::pow(std::cos(mu * bmag * t / c.hbar), 2);
    pop.push_back(p_up);
    pop_err = std::max(pop_err, std::abs(p_up - ex));
    csv << io::fmt(t) << ',' << io::fmt(p_up) << ',' << io::fmt(ex) << '\n';
  }
  // Period from the population minimum (parabola through the three lowest samples) at T/2.
  const auto kmin = static_cast<std::size_t>(std::min_element(pop.begin() + 1, pop.end() - 1) - pop.begin());
  const double y0 = pop[kmin - 1], y1 = pop[kmin], y2 = pop[kmin + 1];
  const double shift = 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2);
  const double measured = 2.0 * (double(kmin) + shift) * dt;
  const double period_err = std::abs(measured - period) / period;

  // Real components: no current anywhere.
  ComplexField ru(g.size()), rd(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double x = g.coord(p, 0), s = (x - sp.center[0]) / sp.width[0];
    ru[p] = std::exp(-s * s / 4.0);
    rd[p] = s * std::exp(-s * s / 4.0);
  }
  const SpinorWaveFunction real(g, ru, rd);
  double vmax = 0.0;
  for (int k = -20; k <= 20; ++k)
    vmax = std::max(vmax, std::abs(spinor_velocity(real, Configuration::at(sp.center[0] + 0.15 * k * sp.width[0]), c)));

  rep.files.emplace_back("rabi.csv", csv.str());
  rep.results = {{"zero_field_max_difference", zero_err},
                 {"rabi_period_exact", period},
                 {"rabi_period_measured", measured},
                 {"rabi_period_relative_error", period_err},
                 {"rabi_population_max_error", pop_err},
                 {"real_spinor_max_speed", vmax}};
  rep.below("B=0 spinor vs scalar evolution", zero_err, cfg.number("scalar_tolerance"));
  rep.below("Rabi period relative error", period_err, cfg.number("rabi_tolerance"));
  rep.below("Rabi population vs cos^2", pop_err, cfg.number("rabi_tolerance"));
  rep.below("real spinor guidance speed", vmax, cfg.number("velocity_tolerance"));
  return rep;
}

// --- registry ------------------------------------------------------------------------------------

struct Scenario {
  config::ScenarioSchema schema;
  std::function<void(const ScenarioConfig&, const Source&)> check;
  std::function<Report(const ScenarioConfig&)> run;
};

inline const std::vector<Scenario>& registry() {
  using P = config::ParamSpec;
  static const std::set<std::string> evolving{"grid", "potential", "initial_state", "dt", "t_final", "stride", "dt_ode"};
  static const std::set<std::string> tuning{"constants", "method", "node_policy"};
  auto with = [](std::set<std::string> a, std::initializer_list<std::string> b) {
    a.insert(b.begin(), b.end());
    return a;
  };
  static const std::vector<Scenario> r{
      {{"oscillator-oracle", "coupled oscillator propagated against its closed-form solution and trajectories",
        with(evolving, {"seed"}), tuning,
        {P{"trajectory_t_final", Param::Positive, 2.0}, P{"trajectory_points", Param::Count, 20}, P{"start_radius", Param::Positive, 1.5},
         P{"tolerance", Param::Positive, 1e-3}}},
       check_oscillator_oracle, run_oscillator_oracle},
      {{"equivariance", "|psi_0|^2 ensemble transported by the guidance flow against |psi_t|^2",
        with(evolving, {"seed", "ensemble_size"}), tuning,
        {P{"bins", Param::Count, 50}, P{"l1_threshold", Param::Positive, 0.05}, P{"ks_level", Param::Probability, 0.01}}},
       check_equivariance, run_equivariance},
      {{"collapse", "two-outcome pointer measurement: Born frequencies and effective wave functions",
        {"seed", "grid", "initial_state", "dt", "stride", "dt_ode", "ensemble_size"}, {"constants", "potential"},
        {P{"probabilities", Param::NumberList, json::array({0.5, 0.8})}, P{"coupling", Param::Positive, 16.0},
         P{"t_measure", Param::Positive, 1.0}, P{"leakage_threshold", Param::Positive, 1e-6},
         P{"effective_tolerance", Param::Positive, 1e-3}, P{"conditional_tolerance", Param::Positive, 1e-4}}},
       check_collapse, run_collapse},
      {{"flux", "Monte Carlo crossing counts against the flux integrals through a surface",
        with(evolving, {"seed", "ensemble_size"}), tuning,
        {P{"surface", Param::Surface, nullptr}, P{"standard_errors", Param::Positive, 4.0}}},
       check_flux, run_flux},
      {{"povm", "experiment models: induced POVMs, statistics identity, projection-valued cases",
        {"seed"}, {},
        {P{"random_states", Param::Count, 100}}},
       check_povm, run_povm},
      {{"classical-limit", "hbar sweep: Bohm trajectory of a coherent packet against the classical orbit",
        evolving, tuning,
        {P{"hbar_values", Param::NumberList, json::array({1.0, 0.3, 0.1, 0.03})}, P{"offset_sigmas", Param::Positive, 1.0},
         P{"tolerance", Param::Positive, 1e-3}}},
       check_classical_limit, run_classical_limit},
      {{"spin", "Pauli spinor: zero-field reduction, Rabi period, real spinors at rest",
        {"grid", "potential", "initial_state", "dt"}, {"constants"},
        {P{"field", Param::Vector3, json::array({0.9, 0.0, 0.0})}, P{"magnetic_moment", Param::Positive, 1.0},
         P{"zero_field_steps", Param::Count, 200}, P{"rabi_steps", Param::Count, 2000},
         P{"scalar_tolerance", Param::Positive, 1e-12}, P{"rabi_tolerance", Param::Positive, 1e-4},
         P{"velocity_tolerance", Param::Positive, 1e-12}}},
       check_spin, run_spin},
  };
  return r;
}

inline const Scenario* find(const std::string& name) {
  for (const auto& s : registry())
    if (s.schema.name == name) return &s;
  return nullptr;
}

// Full validation: schema, generators and scenario-specific constraints. Throws ConfigError.
inline ScenarioConfig load(std::string text, const config::Overrides& over = {}) {
  auto cfg = config::parse(std::move(text), [](const std::string& n) -> const config::ScenarioSchema* {
    const Scenario* s = find(n);
    return s ? &s->schema : nullptr;
  }, over);
  find(cfg.scenario)->check(cfg, *cfg.source);
  return cfg;
}

inline ScenarioConfig load_file(const std::filesystem::path& path, const config::Overrides& over = {}) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return load(ss.str(), over);
}

inline Report run(const ScenarioConfig& cfg) { return find(cfg.scenario)->run(cfg); }

inline json to_json(const Report& r, const ScenarioConfig& cfg) {
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name}, {"value", detail::number_or_null(c.value)}, {"relation", c.relation},
                      {"threshold", c.threshold}, {"pass", c.pass}, {"gating", c.gating}});
  return {{"scenario", r.scenario}, {"passed", r.passed()}, {"checks", checks}, {"results", r.results}, {"config", cfg.document}};
}

inline std::string report_text(const Report& r, const ScenarioConfig& cfg) { return to_json(r, cfg).dump(2) + "\n"; }

inline void write_artifacts(const Report& r, const ScenarioConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "report.json", std::ios::binary) << report_text(r, cfg);
  for (const auto& [name, body] : r.files) std::ofstream(dir / name, std::ios::binary) << body;
}

}  // namespace bohm::scenario
