#pragma once

// Expected and empirical crossing counts through static surfaces {x_1 = c} x [t0, t1].

#include <algorithm>
#include <cmath>
#include <vector>

#include "bohm/fields.hpp"
#include "bohm/guidance.hpp"
#include "bohm/propagate.hpp"

namespace bohm {

struct CrossingSurface {
  double location = 0.0;
  double t0 = 0.0;
  double t1 = 0.0;
  int orientation = +1;  // normal along +x (+1) or -x (-1)

  void validate(const Grid& g) const {
    require(t0 < t1, "surface needs t0 < t1");
    require(orientation == 1 || orientation == -1, "orientation must be +1 or -1");
    require(g.axis(0).contains(location), "surface location outside the grid");
  }
};

struct CrossingReport {
  double expected_total = 0.0;
  double expected_signed = 0.0;
  double empirical_total = 0.0;
  double empirical_signed = 0.0;
  double stderr_total = 0.0;
  double stderr_signed = 0.0;
  std::size_t n_members = 0;

  bool total_within(double k) const { return std::abs(empirical_total - expected_total) <= k * stderr_total; }
  bool signed_within(double k) const { return std::abs(empirical_signed - expected_signed) <= k * stderr_signed; }
};

struct ExpectedCrossings {
  double total = 0.0;
  double signed_count = 0.0;
};

namespace detail {

// Normal flux through {x_1 = c} at one snapshot: signed and absolute, integrated over the other axis.
inline std::pair<double, double> surface_flux(const ScalarWaveFunction& psi, const PhysicalConstants& c, double x) {
  const CurrentField j = probability_current(psi, c);
  const Grid& g = psi.grid();
  const Axis& ax = g.axis(0);
  const Stencil st = cubic_stencil(ax, x);
  if (g.dimension() == 1) {
    double v = 0.0;
    for (int a = 0; a < 4; ++a) v += st.weight[a] * j.components[0][st.index[a]];
    return {v, std::abs(v)};
  }
  const Axis& ay = g.axis(1);
  double sgn = 0.0, tot = 0.0;
  for (std::size_t jy = 0; jy < ay.count; ++jy) {
    double v = 0.0;
    for (int a = 0; a < 4; ++a) v += st.weight[a] * j.components[0][g.index(st.index[a], jy)];
    sgn += ay.weight(jy) * v;
    tot += ay.weight(jy) * std::abs(v);
  }
  return {sgn, tot};
}

}  // namespace detail

// total = int |j.n| dsigma, signed = int j.n dsigma; trapezoid in time over the snapshots, with
// the surface ends placed by linear interpolation between snapshots.
inline ExpectedCrossings expected_crossings(const EvolutionRecord& rec, const PhysicalConstants& c,
                                            const CrossingSurface& s) {
  s.validate(rec.grid);
  if (!rec.spans(s.t0, s.t1)) throw PreconditionError("surface time span lies outside the record");
  const auto& times = rec.times;
  std::vector<std::pair<double, double>> flux(times.size());  // (signed, abs)
  std::vector<bool> have(times.size(), false);
  auto at = [&](std::size_t k) {
    if (!have[k]) {
      flux[k] = detail::surface_flux(rec.snapshots[k], c, s.location);
      have[k] = true;
    }
    return flux[k];
  };
  // Flux at arbitrary t, linear in time between snapshots.
  auto flux_at = [&](double t) -> std::pair<double, double> {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - times.begin() - 1, 0));
    if (k + 1 >= times.size()) return at(times.size() - 1);
    const double th = (t - times[k]) / (times[k + 1] - times[k]);
    const auto a = at(k), b = at(k + 1);
    return {(1 - th) * a.first + th * b.first, (1 - th) * a.second + th * b.second};
  };
  std::vector<double> nodes{s.t0};
  for (double t : times)
    if (t > s.t0 && t < s.t1) nodes.push_back(t);
  nodes.push_back(s.t1);
  ExpectedCrossings out;
  auto prev = flux_at(nodes[0]);
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const auto cur = flux_at(nodes[i]);
    const double h = nodes[i] - nodes[i - 1];
    out.signed_count += 0.5 * h * (prev.first + cur.first);
    out.total += 0.5 * h * (prev.second + cur.second);
    prev = cur;
  }
  out.signed_count *= s.orientation;
  return out;
}

struct TrajectoryCrossings {
  int total = 0;
  int signed_count = 0;
};

// Sign changes of x(t) - c inside [t0, t1]. A touch without a sign change counts zero.
inline TrajectoryCrossings count_crossings(const Trajectory& tr, const CrossingSurface& s) {
  TrajectoryCrossings out;
  int last = 0;
  auto sign_of = [&](double x) { return x > s.location ? 1 : (x < s.location ? -1 : 0); };
  const auto& smp = tr.samples;
  for (std::size_t k = 0; k < smp.size(); ++k) {
    double x = smp[k].q[0];
    const double t = smp[k].time;
    if (t < s.t0) {
      // Position at t0 by linear interpolation when the next sample is inside the window.
      if (k + 1 < smp.size() && smp[k + 1].time > s.t0) {
        const double th = (s.t0 - t) / (smp[k + 1].time - t);
        last = sign_of((1 - th) * x + th * smp[k + 1].q[0]);
      }
      continue;
    }
    if (t > s.t1) {
      if (k > 0 && smp[k - 1].time < s.t1) {
        const double th = (s.t1 - smp[k - 1].time) / (t - smp[k - 1].time);
        x = (1 - th) * smp[k - 1].q[0] + th * x;
      } else {
        break;
      }
    }
    const int sg = sign_of(x);
    if (sg != 0) {
      if (last != 0 && sg != last) {
        ++out.total;
        out.signed_count += sg * s.orientation;
      }
      last = sg;
    }
    if (t > s.t1) break;
  }
  return out;
}

struct CrossingCounts {
  double mean_total = 0.0;
  double mean_signed = 0.0;
  double stderr_total = 0.0;
  double stderr_signed = 0.0;
  std::size_t n = 0;
  std::vector<TrajectoryCrossings> per_member;
};

inline CrossingCounts count_crossings(const std::vector<Trajectory>& trs, const CrossingSurface& s) {
  CrossingCounts out;
  out.n = trs.size();
  if (trs.empty()) return out;
  out.per_member.reserve(trs.size());
  double st = 0, ss = 0, st2 = 0, ss2 = 0;
  for (const auto& tr : trs) {
    const auto c = count_crossings(tr, s);
    out.per_member.push_back(c);
    st += c.total;
    ss += c.signed_count;
    st2 += double(c.total) * c.total;
    ss2 += double(c.signed_count) * c.signed_count;
  }
  const double n = static_cast<double>(trs.size());
  out.mean_total = st / n;
  out.mean_signed = ss / n;
  if (trs.size() > 1) {
    out.stderr_total = std::sqrt(std::max(0.0, (st2 - n * out.mean_total * out.mean_total) / (n - 1)) / n);
    out.stderr_signed = std::sqrt(std::max(0.0, (ss2 - n * out.mean_signed * out.mean_signed) / (n - 1)) / n);
  }
  return out;
}

inline CrossingReport crossing_report(const EvolutionRecord& rec, const std::vector<Trajectory>& trs,
                                      const CrossingSurface& s) {
  const auto e = expected_crossings(rec, rec.constants, s);
  const auto m = count_crossings(trs, s);
  return {e.total, e.signed_count, m.mean_total, m.mean_signed, m.stderr_total, m.stderr_signed, m.n};
}

}  // namespace bohm
