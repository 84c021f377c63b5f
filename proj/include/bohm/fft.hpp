#pragma once

// In-place FFTs along one axis of a row-major grid field, backed by FFTW.

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "bohm/grid.hpp"

namespace bohm {

namespace detail {
// FFTW's planner is not thread-safe; execution with fftw_execute_dft is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
using PlanHandle = std::unique_ptr<fftw_plan_s, PlanDeleter>;
}  // namespace detail

class AxisFft {
 public:
  AxisFft(const Grid& grid, std::size_t axis) : n_(grid.axis(axis).count) {
    const int n = static_cast<int>(n_);
    const int howmany = static_cast<int>(grid.size() / n_);
    const int stride = static_cast<int>(grid.stride(axis));
    const int dist = axis + 1 == grid.dimension() ? n : 1;
    std::vector<Complex> scratch(grid.size());
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::lock_guard lock(detail::fftw_planner_mutex());
    forward_.reset(fftw_plan_many_dft(1, &n, howmany, buf, nullptr, stride, dist, buf, nullptr, stride, dist,
                                      FFTW_FORWARD, flags));
    backward_.reset(fftw_plan_many_dft(1, &n, howmany, buf, nullptr, stride, dist, buf, nullptr, stride, dist,
                                       FFTW_BACKWARD, flags));
  }

  void forward(ComplexField& data) const { run(forward_.get(), data); }
  // Normalized inverse.
  void backward(ComplexField& data) const {
    run(backward_.get(), data);
    const double s = 1.0 / static_cast<double>(n_);
    for (auto& z : data) z *= s;
  }

 private:
  static void run(fftw_plan p, ComplexField& data) {
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(p, buf, buf);
  }

  std::size_t n_;
  detail::PlanHandle forward_;
  detail::PlanHandle backward_;
};

// Angular wavenumbers in FFT order for a periodic axis.
inline RealField wavenumbers(const Axis& axis) {
  const std::size_t n = axis.count;
  const double dk = 2.0 * std::numbers::pi / (static_cast<double>(n) * axis.spacing);
  RealField k(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto s = static_cast<double>(j);
    k[j] = (j < (n + 1) / 2 ? s : s - static_cast<double>(n)) * dk;
  }
  return k;
}

}  // namespace bohm
