#include "emix/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace emix::nn {

GradCheckReport finite_diff_check(const std::function<double(const ParamSet&)>& f,
                                  ParamSet& params, double h, double tol, std::size_t samples,
                                  std::uint64_t seed, double abs_floor) {
  const Index total = params.scalar_count();
  std::vector<Index> coords(static_cast<std::size_t>(total));
  std::iota(coords.begin(), coords.end(), Index{0});
  if (static_cast<std::size_t>(total) > samples) {
    Rng rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(samples);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  for (Index flat : coords) {
    const FlatCoord c = flat_coord(params, flat);
    auto& entry = params[c.entry];
    double& p = entry.value.data()[c.offset];
    const double saved = p;
    p = saved + h;
    const double f_plus = f(params);
    p = saved - h;
    const double f_minus = f(params);
    p = saved;

    const double numeric = (f_plus - f_minus) / (2.0 * h);
    const double analytic = entry.grad.data()[c.offset];
    const double denom = std::max(std::abs(analytic) + std::abs(numeric), abs_floor);
    const double rel = std::abs(analytic - numeric) / denom;
    ++report.checked;
    if (rel > report.max_rel_error || !std::isfinite(rel)) {
      report.max_rel_error = std::isfinite(rel) ? rel : INFINITY;
      report.worst_param = entry.name;
      report.worst_offset = c.offset;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace emix::nn
