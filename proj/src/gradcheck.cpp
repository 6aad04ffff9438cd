#include "tmsr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "tmsr/error.hpp"

namespace tmsr {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << " max_rel_error=" << max_rel_error << " at component "
     << worst_index << " (analytic " << analytic_at_worst << ", numeric " << numeric_at_worst
     << ", " << checked << " components";
  if (refined > 0) os << ", " << refined << " at reduced step";
  if (skipped > 0) os << ", " << skipped << " skipped at kinks";
  os << ")";
  return os.str();
}

namespace {

template <class T, class Closure>
GradCheckReport run_check(const Closure& eval, bool piecewise, std::span<const T> params,
                          std::span<const float> analytic, const GradCheckOptions& options) {
  if (params.size() != analytic.size()) {
    throw Error(ErrorKind::ShapeMismatch, "gradient_check: params and analytic lengths differ");
  }
  std::vector<T> p(params.begin(), params.end());

  const Evaluation base = eval(p);
  const Evaluation again = eval(p);
  if ((!(base.loss == again.loss) && !(std::isnan(base.loss) && std::isnan(again.loss))) ||
      base.region != again.region) {
    std::ostringstream os;
    os << "gradient_check: loss closure returned " << base.loss << " then " << again.loss
       << " for identical parameters";
    throw Error(ErrorKind::NonDeterministic, os.str());
  }

  double scale = 0.0;
  for (float a : analytic) scale = std::max(scale, std::fabs(static_cast<double>(a)));
  const double floor = std::max(options.relative_floor * scale, 1e-12);

  // Three-point estimate on the grid 0, h1, h2 (possibly uneven), exact for
  // quadratics.
  auto one_sided = [](double f0, double f1, double f2, double h1, double h2) {
    return (f1 - f0) * h2 / (h1 * (h2 - h1)) - (f2 - f0) * h1 / (h2 * (h2 - h1));
  };

  GradCheckReport report;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const T original = p[i];
    auto probe = [&](double offset) {
      p[i] = static_cast<T>(original + offset);
      const double h = static_cast<double>(p[i]) - static_cast<double>(original);
      const Evaluation e = eval(p);
      p[i] = original;
      return std::pair{e, h};
    };

    // A smooth loss gets the plain central difference. For piecewise losses a
    // probe must stay in the base region: try the central difference, then a
    // one-sided stencil on whichever side stays, shrinking the step while
    // neither works.
    const int refinements = piecewise ? options.max_refinements : 0;
    bool found = false;
    double numeric = 0.0;
    double eps = options.epsilon;
    int used = 0;
    for (int r = 0; r <= refinements && !found; ++r, eps /= 10.0) {
      used = r;
      const auto [ep, hp] = probe(eps);
      const auto [em, hm] = probe(-eps);
      const bool in_p = ep.region == base.region, in_m = em.region == base.region;
      if (!piecewise || (in_p && in_m)) {
        // Divide by the step actually representable in T.
        numeric = (ep.loss - em.loss) / (hp - hm);
        found = true;
        break;
      }
      for (const double dir : {1.0, -1.0}) {
        const bool near_ok = dir > 0 ? in_p : in_m;
        if (!near_ok) continue;
        const auto [far, h2] = probe(2.0 * dir * eps);
        if (far.region != base.region) continue;
        const Evaluation& near = dir > 0 ? ep : em;
        numeric = one_sided(base.loss, near.loss, far.loss, dir > 0 ? hp : hm, h2);
        found = true;
        break;
      }
    }
    if (!found) {
      ++report.skipped;
      continue;
    }
    if (used > 0) ++report.refined;
    const double a = analytic[i];
    const double denom = std::max({std::fabs(a), std::fabs(numeric), floor});
    const double rel = std::fabs(a - numeric) / denom;
    if (rel > report.max_rel_error || (std::isnan(rel) && !std::isnan(report.max_rel_error))) {
      report.max_rel_error = rel;
      report.worst_index = i;
      report.analytic_at_worst = a;
      report.numeric_at_worst = numeric;
    }
    ++report.checked;
  }
  report.passed = report.max_rel_error < options.tolerance;
  if (piecewise) {
    report.passed = report.passed && static_cast<double>(report.skipped) <=
                                         options.max_skipped_fraction * static_cast<double>(p.size());
  }
  return report;
}

}  // namespace

GradCheckReport gradient_check(const LossClosure& loss, std::span<const float> params,
                               std::span<const float> analytic, const GradCheckOptions& options) {
  return run_check<float>(
      [&](std::span<const float> q) { return Evaluation{loss(q), 0}; }, false, params, analytic,
      options);
}

GradCheckReport gradient_check_piecewise(const RegionClosure& eval,
                                         std::span<const float> params,
                                         std::span<const float> analytic,
                                         const GradCheckOptions& options) {
  return run_check<float>(eval, true, params, analytic, options);
}

GradCheckReport gradient_check_piecewise(const RegionClosure64& eval,
                                         std::span<const double> params,
                                         std::span<const float> analytic,
                                         const GradCheckOptions& options) {
  return run_check<double>(eval, true, params, analytic, options);
}

}  // namespace tmsr
