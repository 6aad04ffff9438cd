#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

namespace tmsr {

using LossClosure = std::function<double(std::span<const float>)>;

// Loss plus a fingerprint of the piecewise-linear region the evaluation fell
// in (for example the sign pattern of every activation input).
struct Evaluation {
  double loss = 0.0;
  std::uint64_t region = 0;
};
using RegionClosure = std::function<Evaluation(std::span<const float>)>;
using RegionClosure64 = std::function<Evaluation(std::span<const double>)>;

struct GradCheckOptions {
  double epsilon = 1e-3;
  double tolerance = 1e-3;
  // Relative error is |a - n| / max(|a|, |n|, floor), floor = relative_floor * max_i |a_i|.
  // Components far below the gradient's overall scale are judged against
  // that scale instead of their own magnitude, where float32 evaluation noise
  // dominates.
  double relative_floor = 1e-2;
  // gradient_check_piecewise fails when more than this fraction of components
  // had to be skipped.
  double max_skipped_fraction = 0.05;
  // Piecewise checks retry a kink-crossing component with the step divided by
  // 10 up to this many times.
  int max_refinements = 3;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t checked = 0;
  // Components whose +-epsilon probe left the base region (piecewise only).
  std::size_t skipped = 0;
  // Components that needed a smaller step to stay in one region.
  std::size_t refined = 0;
  bool passed = false;

  std::string summary() const;
};

// Compares `analytic` against central finite differences of `loss` around
// `params`. Throws NonDeterministic if two evaluations at the same point
// disagree.
GradCheckReport gradient_check(const LossClosure& loss, std::span<const float> params,
                               std::span<const float> analytic,
                               const GradCheckOptions& options = {});

// Same comparison for piecewise-smooth losses. A central difference that
// crosses a kink measures neither one-sided slope, so components whose
// perturbed evaluations land in a different region than the base point are
// skipped and counted instead of compared.
GradCheckReport gradient_check_piecewise(const RegionClosure& eval,
                                         std::span<const float> params,
                                         std::span<const float> analytic,
                                         const GradCheckOptions& options = {});

// Variant whose finite differences are taken in double precision, for
// checking a float32 backward pass against a float64 evaluation of the same
// function.
GradCheckReport gradient_check_piecewise(const RegionClosure64& eval,
                                         std::span<const double> params,
                                         std::span<const float> analytic,
                                         const GradCheckOptions& options = {});

}  // namespace tmsr
