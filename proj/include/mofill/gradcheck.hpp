#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "mofill/tensor.hpp"

namespace mofill {

// A function of one tensor together with its vector-Jacobian product.
struct DifferentiableOp {
  std::function<TensorD(const TensorD& x)> forward;
  std::function<TensorD(const TensorD& x, const TensorD& grad_out)> backward;
};

struct GradCheckOptions {
  // Check at most this many entries (chosen at random); 0 checks all.
  std::size_t max_entries = 0;
  std::uint64_t seed = 0;
  // Denominator floor for the relative error, so that two tiny gradients
  // do not register as a large relative disagreement.
  double abs_floor = 1e-6;
  // Entries whose left and right one-sided differences disagree by more than
  // kink_tolerance (relative) are re-measured with a 10x smaller step, at
  // most max_refinements times.
  double kink_tolerance = 1e-4;
  int max_refinements = 1;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  std::size_t refined = 0;  // step reductions caused by kinks
};

// Compares backward() against central differences of the scalar
// <forward(x), r> for a fixed random projection r.
// Relative error per entry: |a - n| / max(|a|, |n|, abs_floor).
GradCheckResult finite_difference_check(const DifferentiableOp& op, const TensorD& input,
                                        double epsilon, const GradCheckOptions& options = {});

}  // namespace mofill
