#include "mofill/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mofill/random.hpp"

namespace mofill {

GradCheckResult finite_difference_check(const DifferentiableOp& op, const TensorD& input,
                                        double epsilon, const GradCheckOptions& options) {
  if (!(epsilon > 0.0)) throw UsageError("finite_difference_check: epsilon must be > 0");
  if (!op.forward || !op.backward)
    throw UsageError("finite_difference_check: forward and backward are required");

  const TensorD out = op.forward(input);
  Rng rng(derive_seed(options.seed, 0x9c));
  TensorD projection(out.shape());
  for (std::size_t i = 0; i < projection.size(); ++i) projection[i] = rng.uniform(-1.0, 1.0);

  const TensorD analytic = op.backward(input, projection);
  require_same_shape(analytic.shape(), input.shape(), "finite_difference_check gradient");

  std::vector<std::size_t> entries(input.size());
  std::iota(entries.begin(), entries.end(), std::size_t{0});
  if (options.max_entries != 0 && options.max_entries < entries.size()) {
    for (std::size_t i = 0; i < options.max_entries; ++i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(entries.size() - 1)));
      std::swap(entries[i], entries[j]);
    }
    entries.resize(options.max_entries);
  }

  auto objective = [&](const TensorD& x) { return dot(op.forward(x), projection); };

  GradCheckResult result;
  TensorD probe = input;
  const double base = objective(input);
  for (std::size_t idx : entries) {
    const double saved = probe[idx];
    double numeric = 0.0;
    // A step that straddles a kink (leaky-ReLU zero, max-pool tie) shows up as
    // disagreeing one-sided differences; shrink the step and retry.
    double eps = epsilon;
    for (int attempt = 0; attempt <= options.max_refinements; ++attempt, eps *= 0.1) {
      probe[idx] = saved + eps;
      const double plus = objective(probe);
      probe[idx] = saved - eps;
      const double minus = objective(probe);
      probe[idx] = saved;
      numeric = (plus - minus) / (2.0 * eps);
      const double right = (plus - base) / eps;
      const double left = (base - minus) / eps;
      const double scale = std::max({std::fabs(numeric), options.abs_floor});
      if (std::fabs(right - left) <= options.kink_tolerance * scale) break;
      if (attempt < options.max_refinements) ++result.refined;
    }

    const double a = analytic[idx];
    const double denom = std::max({std::fabs(a), std::fabs(numeric), options.abs_floor});
    const double rel = std::fabs(a - numeric) / denom;
    if (result.checked == 0 || rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_index = idx;
      result.analytic = a;
      result.numeric = numeric;
    }
    ++result.checked;
  }
  return result;
}

}  // namespace mofill
