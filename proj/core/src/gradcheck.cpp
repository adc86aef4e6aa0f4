#include "barcodelm/gradcheck.hpp"

#include <cmath>
#include <vector>

#include "barcodelm/errors.hpp"
#include "barcodelm/rng.hpp"

namespace barcodelm {

double finite_difference_check(const ScalarLossFn& loss_fn, const NamedTensors<double>& params,
                               const NamedTensors<double>& analytic_grads, int probe_count,
                               double epsilon, std::uint64_t seed) {
  if (probe_count <= 0) throw ConfigError("finite_difference_check: probe_count must be > 0");
  if (!(epsilon > 0.0)) throw ConfigError("finite_difference_check: epsilon must be > 0");

  // Flat index space over all parameter coordinates, in name order.
  std::vector<std::pair<const std::string*, std::int64_t>> spans;
  std::int64_t total = 0;
  for (const auto& [name, tensor] : params) {
    spans.emplace_back(&name, tensor.size());
    total += tensor.size();
  }
  if (total == 0) throw ConfigError("finite_difference_check: no parameters");

  Rng rng(seed);
  NamedTensors<double> probe = params;
  double max_rel_error = 0.0;
  for (int p = 0; p < probe_count; ++p) {
    std::int64_t flat = static_cast<std::int64_t>(rng.bounded(static_cast<std::uint64_t>(total)));
    const std::string* name = nullptr;
    for (const auto& [n, count] : spans) {
      if (flat < count) {
        name = n;
        break;
      }
      flat -= count;
    }
    TensorData<double>& tensor = probe.at(*name);
    const double original = tensor.v[flat];
    tensor.v[flat] = original + epsilon;
    const double loss_plus = loss_fn(probe);
    tensor.v[flat] = original - epsilon;
    const double loss_minus = loss_fn(probe);
    tensor.v[flat] = original;
    if (!std::isfinite(loss_plus) || !std::isfinite(loss_minus)) {
      throw MathError("finite_difference_check: non-finite loss while probing '" + *name + "'");
    }
    const double numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
    const double analytic = analytic_grads.at(*name).v[flat];
    const double denom = std::max({1.0, std::abs(numeric), std::abs(analytic)});
    max_rel_error = std::max(max_rel_error, std::abs(numeric - analytic) / denom);
  }
  return max_rel_error;
}

}  // namespace barcodelm
