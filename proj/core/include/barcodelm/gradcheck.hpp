#pragma once

#include <cstdint>
#include <functional>

#include "barcodelm/autodiff.hpp"

namespace barcodelm {

using ScalarLossFn = std::function<double(const NamedTensors<double>&)>;

// Compares the supplied analytic gradients against central finite
// differences at probe_count randomly chosen coordinates. The relative
// error uses a unit floor: |a - n| / max(1, |a|, |n|). loss_fn must be
// deterministic (dropout disabled).
double finite_difference_check(const ScalarLossFn& loss_fn, const NamedTensors<double>& params,
                               const NamedTensors<double>& analytic_grads, int probe_count,
                               double epsilon, std::uint64_t seed = 0);

}  // namespace barcodelm
