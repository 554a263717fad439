#pragma once

#include <string_view>

#include "cobra/model.hpp"
#include "cobra/ssm_model.hpp"

namespace cobra {

struct GradientSet {
  ModelParams grads;  // same structure and shapes as the parameters
  bool computed_in_double = true;
};

struct BackwardResult {
  double loss = 0.0;
  GradientSet gradients;
};

// Reverse-mode gradients of the mean cross-entropy with respect to every
// parameter tensor, including backpropagation through time over the scan
// recurrence. The returned loss is the identical forward value (same code
// path, bitwise). Throws GradientUnavailableError when the loss is
// non-finite; callers fall back to magnitude-only scoring.
BackwardResult backward(const ModelParams& params, const TokenBatch& batch);

class GradientUnavailableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Central finite difference (L(w+h) - L(w-h)) / 2h for a single scalar
// parameter, identified by tensor name and flat index. Verification oracle;
// always double precision.
double fd_gradient(const ModelParams& params, const TokenBatch& batch,
                   std::string_view tensor_name, std::size_t flat_index, double h);

}  // namespace cobra
