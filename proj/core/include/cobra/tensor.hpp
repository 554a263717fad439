#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cobra {

enum class LayerType : int {
  kEmbedding = 0,
  kWIn = 1,
  kWProj = 2,
  kWDelta = 3,
  kALog = 4,
  kD = 5,
  kWOut = 6,
  kConv = 7,
  kNorm = 8,
  kLmHead = 9,
};

const char* layer_type_name(LayerType t);
LayerType layer_type_from_name(std::string_view name);  // throws std::invalid_argument

// Dense row-major tensor of doubles. The flat order of `values` is the
// canonical weight order used by bit addressing and the container format.
struct Tensor {
  std::string name;
  LayerType type = LayerType::kNorm;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::string name, LayerType type, std::vector<std::size_t> shape);

  std::size_t cardinality() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
};

// out[j] = sum_i w[i, j] * in[i].  Weights are stored (fan_in x fan_out) and
// applied transposed, matching the projection convention used throughout.
void matvec_transposed(const Tensor& w, const double* in, double* out);

}  // namespace cobra
