#include "cobra/tensor.hpp"

#include <stdexcept>
#include <string>

namespace cobra {

const char* layer_type_name(LayerType t) {
  switch (t) {
    case LayerType::kEmbedding: return "embedding";
    case LayerType::kWIn: return "W_in";
    case LayerType::kWProj: return "W_proj";
    case LayerType::kWDelta: return "W_delta";
    case LayerType::kALog: return "A_log";
    case LayerType::kD: return "D";
    case LayerType::kWOut: return "W_out";
    case LayerType::kConv: return "conv";
    case LayerType::kNorm: return "norm";
    case LayerType::kLmHead: return "lm_head";
  }
  return "unknown";
}

LayerType layer_type_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(LayerType::kLmHead); ++i) {
    const auto t = static_cast<LayerType>(i);
    if (name == layer_type_name(t)) return t;
  }
  throw std::invalid_argument("unknown layer type: " + std::string(name));
}

Tensor::Tensor(std::string name, LayerType type, std::vector<std::size_t> shape)
    : name(std::move(name)), type(type), shape(std::move(shape)) {
  values.assign(cardinality(), 0.0);
}

void matvec_transposed(const Tensor& w, const double* in, double* out) {
  const std::size_t rows = w.rows();
  const std::size_t cols = w.cols();
  for (std::size_t j = 0; j < cols; ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double xi = in[i];
    const double* row = w.values.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += row[j] * xi;
  }
}

}  // namespace cobra
