#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "cobra/tensor.hpp"

namespace cobra {

struct ModelConfig {
  std::size_t vocab_size = 32;   // V
  std::size_t embed_dim = 16;    // m
  std::size_t inner_dim = 16;    // c
  std::size_t state_dim = 8;     // n
  std::size_t lowrank_dim = 4;   // r
  std::size_t num_blocks = 2;    // L
  bool conv_enabled = false;
  std::size_t conv_width = 4;
  std::uint64_t seed = 42;

  std::size_t proj_width() const { return 2 * state_dim + lowrank_dim; }
  void validate() const;  // throws std::invalid_argument on bad dims
};

struct MambaBlockParams {
  Tensor w_in;        // m x c
  Tensor w_proj;      // c x (2n + r)
  Tensor w_delta;     // r x c
  Tensor a_log;       // c x n, log parameterization of the transition
  Tensor d;           // c, skip coefficients
  Tensor w_out;       // c x m
  Tensor norm_scale;  // m
  Tensor conv_kernel; // c x conv_width, empty when conv is disabled
};

// All trainable tensors of the toy language model. Weights live in double
// precision here; storage formats are applied by the container layer.
struct ModelParams {
  ModelConfig config;
  Tensor embedding;         // V x m
  std::vector<MambaBlockParams> blocks;
  Tensor final_norm_scale;  // m
  Tensor lm_head;           // m x V

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  Tensor* find(std::string_view name);
  const Tensor* find(std::string_view name) const;

  std::size_t parameter_count() const;

  // Structurally identical copy with all values zeroed (gradient buffers).
  ModelParams zeros_like() const;
};

// Deterministic initialization: embedding and projections from
// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), A_log = log(uniform(0.5, 8)),
// D = 1, norm scales = 1. One splitmix64 stream, tensors filled in
// declaration order, entries row-major.
ModelParams init_params(const ModelConfig& config);

struct TokenBatch {
  std::size_t batch = 0;       // B
  std::size_t steps = 0;       // T
  std::vector<std::uint32_t> tokens;   // B*T input ids
  std::vector<std::uint32_t> targets;  // B*T next-token ids

  std::uint32_t token(std::size_t b, std::size_t t) const { return tokens[b * steps + t]; }
  std::uint32_t target(std::size_t b, std::size_t t) const { return targets[b * steps + t]; }
};

}  // namespace cobra
