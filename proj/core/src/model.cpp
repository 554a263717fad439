#include "cobra/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cobra/rng.hpp"

namespace cobra {

void ModelConfig::validate() const {
  if (vocab_size < 1 || embed_dim < 1 || inner_dim < 1 || state_dim < 1 ||
      lowrank_dim < 1 || num_blocks < 1) {
    throw std::invalid_argument("model dimensions must all be >= 1");
  }
  if (conv_enabled && conv_width < 1) {
    throw std::invalid_argument("conv_width must be >= 1 when conv is enabled");
  }
}

namespace {

std::string block_tensor_name(std::size_t block, const char* suffix) {
  return "blocks." + std::to_string(block) + "." + suffix;
}

void fill_uniform(Tensor& t, Rng& rng, double bound) {
  for (double& v : t.values) v = rng.uniform(-bound, bound);
}

}  // namespace

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  const std::size_t v = config.vocab_size;
  const std::size_t m = config.embed_dim;
  const std::size_t c = config.inner_dim;
  const std::size_t n = config.state_dim;
  const std::size_t r = config.lowrank_dim;

  ModelParams p;
  p.config = config;
  Rng rng(config.seed);

  p.embedding = Tensor("embedding", LayerType::kEmbedding, {v, m});
  fill_uniform(p.embedding, rng, 1.0 / std::sqrt(static_cast<double>(m)));

  p.blocks.resize(config.num_blocks);
  for (std::size_t l = 0; l < config.num_blocks; ++l) {
    MambaBlockParams& b = p.blocks[l];
    b.w_in = Tensor(block_tensor_name(l, "W_in"), LayerType::kWIn, {m, c});
    fill_uniform(b.w_in, rng, 1.0 / std::sqrt(static_cast<double>(m)));

    b.w_proj = Tensor(block_tensor_name(l, "W_proj"), LayerType::kWProj, {c, config.proj_width()});
    fill_uniform(b.w_proj, rng, 1.0 / std::sqrt(static_cast<double>(c)));

    b.w_delta = Tensor(block_tensor_name(l, "W_delta"), LayerType::kWDelta, {r, c});
    fill_uniform(b.w_delta, rng, 1.0 / std::sqrt(static_cast<double>(r)));

    b.a_log = Tensor(block_tensor_name(l, "A_log"), LayerType::kALog, {c, n});
    for (double& x : b.a_log.values) x = std::log(rng.uniform(0.5, 8.0));

    b.d = Tensor(block_tensor_name(l, "D"), LayerType::kD, {c});
    for (double& x : b.d.values) x = 1.0;

    b.w_out = Tensor(block_tensor_name(l, "W_out"), LayerType::kWOut, {c, m});
    fill_uniform(b.w_out, rng, 1.0 / std::sqrt(static_cast<double>(c)));

    b.norm_scale = Tensor(block_tensor_name(l, "norm"), LayerType::kNorm, {m});
    for (double& x : b.norm_scale.values) x = 1.0;

    if (config.conv_enabled) {
      b.conv_kernel = Tensor(block_tensor_name(l, "conv"), LayerType::kConv, {c, config.conv_width});
      fill_uniform(b.conv_kernel, rng, 1.0 / std::sqrt(static_cast<double>(config.conv_width)));
    }
  }

  p.final_norm_scale = Tensor("final_norm", LayerType::kNorm, {m});
  for (double& x : p.final_norm_scale.values) x = 1.0;

  p.lm_head = Tensor("lm_head", LayerType::kLmHead, {m, v});
  fill_uniform(p.lm_head, rng, 1.0 / std::sqrt(static_cast<double>(m)));

  return p;
}

std::vector<Tensor*> ModelParams::tensors() {
  std::vector<Tensor*> out;
  out.push_back(&embedding);
  for (MambaBlockParams& b : blocks) {
    out.push_back(&b.w_in);
    out.push_back(&b.w_proj);
    out.push_back(&b.w_delta);
    out.push_back(&b.a_log);
    out.push_back(&b.d);
    out.push_back(&b.w_out);
    out.push_back(&b.norm_scale);
    if (!b.conv_kernel.values.empty()) out.push_back(&b.conv_kernel);
  }
  out.push_back(&final_norm_scale);
  out.push_back(&lm_head);
  return out;
}

std::vector<const Tensor*> ModelParams::tensors() const {
  auto* self = const_cast<ModelParams*>(this);
  std::vector<Tensor*> mut = self->tensors();
  return {mut.begin(), mut.end()};
}

Tensor* ModelParams::find(std::string_view name) {
  for (Tensor* t : tensors()) {
    if (t->name == name) return t;
  }
  return nullptr;
}

const Tensor* ModelParams::find(std::string_view name) const {
  return const_cast<ModelParams*>(this)->find(name);
}

std::size_t ModelParams::parameter_count() const {
  std::size_t total = 0;
  for (const Tensor* t : tensors()) total += t->cardinality();
  return total;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for (Tensor* t : z.tensors()) {
    t->values.assign(t->values.size(), 0.0);
  }
  return z;
}

}  // namespace cobra
