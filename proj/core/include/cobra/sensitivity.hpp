#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cobra/fault_injector.hpp"

namespace cobra {

struct VisibleLayers {
  enum class Mode { kAll, kLastBlocks, kExplicit };
  Mode mode = Mode::kAll;
  std::size_t last_k = 0;                 // kLastBlocks
  std::vector<std::string> names;         // kExplicit
};

struct SensitivityConfig {
  double alpha = 0.5;            // gradient/magnitude trade-off
  double rate_percent = 0.1;     // sub-sampling rate r, in percent
  std::size_t top_n_layers = 3;
  double loss_threshold = 10.0;
  VisibleLayers visible;
  bool include_norm = false;     // norm scales are not attack targets by default
  int bit_pos_override = -1;     // <0 means format-default MSB
};

struct LayerSensitivityRecord {
  std::string layer_id;
  LayerType type = LayerType::kNorm;
  std::size_t k_used = 0;
  LossValue loss_after_flips;
  double efficiency = 0.0;
  std::vector<std::size_t> selected_indices;  // descending score order
  int bit = 0;
};

// S = alpha * |gradW| + (1 - alpha) * |W| elementwise. gradW may be null
// only when alpha == 0; otherwise std::invalid_argument.
std::vector<double> hybrid_score(const std::vector<double>& weights,
                                 const std::vector<double>* grads, double alpha);

// k = floor(cardinality * r / 100), clamped to at least 1 so tiny layers are
// never skipped.
std::size_t topk_count(std::size_t cardinality, double rate_percent);

// Indices of the k largest scores, descending; ties break to the lower flat
// index. k beyond the cardinality returns everything.
// Throws std::invalid_argument on an empty score vector.
std::vector<std::size_t> select_topk(const std::vector<double>& scores, std::size_t k);

// Loss of flipping `bit` at the given flat indices of one layer. Production
// wraps bflip_loss; tests inject synthetic values.
using LayerLossFn = std::function<LossValue(const std::string& layer_id,
                                            const std::vector<std::size_t>& indices, int bit)>;

struct RankingResult {
  std::vector<LayerSensitivityRecord> records;  // sorted by loss desc, layer_id asc
  std::vector<BitLocation> initial_union;       // top_n_layers records, record order
  double baseline_loss = 0.0;
};

struct RankedLayer {
  std::string layer_id;
  LayerType type = LayerType::kNorm;
  std::vector<double> weights;           // decoded |W| source
  const std::vector<double>* grads = nullptr;  // may be null in alpha=0 mode
};

// Core of the layer ranking: scores each visible layer, flips its top-k bits
// at the target position, measures the loss, and sorts. Exposed with an
// injectable loss function so the sorting contract is testable in isolation.
RankingResult rank_layers_core(const std::vector<RankedLayer>& layers,
                               const SensitivityConfig& cfg, int default_bit,
                               double baseline_loss, const LayerLossFn& loss_fn);

// Production entry point: builds the layer list from the encoded model (and
// gradients when alpha > 0) and evaluates through bflip_loss on the
// calibration batch. Throws std::invalid_argument when the visibility filter
// leaves nothing to rank.
RankingResult rank_layers(const EvalContext& ctx, const ModelParams* grads,
                          const SensitivityConfig& cfg, const TokenBatch& batch);

bool layer_visible(const std::string& name, std::size_t num_blocks, const VisibleLayers& vis);

struct InitialSubset {
  std::vector<BitLocation> flips;       // ordered by descending score
  std::vector<double> prefix_losses;    // measured loss after each added flip
  std::size_t crossing_size = 0;        // first prefix with loss >= threshold
  bool threshold_reached = false;
  LossValue final_loss;
};

using PrefixLossFn = std::function<LossValue(std::span<const BitLocation>)>;

// Incremental cutoff procedure over one layer's candidates, ordered by
// descending score: add one flip at a time until the loss crosses the
// threshold, then extend to the conservative operating point — the smallest
// prefix with loss >= 2*threshold, capped at crossing size + 3. When the
// threshold is unreachable within the candidates, returns the best prefix
// with threshold_reached = false.
InitialSubset select_initial_subset(const std::vector<BitLocation>& candidates,
                                    const SensitivityConfig& cfg,
                                    const PrefixLossFn& loss_fn);

std::string layer_sensitivity_csv(const std::vector<LayerSensitivityRecord>& records);

}  // namespace cobra
