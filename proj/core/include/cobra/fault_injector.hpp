#pragma once

#include <compare>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cobra/container.hpp"
#include "cobra/ssm_model.hpp"

namespace cobra {

// Canonical stand-in for non-finite losses so the search algorithms keep a
// total order; the raw non-finite value survives in reports.
inline constexpr double kSaturatedLoss = 1e9;

struct BitLocation {
  std::string layer_id;      // tensor name
  std::size_t weight_index = 0;  // flat row-major index
  int bit = 0;

  auto operator<=>(const BitLocation&) const = default;
};

// Duplicate-free set of bit locations kept in canonical
// (layer_id, weight_index, bit) order. Applying a FlipSet twice restores the
// model bit-exactly.
class FlipSet {
 public:
  FlipSet() = default;
  explicit FlipSet(std::vector<BitLocation> locations);  // sorts, dedupes

  const std::vector<BitLocation>& locations() const { return locations_; }
  std::size_t size() const { return locations_.size(); }
  bool empty() const { return locations_.empty(); }
  bool contains(const BitLocation& loc) const;

  std::string to_json() const;  // canonical order, array of {tensor,index,bit}
  static FlipSet from_json(const std::string& text);

 private:
  std::vector<BitLocation> locations_;
};

void save_flipset(const FlipSet& flips, const std::filesystem::path& path);
FlipSet load_flipset(const std::filesystem::path& path);

struct LossValue {
  double ordered = 0.0;  // saturated scale, totally ordered
  double raw = 0.0;      // may be inf or NaN
  bool finite = true;
};

LossValue make_loss_value(double raw_loss);

class BitAddressError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Immutable encoded model plus its decoded double view. bflip_loss calls
// share one context; each evaluation patches a private copy of the decoded
// weights, so the base is never written.
struct EvalContext {
  const EncodedModel* encoded = nullptr;
  ModelParams base_decoded;

  explicit EvalContext(const EncodedModel& enc)
      : encoded(&enc), base_decoded(decode_model(enc)) {}
};

void validate_location(const EncodedModel& enc, const BitLocation& loc);

// Decoded parameters with the given flips applied through the overlay.
ModelParams decode_with_flips(const EvalContext& ctx, std::span<const BitLocation> flips);

// Loss of the model with flips applied, evaluated on the calibration batch.
// The base model is unchanged afterwards. Result is invariant under
// permutation of the flip list (XOR commutes).
LossValue bflip_loss(const EvalContext& ctx, std::span<const BitLocation> flips,
                     const TokenBatch& batch);

// (loss_after - loss_before) / n_flips on the saturated scale.
// Throws std::invalid_argument when n_flips == 0.
double flip_efficiency(double loss_after, double loss_before, std::size_t n_flips);

// XORs the words in place. Applying the same set again restores the
// original. Used to export attacked checkpoints.
void apply_flips_destructive(EncodedModel& enc, const FlipSet& flips);

}  // namespace cobra
