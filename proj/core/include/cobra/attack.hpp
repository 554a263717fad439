#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "cobra/container.hpp"
#include "cobra/corpus.hpp"
#include "cobra/sensitivity.hpp"
#include "cobra/subset_optimizer.hpp"

namespace cobra {

struct TrainSettings {
  std::size_t steps = 2000;
  double learning_rate = 0.5;
  double grad_clip_norm = 1.0;  // <= 0 disables clipping
};

struct EvalSettings {
  std::size_t calibration_sequences = 8;
  std::size_t heldout_sequences = 128;
};

struct ModeFlags {
  bool gradient_free = false;     // forces alpha = 0, no backward pass
  std::size_t graybox_last = 0;   // > 0 restricts visibility to the last k blocks
};

// Everything needed to reproduce a run byte-for-byte.
struct RunConfig {
  ModelConfig model;
  StorageKind format = StorageKind::kFp16;
  CorpusSpec corpus;
  TrainSettings train;
  SensitivityConfig sensitivity;
  ReductionConfig reduction;
  EvalSettings eval;
  ModeFlags mode;

  std::string to_json() const;             // stable key order
  static RunConfig from_json(const std::string& text);
  std::string digest() const;              // crc64 of the canonical JSON
};

struct Metrics {
  double loss = 0.0;        // raw; may be inf or NaN after an attack
  double perplexity = 0.0;  // raw
  double accuracy = 0.0;    // last-token
  bool finite = true;
};

struct AttackReport {
  std::string config_digest;
  std::string run_config_json;
  Metrics baseline;
  Metrics post_attack;
  std::vector<LayerSensitivityRecord> sensitivity_records;
  std::vector<BitLocation> initial_subset;   // I_init fed to the optimizer
  bool threshold_reached = false;
  std::vector<double> cutoff_losses;         // loss after each added flip
  std::vector<BitLocation> reduced_subset;   // I_red
  std::vector<TraceEntry> trace;
  double attack_loss_initial = 0.0;          // L_orig, saturated scale
  double attack_loss_final = 0.0;            // loss(I_red), saturated scale
  bool final_loss_finite = true;
  double alpha_used = 0.0;
  std::size_t flip_count = 0;
  std::size_t total_bits = 0;
  double flipped_bit_fraction = 0.0;
  double train_seconds = 0.0;   // timing fields; excluded from reproducibility
  double attack_seconds = 0.0;

  // Stable key order; non-finite numbers serialize as "inf"/"nan" strings
  // next to a raw-flag field. `include_timings = false` gives the
  // reproducibility view.
  std::string to_json(bool include_timings = true) const;
};

// ---- Command layer (shared by the CLI and the tests) ----

struct GenerateOutcome {
  EncodedModel model;
  std::size_t parameter_count = 0;
  std::size_t total_bits = 0;
};

GenerateOutcome generate_model(const ModelConfig& config, StorageKind format);

struct TrainOutcome {
  EncodedModel model;
  std::vector<double> loss_curve;  // training loss per step (before each update)
  double final_loss = 0.0;         // loss of the re-encoded model on the train batch
};

// Full-batch gradient descent on the decoded weights (double precision),
// re-encoded into the model's storage format at the end. Deterministic.
TrainOutcome train_model(const EncodedModel& victim, const CorpusSpec& corpus,
                         const TrainSettings& settings, std::ostream* log = nullptr);

struct AttackOutcome {
  AttackReport report;
  EncodedModel attacked_model;
  FlipSet flips;
};

// The full pipeline: hybrid scores -> layer ranking -> initial-subset cutoff
// on the top layer -> exclusionary reduction -> before/after evaluation on
// the held-out batch.
AttackOutcome run_attack(const EncodedModel& victim, const RunConfig& cfg,
                         std::ostream* log = nullptr);

Metrics evaluate_model(const EncodedModel& model, const CorpusSpec& corpus,
                       std::size_t heldout_sequences);

// Atomic write (temp file + rename).
void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string metrics_to_json(const Metrics& m);

// Subset-cutoff curve behind the initial-subset selection (n_flips, loss).
std::string cutoff_csv(const std::vector<double>& losses);

}  // namespace cobra
