#pragma once

#include <cstdint>

#include "cobra/model.hpp"
#include "cobra/rng.hpp"

namespace cobra {

// Synthetic order-2 Markov corpus. For every context (a, b) the chain puts
// peak_prob on one preferred next token and spreads the rest uniformly.
// Preferred tokens follow a seeded permutation of the most recent token for
// most contexts; an order2_fraction of contexts instead key on both tokens,
// so the chain is not reducible to a bigram.
struct CorpusSpec {
  std::size_t vocab = 32;
  std::uint64_t transition_seed = 7;
  std::size_t num_sequences = 64;
  std::size_t seq_len = 25;  // tokens per sequence; batches use seq_len - 1 steps
  double peak_prob = 0.95;
  double order2_fraction = 0.15;
};

class MarkovChain {
 public:
  explicit MarkovChain(const CorpusSpec& spec);

  std::uint32_t preferred(std::uint32_t prev2, std::uint32_t prev1) const;
  std::uint32_t sample_next(std::uint32_t prev2, std::uint32_t prev1, Rng& rng) const;

  // True conditional probability of `next`; used by tests to bound the
  // achievable loss.
  double prob(std::uint32_t prev2, std::uint32_t prev1, std::uint32_t next) const;

  const CorpusSpec& spec() const { return spec_; }

 private:
  CorpusSpec spec_;
  std::vector<std::uint32_t> preferred_;       // V*V
  std::vector<std::uint32_t> recency_perm_;    // V
  std::vector<std::uint32_t> pair_perm_;       // V
  std::vector<std::uint8_t> order2_mask_;      // V*V
};

// Sequences sampled with the given stream seed; inputs are tokens [0, T) and
// targets are tokens [1, T]. Different stream seeds give disjoint batches in
// distribution (training, calibration and held-out use distinct streams).
TokenBatch sample_batch(const MarkovChain& chain, std::size_t num_sequences,
                        std::size_t seq_len, std::uint64_t stream_seed);

// Stream seeds derived from the corpus transition seed.
std::uint64_t train_stream_seed(const CorpusSpec& spec);
std::uint64_t calibration_stream_seed(const CorpusSpec& spec);
std::uint64_t heldout_stream_seed(const CorpusSpec& spec);

}  // namespace cobra
