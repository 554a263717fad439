#pragma once

#include <cstddef>
#include <vector>

#include "cobra/model.hpp"

namespace cobra {

// A = -exp(A_log), elementwise. Strictly negative for finite input, which
// keeps the materialized transition stable. Throws std::domain_error on
// non-finite entries (faulted A_log values are decoded downstream and take
// the non-trapping path through the scan instead).
Tensor materialize_A(const Tensor& a_log);

struct ProjectedInputs {
  std::vector<double> b_raw;      // n
  std::vector<double> c_raw;      // n
  std::vector<double> delta_low;  // r
};

// p = W_proj^T u, split into consecutive (n, n, r) segments.
ProjectedInputs project_inputs(const std::vector<double>& u, const MambaBlockParams& block);

// delta = softplus(W_delta^T delta_low), elementwise, strictly positive.
// Uses the max(x,0) + log1p(exp(-|x|)) form so large magnitudes do not
// overflow.
std::vector<double> softplus_delta(const std::vector<double>& delta_low, const Tensor& w_delta);

double softplus(double x);
double sigmoid(double x);

// Sequential per-channel scan. x is T vectors of width c, b/c are T vectors
// of width n, delta is T vectors of width c. For channel j:
//   h <- (1 + delta[j] * A[j,:]) o h + delta[j] * b_t * x_t[j]
//   y_t[j] = c_t . h + D[j] * x_t[j]
// State starts at zero and the update runs before the readout. Non-finite
// values propagate; the scan never traps.
std::vector<std::vector<double>> ssm_scan(const std::vector<std::vector<double>>& x,
                                          const Tensor& a,
                                          const std::vector<std::vector<double>>& b_t,
                                          const std::vector<std::vector<double>>& c_t,
                                          const std::vector<std::vector<double>>& delta_t,
                                          const Tensor& d);

// Per-block intermediates captured during the forward pass, laid out
// [b * T + t] * width. Kept for backpropagation through time.
struct BlockTape {
  std::vector<double> resid_in;   // m, block input
  std::vector<double> inv_rms;    // 1, 1/rms of the norm input
  std::vector<double> xhat;       // m, normalized input
  std::vector<double> u;          // c, after W_in
  std::vector<double> v;          // c, after the optional conv (== u if off)
  std::vector<double> b_raw;      // n
  std::vector<double> c_raw;      // n
  std::vector<double> delta_low;  // r
  std::vector<double> delta_pre;  // c, before softplus
  std::vector<double> delta;      // c
  std::vector<double> h;          // c*n, state after the update at t
  std::vector<double> y;          // c, scan output
  std::vector<double> a_mat;      // c*n, materialized A for this block
};

struct ForwardTape {
  std::vector<BlockTape> blocks;
  std::vector<double> final_in;    // [b*T+t]*m, residual stream before final norm
  std::vector<double> final_inv_rms;
  std::vector<double> final_xhat;  // [b*T+t]*m
};

// Full forward pass: embed, then per block RMS-norm -> W_in -> (conv) ->
// project -> scan -> W_out -> residual add, then final RMS-norm and lm_head.
// Logits are laid out [b*T + t]*V. All arithmetic is double precision.
// Throws std::out_of_range for token ids outside [0, V).
std::vector<double> forward_logits(const ModelParams& params, const TokenBatch& batch,
                                   ForwardTape* tape = nullptr);

// Mean over all B*T positions of -log softmax(logits)[target], computed with
// max subtraction. Positions with NaN logits yield NaN; positions whose
// target has probability zero yield +inf. Faulted models are expected to
// produce such values, so nothing traps.
double cross_entropy(const std::vector<double>& logits, const TokenBatch& batch);

// Per-position negative log-likelihood (same conventions as cross_entropy).
double position_nll(const double* logits, std::size_t vocab, std::uint32_t target);

double perplexity(double mean_nll);

struct EvalPosition {
  std::size_t b = 0;
  std::size_t t = 0;
};

// Fraction of eval positions where argmax(logits) == target. Ties break to
// the lowest class index; any NaN logit makes the position count as
// incorrect. Throws std::invalid_argument on an empty position list.
double accuracy(const std::vector<double>& logits, const TokenBatch& batch,
                const std::vector<EvalPosition>& eval_positions);

std::vector<EvalPosition> all_positions(const TokenBatch& batch);
std::vector<EvalPosition> last_token_positions(const TokenBatch& batch);

inline constexpr double kRmsNormEps = 1e-6;

}  // namespace cobra
