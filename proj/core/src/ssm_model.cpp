#include "cobra/ssm_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cobra {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// x_hat = x * g / rms(x), rms = sqrt(mean(x^2) + eps). Returns 1/rms.
double rms_normalize(const double* x, const double* scale, std::size_t m, double* out) {
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < m; ++i) sum_sq += x[i] * x[i];
  const double inv_rms = 1.0 / std::sqrt(sum_sq / static_cast<double>(m) + kRmsNormEps);
  for (std::size_t i = 0; i < m; ++i) out[i] = x[i] * inv_rms * scale[i];
  return inv_rms;
}

// -exp(A_log) without the finiteness check; faulted models carry Inf/NaN
// here and the scan must propagate them rather than trap.
std::vector<double> materialize_a_values(const Tensor& a_log) {
  std::vector<double> a(a_log.values.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = -std::exp(a_log.values[i]);
  return a;
}

}  // namespace

Tensor materialize_A(const Tensor& a_log) {
  for (double x : a_log.values) {
    if (!std::isfinite(x)) throw std::domain_error("materialize_A: non-finite A_log entry");
  }
  Tensor a = a_log;
  for (double& x : a.values) x = -std::exp(x);
  return a;
}

ProjectedInputs project_inputs(const std::vector<double>& u, const MambaBlockParams& block) {
  const std::size_t c = block.w_proj.rows();
  const std::size_t width = block.w_proj.cols();
  if (u.size() != c) throw std::invalid_argument("project_inputs: u has wrong length");

  std::vector<double> p(width);
  matvec_transposed(block.w_proj, u.data(), p.data());

  const std::size_t n = (width - block.w_delta.rows()) / 2;
  const std::size_t r = block.w_delta.rows();
  ProjectedInputs out;
  out.b_raw.assign(p.begin(), p.begin() + n);
  out.c_raw.assign(p.begin() + n, p.begin() + 2 * n);
  out.delta_low.assign(p.begin() + 2 * n, p.begin() + 2 * n + r);
  return out;
}

double softplus(double x) {
  if (std::isnan(x)) return x;
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> softplus_delta(const std::vector<double>& delta_low, const Tensor& w_delta) {
  if (delta_low.size() != w_delta.rows()) {
    throw std::invalid_argument("softplus_delta: delta_low has wrong length");
  }
  std::vector<double> pre(w_delta.cols());
  matvec_transposed(w_delta, delta_low.data(), pre.data());
  for (double& x : pre) x = softplus(x);
  return pre;
}

std::vector<std::vector<double>> ssm_scan(const std::vector<std::vector<double>>& x,
                                          const Tensor& a,
                                          const std::vector<std::vector<double>>& b_t,
                                          const std::vector<std::vector<double>>& c_t,
                                          const std::vector<std::vector<double>>& delta_t,
                                          const Tensor& d) {
  const std::size_t steps = x.size();
  const std::size_t c = a.rows();
  const std::size_t n = a.cols();

  std::vector<std::vector<double>> y(steps, std::vector<double>(c, 0.0));
  std::vector<double> h(c * n, 0.0);

  for (std::size_t t = 0; t < steps; ++t) {
    const std::vector<double>& xt = x[t];
    const std::vector<double>& bt = b_t[t];
    const std::vector<double>& ct = c_t[t];
    const std::vector<double>& dt = delta_t[t];
    for (std::size_t j = 0; j < c; ++j) {
      const double dj = dt[j];
      const double inj = dj * xt[j];
      const double* aj = a.values.data() + j * n;
      double* hj = h.data() + j * n;
      double dot = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        hj[s] = (1.0 + dj * aj[s]) * hj[s] + inj * bt[s];
        dot += ct[s] * hj[s];
      }
      y[t][j] = dot + d.values[j] * xt[j];
    }
  }
  return y;
}

std::vector<double> forward_logits(const ModelParams& params, const TokenBatch& batch,
                                   ForwardTape* tape) {
  const ModelConfig& cfg = params.config;
  const std::size_t m = cfg.embed_dim;
  const std::size_t c = cfg.inner_dim;
  const std::size_t n = cfg.state_dim;
  const std::size_t r = cfg.lowrank_dim;
  const std::size_t vocab = cfg.vocab_size;
  const std::size_t big_t = batch.steps;
  const std::size_t big_b = batch.batch;
  const std::size_t positions = big_b * big_t;
  const std::size_t width = cfg.proj_width();

  for (std::uint32_t id : batch.tokens) {
    if (id >= vocab) throw std::out_of_range("forward_logits: token id out of range");
  }

  if (tape) {
    tape->blocks.assign(cfg.num_blocks, BlockTape{});
    for (BlockTape& bt : tape->blocks) {
      bt.resid_in.assign(positions * m, 0.0);
      bt.inv_rms.assign(positions, 0.0);
      bt.xhat.assign(positions * m, 0.0);
      bt.u.assign(positions * c, 0.0);
      bt.v.assign(positions * c, 0.0);
      bt.b_raw.assign(positions * n, 0.0);
      bt.c_raw.assign(positions * n, 0.0);
      bt.delta_low.assign(positions * r, 0.0);
      bt.delta_pre.assign(positions * c, 0.0);
      bt.delta.assign(positions * c, 0.0);
      bt.h.assign(positions * c * n, 0.0);
      bt.y.assign(positions * c, 0.0);
    }
    tape->final_in.assign(positions * m, 0.0);
    tape->final_inv_rms.assign(positions, 0.0);
    tape->final_xhat.assign(positions * m, 0.0);
  }

  // Residual stream, one sequence at a time.
  std::vector<double> resid(big_t * m);
  std::vector<double> xhat(m), u(c), v(c), p(width), delta_pre(c), delta(c);
  std::vector<double> h(c * n);
  std::vector<double> y(big_t * c), o(m);
  std::vector<double> logits(positions * vocab, 0.0);

  std::vector<std::vector<double>> a_per_block(cfg.num_blocks);
  for (std::size_t l = 0; l < cfg.num_blocks; ++l) {
    a_per_block[l] = materialize_a_values(params.blocks[l].a_log);
    if (tape) tape->blocks[l].a_mat = a_per_block[l];
  }

  for (std::size_t b = 0; b < big_b; ++b) {
    for (std::size_t t = 0; t < big_t; ++t) {
      const std::uint32_t id = batch.token(b, t);
      const double* row = params.embedding.values.data() + id * m;
      std::copy(row, row + m, resid.data() + t * m);
    }

    for (std::size_t l = 0; l < cfg.num_blocks; ++l) {
      const MambaBlockParams& blk = params.blocks[l];
      const std::vector<double>& a = a_per_block[l];
      BlockTape* bt = tape ? &tape->blocks[l] : nullptr;

      std::fill(h.begin(), h.end(), 0.0);
      // Window of u columns for the causal conv.
      std::vector<double> u_hist;
      if (cfg.conv_enabled) u_hist.assign(big_t * c, 0.0);

      for (std::size_t t = 0; t < big_t; ++t) {
        const std::size_t pos = b * big_t + t;
        double* e = resid.data() + t * m;

        const double inv_rms = rms_normalize(e, blk.norm_scale.values.data(), m, xhat.data());
        matvec_transposed(blk.w_in, xhat.data(), u.data());

        if (cfg.conv_enabled) {
          std::copy(u.begin(), u.end(), u_hist.begin() + t * c);
          const std::size_t w = cfg.conv_width;
          for (std::size_t j = 0; j < c; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < w; ++k) {
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) -
                                         static_cast<std::ptrdiff_t>(w - 1 - k);
              if (src >= 0) acc += blk.conv_kernel.at(j, k) * u_hist[src * c + j];
            }
            v[j] = acc;
          }
        } else {
          v = u;
        }

        matvec_transposed(blk.w_proj, v.data(), p.data());
        const double* b_raw = p.data();
        const double* c_raw = p.data() + n;
        const double* dlow = p.data() + 2 * n;

        matvec_transposed(blk.w_delta, dlow, delta_pre.data());
        for (std::size_t j = 0; j < c; ++j) delta[j] = softplus(delta_pre[j]);

        for (std::size_t j = 0; j < c; ++j) {
          const double dj = delta[j];
          const double inj = dj * v[j];
          const double* aj = a.data() + j * n;
          double* hj = h.data() + j * n;
          double dot = 0.0;
          for (std::size_t s = 0; s < n; ++s) {
            hj[s] = (1.0 + dj * aj[s]) * hj[s] + inj * b_raw[s];
            dot += c_raw[s] * hj[s];
          }
          y[t * c + j] = dot + blk.d.values[j] * v[j];
        }

        if (bt) {
          std::copy(e, e + m, bt->resid_in.data() + pos * m);
          bt->inv_rms[pos] = inv_rms;
          std::copy(xhat.begin(), xhat.end(), bt->xhat.data() + pos * m);
          std::copy(u.begin(), u.end(), bt->u.data() + pos * c);
          std::copy(v.begin(), v.end(), bt->v.data() + pos * c);
          std::copy(b_raw, b_raw + n, bt->b_raw.data() + pos * n);
          std::copy(c_raw, c_raw + n, bt->c_raw.data() + pos * n);
          std::copy(dlow, dlow + r, bt->delta_low.data() + pos * r);
          std::copy(delta_pre.begin(), delta_pre.end(), bt->delta_pre.data() + pos * c);
          std::copy(delta.begin(), delta.end(), bt->delta.data() + pos * c);
          std::copy(h.begin(), h.end(), bt->h.data() + pos * c * n);
          std::copy(y.begin() + t * c, y.begin() + (t + 1) * c, bt->y.data() + pos * c);
        }

        matvec_transposed(blk.w_out, y.data() + t * c, o.data());
        for (std::size_t i = 0; i < m; ++i) e[i] += o[i];
      }
    }

    for (std::size_t t = 0; t < big_t; ++t) {
      const std::size_t pos = b * big_t + t;
      double* e = resid.data() + t * m;
      const double inv_rms =
          rms_normalize(e, params.final_norm_scale.values.data(), m, xhat.data());
      matvec_transposed(params.lm_head, xhat.data(), logits.data() + pos * vocab);
      if (tape) {
        std::copy(e, e + m, tape->final_in.data() + pos * m);
        tape->final_inv_rms[pos] = inv_rms;
        std::copy(xhat.begin(), xhat.end(), tape->final_xhat.data() + pos * m);
      }
    }
  }
  return logits;
}

double position_nll(const double* logits, std::size_t vocab, std::uint32_t target) {
  bool any_nan = false;
  std::size_t inf_count = 0;
  double max_finite = -kInf;
  for (std::size_t v = 0; v < vocab; ++v) {
    const double x = logits[v];
    if (std::isnan(x)) { any_nan = true; break; }
    if (x == kInf) { ++inf_count; continue; }
    max_finite = std::max(max_finite, x);
  }
  if (any_nan) return std::numeric_limits<double>::quiet_NaN();
  if (inf_count > 0) {
    // All probability mass sits on the +inf logits.
    if (logits[target] == kInf) return std::log(static_cast<double>(inf_count));
    return kInf;
  }
  if (max_finite == -kInf) return std::numeric_limits<double>::quiet_NaN();

  double sum = 0.0;
  for (std::size_t v = 0; v < vocab; ++v) sum += std::exp(logits[v] - max_finite);
  return std::log(sum) - (logits[target] - max_finite);
}

double cross_entropy(const std::vector<double>& logits, const TokenBatch& batch) {
  const std::size_t positions = batch.batch * batch.steps;
  const std::size_t vocab = logits.size() / positions;
  double total = 0.0;
  for (std::size_t pos = 0; pos < positions; ++pos) {
    total += position_nll(logits.data() + pos * vocab, vocab, batch.targets[pos]);
  }
  return total / static_cast<double>(positions);
}

double perplexity(double mean_nll) { return std::exp(mean_nll); }

double accuracy(const std::vector<double>& logits, const TokenBatch& batch,
                const std::vector<EvalPosition>& eval_positions) {
  if (eval_positions.empty()) throw std::invalid_argument("accuracy: no eval positions");
  const std::size_t positions = batch.batch * batch.steps;
  const std::size_t vocab = logits.size() / positions;

  std::size_t correct = 0;
  for (const EvalPosition& ep : eval_positions) {
    const std::size_t pos = ep.b * batch.steps + ep.t;
    const double* row = logits.data() + pos * vocab;
    bool any_nan = false;
    std::size_t best = 0;
    for (std::size_t v = 0; v < vocab; ++v) {
      if (std::isnan(row[v])) { any_nan = true; break; }
      if (row[v] > row[best]) best = v;  // strict: ties keep the lowest index
    }
    if (!any_nan && best == batch.target(ep.b, ep.t)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(eval_positions.size());
}

std::vector<EvalPosition> all_positions(const TokenBatch& batch) {
  std::vector<EvalPosition> out;
  out.reserve(batch.batch * batch.steps);
  for (std::size_t b = 0; b < batch.batch; ++b) {
    for (std::size_t t = 0; t < batch.steps; ++t) out.push_back({b, t});
  }
  return out;
}

std::vector<EvalPosition> last_token_positions(const TokenBatch& batch) {
  std::vector<EvalPosition> out;
  out.reserve(batch.batch);
  for (std::size_t b = 0; b < batch.batch; ++b) out.push_back({b, batch.steps - 1});
  return out;
}

}  // namespace cobra
