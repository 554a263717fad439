#include "cobra/grad_engine.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cobra {

namespace {

// de and dg for x_hat = e * g / rms(e), given dxhat and the saved 1/rms.
void rms_norm_backward(const double* e, const double* g, double inv_rms, const double* dxhat,
                       std::size_t m, double* de, double* dg) {
  double dot = 0.0;
  for (std::size_t i = 0; i < m; ++i) dot += dxhat[i] * g[i] * e[i];
  const double k = dot * inv_rms * inv_rms * inv_rms / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    dg[i] += dxhat[i] * e[i] * inv_rms;
    de[i] += dxhat[i] * g[i] * inv_rms - e[i] * k;
  }
}

}  // namespace

BackwardResult backward(const ModelParams& params, const TokenBatch& batch) {
  const ModelConfig& cfg = params.config;
  const std::size_t m = cfg.embed_dim;
  const std::size_t c = cfg.inner_dim;
  const std::size_t n = cfg.state_dim;
  const std::size_t r = cfg.lowrank_dim;
  const std::size_t vocab = cfg.vocab_size;
  const std::size_t big_t = batch.steps;
  const std::size_t big_b = batch.batch;
  const std::size_t positions = big_b * big_t;

  ForwardTape tape;
  const std::vector<double> logits = forward_logits(params, batch, &tape);
  const double loss = cross_entropy(logits, batch);
  if (!std::isfinite(loss)) {
    throw GradientUnavailableError("backward: non-finite loss, gradients unavailable");
  }

  BackwardResult result;
  result.loss = loss;
  result.gradients.grads = params.zeros_like();
  ModelParams& g = result.gradients.grads;

  // dL/dlogits = (softmax - onehot) / positions.
  std::vector<double> dlogits(positions * vocab);
  const double inv_positions = 1.0 / static_cast<double>(positions);
  std::vector<double> probs(vocab);
  for (std::size_t pos = 0; pos < positions; ++pos) {
    const double* row = logits.data() + pos * vocab;
    double mx = row[0];
    for (std::size_t v = 1; v < vocab; ++v) mx = std::max(mx, row[v]);
    double sum = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) {
      probs[v] = std::exp(row[v] - mx);
      sum += probs[v];
    }
    double* drow = dlogits.data() + pos * vocab;
    for (std::size_t v = 0; v < vocab; ++v) drow[v] = probs[v] / sum * inv_positions;
    drow[batch.targets[pos]] -= inv_positions;
  }

  // Final norm and lm_head.
  std::vector<double> dresid(positions * m, 0.0);
  std::vector<double> dxhat(m);
  for (std::size_t pos = 0; pos < positions; ++pos) {
    const double* drow = dlogits.data() + pos * vocab;
    const double* xhat = tape.final_xhat.data() + pos * m;
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      const double* head_row = params.lm_head.values.data() + i * vocab;
      double* ghead_row = g.lm_head.values.data() + i * vocab;
      for (std::size_t v = 0; v < vocab; ++v) {
        acc += head_row[v] * drow[v];
        ghead_row[v] += xhat[i] * drow[v];
      }
      dxhat[i] = acc;
    }
    rms_norm_backward(tape.final_in.data() + pos * m, params.final_norm_scale.values.data(),
                      tape.final_inv_rms[pos], dxhat.data(), m, dresid.data() + pos * m,
                      g.final_norm_scale.values.data());
  }

  // Blocks in reverse.
  std::vector<double> dy(positions * c), dv(positions * c), du(positions * c);
  std::vector<double> db_raw(positions * n), dc_raw(positions * n);
  std::vector<double> ddlow(positions * r), ddelta(positions * c);
  std::vector<double> dh(n);

  for (std::size_t l_plus = cfg.num_blocks; l_plus > 0; --l_plus) {
    const std::size_t l = l_plus - 1;
    const MambaBlockParams& blk = params.blocks[l];
    MambaBlockParams& gb = g.blocks[l];
    const BlockTape& bt = tape.blocks[l];

    std::fill(dy.begin(), dy.end(), 0.0);
    std::fill(dv.begin(), dv.end(), 0.0);
    std::fill(du.begin(), du.end(), 0.0);
    std::fill(db_raw.begin(), db_raw.end(), 0.0);
    std::fill(dc_raw.begin(), dc_raw.end(), 0.0);
    std::fill(ddlow.begin(), ddlow.end(), 0.0);
    std::fill(ddelta.begin(), ddelta.end(), 0.0);

    // W_out: o = W_out^T y, e' = e + o. The incoming dresid is d(e').
    for (std::size_t pos = 0; pos < positions; ++pos) {
      const double* do_ = dresid.data() + pos * m;
      const double* y = bt.y.data() + pos * c;
      double* dy_pos = dy.data() + pos * c;
      for (std::size_t j = 0; j < c; ++j) {
        const double* wrow = blk.w_out.values.data() + j * m;
        double* gwrow = gb.w_out.values.data() + j * m;
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          acc += wrow[i] * do_[i];
          gwrow[i] += y[j] * do_[i];
        }
        dy_pos[j] = acc;
      }
    }

    // Backpropagation through time, per sequence and channel.
    for (std::size_t b = 0; b < big_b; ++b) {
      for (std::size_t j = 0; j < c; ++j) {
        const double* aj = bt.a_mat.data() + j * n;
        std::fill(dh.begin(), dh.end(), 0.0);
        for (std::size_t t_plus = big_t; t_plus > 0; --t_plus) {
          const std::size_t t = t_plus - 1;
          const std::size_t pos = b * big_t + t;
          const double* h_t = bt.h.data() + pos * c * n + j * n;
          const double* h_prev =
              t > 0 ? bt.h.data() + (pos - 1) * c * n + j * n : nullptr;
          const double* braw = bt.b_raw.data() + pos * n;
          const double* craw = bt.c_raw.data() + pos * n;
          const double delta_j = bt.delta[pos * c + j];
          const double v_j = bt.v[pos * c + j];
          const double dy_j = dy[pos * c + j];

          // y_t[j] = craw . h_t + D[j] * v_t[j]
          gb.d.values[j] += dy_j * v_j;
          dv[pos * c + j] += dy_j * blk.d.values[j];
          for (std::size_t s = 0; s < n; ++s) {
            dc_raw[pos * n + s] += dy_j * h_t[s];
            dh[s] += dy_j * craw[s];
          }

          // h_t = (1 + delta A) h_prev + delta v braw
          double ddelta_acc = 0.0;
          double dv_acc = 0.0;
          for (std::size_t s = 0; s < n; ++s) {
            const double hp = h_prev ? h_prev[s] : 0.0;
            ddelta_acc += dh[s] * (aj[s] * hp + v_j * braw[s]);
            // dA flows into A_log as dA * A (A = -exp(A_log)).
            gb.a_log.values[j * n + s] += dh[s] * delta_j * hp * aj[s];
            db_raw[pos * n + s] += dh[s] * delta_j * v_j;
            dv_acc += dh[s] * braw[s];
            dh[s] *= 1.0 + delta_j * aj[s];
          }
          ddelta[pos * c + j] += ddelta_acc;
          dv[pos * c + j] += dv_acc * delta_j;
        }
      }
    }

    // delta = softplus(pre), pre = W_delta^T dlow.
    for (std::size_t pos = 0; pos < positions; ++pos) {
      const double* pre = bt.delta_pre.data() + pos * c;
      const double* dlow = bt.delta_low.data() + pos * r;
      double* ddlow_pos = ddlow.data() + pos * r;
      for (std::size_t j = 0; j < c; ++j) {
        const double dpre = ddelta[pos * c + j] * sigmoid(pre[j]);
        for (std::size_t k = 0; k < r; ++k) {
          gb.w_delta.values[k * c + j] += dlow[k] * dpre;
          ddlow_pos[k] += blk.w_delta.values[k * c + j] * dpre;
        }
      }
    }

    // p = W_proj^T v with p = (b_raw, c_raw, dlow).
    const std::size_t width = cfg.proj_width();
    std::vector<double> dp(width);
    for (std::size_t pos = 0; pos < positions; ++pos) {
      for (std::size_t s = 0; s < n; ++s) {
        dp[s] = db_raw[pos * n + s];
        dp[n + s] = dc_raw[pos * n + s];
      }
      for (std::size_t k = 0; k < r; ++k) dp[2 * n + k] = ddlow[pos * r + k];
      const double* v = bt.v.data() + pos * c;
      double* dv_pos = dv.data() + pos * c;
      for (std::size_t j = 0; j < c; ++j) {
        const double* wrow = blk.w_proj.values.data() + j * width;
        double* gwrow = gb.w_proj.values.data() + j * width;
        double acc = 0.0;
        for (std::size_t q = 0; q < width; ++q) {
          acc += wrow[q] * dp[q];
          gwrow[q] += v[j] * dp[q];
        }
        dv_pos[j] += acc;
      }
    }

    // Causal conv (identity when disabled).
    if (cfg.conv_enabled) {
      const std::size_t w = cfg.conv_width;
      for (std::size_t b = 0; b < big_b; ++b) {
        for (std::size_t t = 0; t < big_t; ++t) {
          const std::size_t pos = b * big_t + t;
          for (std::size_t j = 0; j < c; ++j) {
            const double dv_j = dv[pos * c + j];
            for (std::size_t k = 0; k < w; ++k) {
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) -
                                         static_cast<std::ptrdiff_t>(w - 1 - k);
              if (src < 0) continue;
              const std::size_t src_pos = b * big_t + static_cast<std::size_t>(src);
              gb.conv_kernel.values[j * w + k] += dv_j * bt.u[src_pos * c + j];
              du[src_pos * c + j] += blk.conv_kernel.values[j * w + k] * dv_j;
            }
          }
        }
      }
    } else {
      du = dv;
    }

    // u = W_in^T xhat, then the block norm; the residual identity adds the
    // incoming dresid to the norm-path gradient.
    for (std::size_t pos = 0; pos < positions; ++pos) {
      const double* xhat = bt.xhat.data() + pos * m;
      const double* du_pos = du.data() + pos * c;
      for (std::size_t i = 0; i < m; ++i) {
        const double* wrow = blk.w_in.values.data() + i * c;
        double* gwrow = gb.w_in.values.data() + i * c;
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          acc += wrow[j] * du_pos[j];
          gwrow[j] += xhat[i] * du_pos[j];
        }
        dxhat[i] = acc;
      }
      rms_norm_backward(bt.resid_in.data() + pos * m, blk.norm_scale.values.data(),
                        bt.inv_rms[pos], dxhat.data(), m, dresid.data() + pos * m,
                        gb.norm_scale.values.data());
    }
  }

  // Embedding rows.
  for (std::size_t pos = 0; pos < positions; ++pos) {
    const std::uint32_t id = batch.tokens[pos];
    double* grow = g.embedding.values.data() + id * m;
    const double* dr = dresid.data() + pos * m;
    for (std::size_t i = 0; i < m; ++i) grow[i] += dr[i];
  }

  return result;
}

double fd_gradient(const ModelParams& params, const TokenBatch& batch,
                   std::string_view tensor_name, std::size_t flat_index, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_gradient: h must be positive");
  ModelParams work = params;
  Tensor* t = work.find(tensor_name);
  if (t == nullptr || flat_index >= t->values.size()) {
    throw std::invalid_argument("fd_gradient: bad tensor name or index");
  }
  const double saved = t->values[flat_index];

  t->values[flat_index] = saved + h;
  const double loss_plus = cross_entropy(forward_logits(work, batch), batch);
  t->values[flat_index] = saved - h;
  const double loss_minus = cross_entropy(forward_logits(work, batch), batch);
  t->values[flat_index] = saved;

  return (loss_plus - loss_minus) / (2.0 * h);
}

}  // namespace cobra
