// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0

#include "deltalora/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace deltalora {

void accumulate_grad(GradMap& grads, const std::string& name, Matrix&& g) {
    auto it = grads.find(name);
    if (it == grads.end()) {
        grads.emplace(name, std::move(g));
    } else {
        add_in_place(it->second, g);
    }
}

// -- softmax -----------------------------------------------------------------

Matrix softmax_rows(const Matrix& logits) {
    Matrix probs(logits.rows(), logits.cols());
    for (int i = 0; i < logits.rows(); ++i) {
        double row_max = logits(i, 0);
        for (int j = 1; j < logits.cols(); ++j) row_max = std::max(row_max, logits(i, j));
        double denom = 0.0;
        for (int j = 0; j < logits.cols(); ++j) {
            const double e = std::exp(logits(i, j) - row_max);
            probs(i, j) = e;
            denom += e;
        }
        for (int j = 0; j < logits.cols(); ++j) probs(i, j) /= denom;
    }
    return probs;
}

Matrix softmax_rows_backward(const Matrix& probs, const Matrix& g_probs) {
    Matrix g(probs.rows(), probs.cols());
    for (int i = 0; i < probs.rows(); ++i) {
        double inner = 0.0;
        for (int j = 0; j < probs.cols(); ++j) inner += g_probs(i, j) * probs(i, j);
        for (int j = 0; j < probs.cols(); ++j)
            g(i, j) = probs(i, j) * (g_probs(i, j) - inner);
    }
    return g;
}

// -- multi-head attention -------------------------------------------------------

MhaParams make_mha(int width, int heads, Rng& rng) {
    if (heads < 1 || width % heads != 0) {
        throw std::invalid_argument("make_mha: width " + std::to_string(width) +
                                    " not divisible by heads " + std::to_string(heads));
    }
    MhaParams p;
    p.heads = heads;
    p.wq = make_plain(kaiming_uniform(width, width, rng));
    p.wk = kaiming_uniform(width, width, rng);
    p.wv = make_plain(kaiming_uniform(width, width, rng));
    p.wo = kaiming_uniform(width, width, rng);
    return p;
}

namespace {

Matrix col_slice(const Matrix& m, int c0, int width) {
    Matrix out(m.rows(), width);
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < width; ++j) out(i, j) = m(i, c0 + j);
    return out;
}

void col_slice_add(Matrix& dst, const Matrix& src, int c0) {
    for (int i = 0; i < src.rows(); ++i)
        for (int j = 0; j < src.cols(); ++j) dst(i, c0 + j) += src(i, j);
}

} // namespace

Matrix mha_forward(const Matrix& x, const MhaParams& p, MhaCache& cache) {
    const int d = p.wk.rows();
    if (x.cols() != d) {
        throw std::invalid_argument("mha_forward: input " + shape_str(x) +
                                    " does not match width " + std::to_string(d));
    }
    const int n = x.rows();
    const int dk = d / p.heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    cache.input = x;
    cache.q = adapter_forward(p.wq, x, cache.q_cache);
    cache.k = matmul_nt(x, p.wk);
    cache.v = adapter_forward(p.wv, x, cache.v_cache);
    cache.probs.assign(p.heads, Matrix());
    cache.heads_concat = Matrix(n, d);

    for (int h = 0; h < p.heads; ++h) {
        const int c0 = h * dk;
        Matrix qi = col_slice(cache.q, c0, dk);
        Matrix ki = col_slice(cache.k, c0, dk);
        Matrix vi = col_slice(cache.v, c0, dk);
        Matrix scores = scale(matmul_nt(qi, ki), inv_sqrt_dk);
        cache.probs[h] = softmax_rows(scores);
        col_slice_add(cache.heads_concat, matmul(cache.probs[h], vi), c0);
    }
    cache.valid = true;
    return matmul_nt(cache.heads_concat, p.wo);
}

Matrix mha_backward(const MhaParams& p, const MhaCache& cache, const Matrix& g_out,
                    const std::string& prefix, GradMap& grads) {
    if (!cache.valid) throw std::invalid_argument("mha_backward: cache is stale or missing");
    const int d = p.wk.rows();
    const int dk = d / p.heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    const int n = cache.input.rows();
    if (g_out.rows() != n || g_out.cols() != d) {
        throw std::invalid_argument("mha_backward: upstream gradient " + shape_str(g_out) +
                                    " does not match forward output");
    }

    accumulate_grad(grads, prefix + ".wo", matmul_tn(g_out, cache.heads_concat));
    Matrix g_concat = matmul(g_out, p.wo);

    Matrix g_q(n, d), g_k(n, d), g_v(n, d);
    for (int h = 0; h < p.heads; ++h) {
        const int c0 = h * dk;
        Matrix g_head = col_slice(g_concat, c0, dk);
        Matrix qi = col_slice(cache.q, c0, dk);
        Matrix ki = col_slice(cache.k, c0, dk);
        Matrix vi = col_slice(cache.v, c0, dk);
        const Matrix& probs = cache.probs[h];

        col_slice_add(g_v, matmul_tn(probs, g_head), c0);
        Matrix g_probs = matmul_nt(g_head, vi);
        Matrix g_scores = scale(softmax_rows_backward(probs, g_probs), inv_sqrt_dk);
        col_slice_add(g_q, matmul(g_scores, ki), c0);
        col_slice_add(g_k, matmul_tn(g_scores, qi), c0);
    }

    // Projection backward. Adapter layers report A/B gradients (or the base
    // weight gradient when the branch is disabled).
    AdapterGrads q_grads = adapter_backward(p.wq, cache.q_cache, g_q);
    AdapterGrads v_grads = adapter_backward(p.wv, cache.v_cache, g_v);
    Matrix g_x = std::move(q_grads.input);
    add_in_place(g_x, v_grads.input);
    add_in_place(g_x, matmul(g_k, p.wk));
    accumulate_grad(grads, prefix + ".wk", matmul_tn(g_k, cache.input));

    if (p.wq.adapters_enabled) {
        accumulate_grad(grads, prefix + ".wq.a", std::move(q_grads.a));
        accumulate_grad(grads, prefix + ".wq.b", std::move(q_grads.b));
    } else {
        accumulate_grad(grads, prefix + ".wq.w", std::move(q_grads.w));
    }
    if (p.wv.adapters_enabled) {
        accumulate_grad(grads, prefix + ".wv.a", std::move(v_grads.a));
        accumulate_grad(grads, prefix + ".wv.b", std::move(v_grads.b));
    } else {
        accumulate_grad(grads, prefix + ".wv.w", std::move(v_grads.w));
    }
    return g_x;
}

// -- feed-forward ------------------------------------------------------------------

FfnParams make_ffn(int width, int hidden, Rng& rng) {
    FfnParams p;
    p.w1 = kaiming_uniform(hidden, width, rng);
    p.b1 = Matrix::zeros(1, hidden);
    p.w2 = kaiming_uniform(width, hidden, rng);
    p.b2 = Matrix::zeros(1, width);
    return p;
}

Matrix ffn_forward(const Matrix& x, const FfnParams& p, FfnCache& cache) {
    if (x.cols() != p.w1.cols()) {
        throw std::invalid_argument("ffn_forward: input " + shape_str(x) +
                                    " does not match w1 " + shape_str(p.w1));
    }
    cache.input = x;
    cache.pre_act = matmul_nt(x, p.w1);
    for (int i = 0; i < cache.pre_act.rows(); ++i)
        for (int j = 0; j < cache.pre_act.cols(); ++j) cache.pre_act(i, j) += p.b1(0, j);

    Matrix activated(cache.pre_act.rows(), cache.pre_act.cols());
    for (std::size_t i = 0; i < activated.size(); ++i)
        activated.data()[i] = std::max(0.0, cache.pre_act.data()[i]);

    Matrix out = matmul_nt(activated, p.w2);
    for (int i = 0; i < out.rows(); ++i)
        for (int j = 0; j < out.cols(); ++j) out(i, j) += p.b2(0, j);
    cache.valid = true;
    return out;
}

Matrix ffn_backward(const FfnParams& p, const FfnCache& cache, const Matrix& g_out,
                    const std::string& prefix, GradMap& grads) {
    if (!cache.valid) throw std::invalid_argument("ffn_backward: cache is stale or missing");

    Matrix activated(cache.pre_act.rows(), cache.pre_act.cols());
    for (std::size_t i = 0; i < activated.size(); ++i)
        activated.data()[i] = std::max(0.0, cache.pre_act.data()[i]);

    accumulate_grad(grads, prefix + ".w2", matmul_tn(g_out, activated));
    Matrix g_b2(1, g_out.cols());
    for (int i = 0; i < g_out.rows(); ++i)
        for (int j = 0; j < g_out.cols(); ++j) g_b2(0, j) += g_out(i, j);
    accumulate_grad(grads, prefix + ".b2", std::move(g_b2));

    Matrix g_act = matmul(g_out, p.w2);
    for (std::size_t i = 0; i < g_act.size(); ++i)
        if (cache.pre_act.data()[i] <= 0.0) g_act.data()[i] = 0.0;

    accumulate_grad(grads, prefix + ".w1", matmul_tn(g_act, cache.input));
    Matrix g_b1(1, g_act.cols());
    for (int i = 0; i < g_act.rows(); ++i)
        for (int j = 0; j < g_act.cols(); ++j) g_b1(0, j) += g_act(i, j);
    accumulate_grad(grads, prefix + ".b1", std::move(g_b1));

    return matmul(g_act, p.w1);
}

// -- layer norm -----------------------------------------------------------------------

LayerNormParams make_layer_norm(int width) {
    LayerNormParams p;
    p.gamma = Matrix(1, width);
    for (int j = 0; j < width; ++j) p.gamma(0, j) = 1.0;
    p.beta = Matrix::zeros(1, width);
    return p;
}

Matrix layer_norm_forward(const Matrix& x, const LayerNormParams& p, LayerNormCache& cache) {
    const int n = x.rows(), d = x.cols();
    cache.normalized = Matrix(n, d);
    cache.inv_std.assign(n, 0.0);
    Matrix out(n, d);
    for (int i = 0; i < n; ++i) {
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += x(i, j);
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = x(i, j) - mean;
            var += c * c;
        }
        var /= d;
        const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
        cache.inv_std[i] = inv_std;
        for (int j = 0; j < d; ++j) {
            const double norm = (x(i, j) - mean) * inv_std;
            cache.normalized(i, j) = norm;
            out(i, j) = p.gamma(0, j) * norm + p.beta(0, j);
        }
    }
    cache.valid = true;
    return out;
}

Matrix layer_norm_backward(const LayerNormParams& p, const LayerNormCache& cache,
                           const Matrix& g_out, const std::string& prefix, GradMap& grads) {
    if (!cache.valid) throw std::invalid_argument("layer_norm_backward: cache is stale");
    const int n = g_out.rows(), d = g_out.cols();

    Matrix g_gamma(1, d), g_beta(1, d);
    Matrix g_x(n, d);
    for (int i = 0; i < n; ++i) {
        double sum_gn = 0.0, sum_gn_norm = 0.0;
        for (int j = 0; j < d; ++j) {
            const double gn = g_out(i, j) * p.gamma(0, j);
            sum_gn += gn;
            sum_gn_norm += gn * cache.normalized(i, j);
            g_gamma(0, j) += g_out(i, j) * cache.normalized(i, j);
            g_beta(0, j) += g_out(i, j);
        }
        const double mean_gn = sum_gn / d;
        const double mean_gn_norm = sum_gn_norm / d;
        for (int j = 0; j < d; ++j) {
            const double gn = g_out(i, j) * p.gamma(0, j);
            g_x(i, j) = cache.inv_std[i] *
                        (gn - mean_gn - cache.normalized(i, j) * mean_gn_norm);
        }
    }
    accumulate_grad(grads, prefix + ".gamma", std::move(g_gamma));
    accumulate_grad(grads, prefix + ".beta", std::move(g_beta));
    return g_x;
}

// -- transformer block ------------------------------------------------------------------

BlockParams make_block(int width, int heads, int ffn_hidden, Rng& rng) {
    BlockParams p;
    p.mha = make_mha(width, heads, rng);
    p.ffn = make_ffn(width, ffn_hidden, rng);
    p.ln1 = make_layer_norm(width);
    p.ln2 = make_layer_norm(width);
    return p;
}

Matrix block_forward(const Matrix& x, const BlockParams& p, BlockCache& cache) {
    Matrix u = layer_norm_forward(x, p.ln1, cache.ln1c);
    Matrix attn = mha_forward(u, p.mha, cache.mhac);
    cache.after_attn = add(x, attn);
    Matrix v = layer_norm_forward(cache.after_attn, p.ln2, cache.ln2c);
    Matrix f = ffn_forward(v, p.ffn, cache.ffnc);
    cache.valid = true;
    return add(cache.after_attn, f);
}

Matrix block_backward(const BlockParams& p, const BlockCache& cache, const Matrix& g_out,
                      const std::string& prefix, GradMap& grads) {
    if (!cache.valid) throw std::invalid_argument("block_backward: cache is stale or missing");

    Matrix g_v = ffn_backward(p.ffn, cache.ffnc, g_out, prefix + ".ffn", grads);
    Matrix g_y = layer_norm_backward(p.ln2, cache.ln2c, g_v, prefix + ".ln2", grads);
    add_in_place(g_y, g_out); // residual around the FFN

    Matrix g_u = mha_backward(p.mha, cache.mhac, g_y, prefix + ".attn", grads);
    Matrix g_x = layer_norm_backward(p.ln1, cache.ln1c, g_u, prefix + ".ln1", grads);
    add_in_place(g_x, g_y); // residual around the attention
    return g_x;
}

// -- losses ----------------------------------------------------------------------------

double loss_mse(const Matrix& pred, const Matrix& target, Matrix& g_pred) {
    if (!pred.same_shape(target)) {
        throw std::invalid_argument("loss_mse: shape mismatch " + shape_str(pred) + " vs " +
                                    shape_str(target));
    }
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    g_pred = Matrix(pred.rows(), pred.cols());
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double diff = pred.data()[i] - target.data()[i];
        loss += diff * diff;
        g_pred.data()[i] = 2.0 * diff * inv_n;
    }
    return loss * inv_n;
}

double loss_xent(const Matrix& logits, int target_class, Matrix& g_logits) {
    if (logits.rows() != 1) {
        throw std::invalid_argument("loss_xent: expected a 1 x V logit row, got " +
                                    shape_str(logits));
    }
    if (target_class < 0 || target_class >= logits.cols()) {
        throw std::out_of_range("loss_xent: class " + std::to_string(target_class) +
                                " out of range for " + std::to_string(logits.cols()) +
                                " classes");
    }
    double row_max = logits(0, 0);
    for (int j = 1; j < logits.cols(); ++j) row_max = std::max(row_max, logits(0, j));
    double denom = 0.0;
    for (int j = 0; j < logits.cols(); ++j) denom += std::exp(logits(0, j) - row_max);
    const double log_denom = std::log(denom) + row_max;
    const double loss = log_denom - logits(0, target_class);

    g_logits = Matrix(1, logits.cols());
    for (int j = 0; j < logits.cols(); ++j) {
        const double p = std::exp(logits(0, j) - log_denom);
        g_logits(0, j) = p - (j == target_class ? 1.0 : 0.0);
    }
    return loss;
}

} // namespace deltalora
