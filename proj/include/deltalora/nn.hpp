// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal transformer building blocks with explicit forward and backward
// passes. Tokens are rows: an activation is n x d and a projection weight is
// stored (out x in), applied as Y = X W^T. The i-th attention head reads the
// row slice [i*d_k, (i+1)*d_k) of each projection.
//
// Block wiring is fixed: pre-norm residuals,
//   y = x + MHA(LN1(x));  z = y + FFN(LN2(y))
// with ReLU inside the FFN and no biases on the attention projections.
// Forward/backward are pure given parameters and cache.

#pragma once

#include "deltalora/adapters.hpp"
#include "deltalora/linalg.hpp"

#include <map>
#include <string>
#include <vector>

namespace deltalora {

/// Name-keyed gradient accumulator shared by every backward pass.
using GradMap = std::map<std::string, Matrix>;

/// grads[name] += g, creating the slot on first touch.
void accumulate_grad(GradMap& grads, const std::string& name, Matrix&& g);

// -- multi-head attention ----------------------------------------------------

struct MhaParams {
    int heads = 1;
    AdapterLinear wq;  // d x d; adapter-capable
    Matrix wk;         // d x d
    AdapterLinear wv;  // d x d; adapter-capable
    Matrix wo;         // d x d
};

MhaParams make_mha(int width, int heads, Rng& rng);

struct MhaCache {
    Matrix input;
    AdapterCache q_cache, v_cache;
    Matrix q, k, v;
    std::vector<Matrix> probs;  // per head, n x n softmax rows
    Matrix heads_concat;        // n x d
    bool valid = false;
};

///   head_i = softmax(Q_i K_i^T / sqrt(d_k)) V_i,  out = concat(heads) Wo^T
Matrix mha_forward(const Matrix& x, const MhaParams& p, MhaCache& cache);

/// Accumulates parameter gradients under `prefix` (wq.a/wq.b or wq.w, wk,
/// wv.a/wv.b or wv.w, wo) and returns dL/dx.
Matrix mha_backward(const MhaParams& p, const MhaCache& cache, const Matrix& g_out,
                    const std::string& prefix, GradMap& grads);

// -- feed-forward --------------------------------------------------------------

struct FfnParams {
    Matrix w1;  // hidden x d
    Matrix b1;  // 1 x hidden
    Matrix w2;  // d x hidden
    Matrix b2;  // 1 x d
};

FfnParams make_ffn(int width, int hidden, Rng& rng);

struct FfnCache {
    Matrix input;
    Matrix pre_act;  // n x hidden
    bool valid = false;
};

/// Row-wise W2 ReLU(W1 x + b1) + b2; accepts any n x d input (a vector is a
/// 1 x d matrix).
Matrix ffn_forward(const Matrix& x, const FfnParams& p, FfnCache& cache);

Matrix ffn_backward(const FfnParams& p, const FfnCache& cache, const Matrix& g_out,
                    const std::string& prefix, GradMap& grads);

// -- layer norm -----------------------------------------------------------------

struct LayerNormParams {
    Matrix gamma;  // 1 x d
    Matrix beta;   // 1 x d
};

LayerNormParams make_layer_norm(int width);

struct LayerNormCache {
    Matrix normalized;            // (x - mean) / sqrt(var + eps), per row
    std::vector<double> inv_std;  // per row
    bool valid = false;
};

inline constexpr double kLayerNormEps = 1e-5;

Matrix layer_norm_forward(const Matrix& x, const LayerNormParams& p, LayerNormCache& cache);
Matrix layer_norm_backward(const LayerNormParams& p, const LayerNormCache& cache,
                           const Matrix& g_out, const std::string& prefix, GradMap& grads);

// -- transformer block ------------------------------------------------------------

struct BlockParams {
    MhaParams mha;
    FfnParams ffn;
    LayerNormParams ln1, ln2;
    // Dropout applied between stacked blocks (by the model, not in here).
    // Must stay strictly below 1.
    double inter_block_dropout_p = 0.0;
};

BlockParams make_block(int width, int heads, int ffn_hidden, Rng& rng);

struct BlockCache {
    LayerNormCache ln1c;
    MhaCache mhac;
    Matrix after_attn;  // y = x + mha(ln1(x))
    LayerNormCache ln2c;
    FfnCache ffnc;
    bool valid = false;
};

Matrix block_forward(const Matrix& x, const BlockParams& p, BlockCache& cache);

/// Exact analytic gradients for every block parameter plus dL/dx.
Matrix block_backward(const BlockParams& p, const BlockCache& cache, const Matrix& g_out,
                      const std::string& prefix, GradMap& grads);

// -- losses -----------------------------------------------------------------------

/// Mean squared error over all entries; fills g_pred with dL/dpred.
double loss_mse(const Matrix& pred, const Matrix& target, Matrix& g_pred);

/// Cross entropy of a single 1 x V logit row against `target_class`.
double loss_xent(const Matrix& logits, int target_class, Matrix& g_logits);

// -- shared pieces ------------------------------------------------------------------

/// Numerically stable row-wise softmax; each output row sums to 1.
Matrix softmax_rows(const Matrix& logits);
/// dL/dlogits given the softmax output and dL/dprobs.
Matrix softmax_rows_backward(const Matrix& probs, const Matrix& g_probs);

} // namespace deltalora
