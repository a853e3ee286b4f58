// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0
//
// Low-rank adapter layer: frozen base weight W (out x in) plus a trainable
// pair A (out x rank), B (rank x in) scaled by alpha/rank. Provides the
// forward/backward passes, merging into the base weight, and the delta
// products used to propagate low-rank updates into W.
//
// Orientation: weights are stored (out_features x in_features) and applied
// to row-major token matrices X (n x in) as Y = X * W^T, i.e. y = W x per
// token. A layer is single-writer during a training step; snapshots and
// merged copies may be taken between steps from any thread.

#pragma once

#include "deltalora/linalg.hpp"

namespace deltalora {

/// Linear layer with an optional low-rank branch. With `adapters_enabled`
/// false it is a plain frozen/trainable weight; with it true the branch
/// computes (alpha/rank) * A * B on top of the frozen base.
struct AdapterLinear {
    Matrix w;  // out x in
    Matrix a;  // out x rank
    Matrix b;  // rank x in
    int rank = 0;
    double alpha = 1.0;
    // Dropout on the branch input. Nonzero only in verification and negative
    // tests; training keeps it at zero so the branch sees the base input.
    double lowrank_dropout_p = 0.0;
    bool adapters_enabled = false;

    double scaling() const { return alpha / static_cast<double>(rank); }
    int out_features() const { return w.rows(); }
    int in_features() const { return w.cols(); }
};

/// Wraps `base_w` with a rank-`rank` branch: A from Kaiming-uniform, B zero,
/// so the initial branch contribution is exactly zero.
AdapterLinear make_adapter(Matrix base_w, int rank, double alpha, Rng& rng);

/// Plain (non-adapted) layer around an existing weight.
AdapterLinear make_plain(Matrix base_w);

/// Copies of A and B taken before an optimizer step.
struct DeltaSnapshot {
    Matrix a_prev;
    Matrix b_prev;
};

struct AdapterCache {
    Matrix input;         // n x in, the base-path input
    Matrix branch_input;  // equals input when dropout is off
    Matrix drop_mask;     // empty when dropout is off
    bool valid = false;
};

/// Y = X W^T + (alpha/rank) * (X_drop B^T) A^T. `drop_rng` is only consulted
/// when lowrank_dropout_p > 0 (inverted dropout: kept entries scale by
/// 1/(1-p), so p -> 0 is the exact identity).
Matrix adapter_forward(const AdapterLinear& layer, const Matrix& x, AdapterCache& cache,
                       Rng* drop_rng = nullptr);

struct AdapterGrads {
    Matrix a;           // dL/dA (true gradient, includes the alpha/rank scale)
    Matrix b;           // dL/dB
    Matrix w;           // dL/dW; filled only when the branch is disabled
    Matrix input;       // dL/dX
    Matrix w_virtual;   // g_out^T * input          (verification only)
    Matrix ab_virtual;  // g_out^T * branch_input   (verification only)
};

/// Backward pass from upstream gradient `g_out` (n x out). The two virtual
/// gradients are the loss gradients with respect to W and to the product AB;
/// they are materialized only when `want_virtual` is set, never during
/// training (each is a full out x in buffer).
AdapterGrads adapter_backward(const AdapterLinear& layer, const AdapterCache& cache,
                              const Matrix& g_out, bool want_virtual = false);

/// A_new * B_new - A_prev * B_prev, by two products and a subtraction.
Matrix delta_product(const DeltaSnapshot& snap, const Matrix& a_new, const Matrix& b_new);

/// The expanded form of (A - eta*gA - eta*wd*A)(B - eta*gB - eta*wd*B) - A*B,
/// accumulated term by term:
///   -eta*A*gB - eta*wd*A*B - eta*gA*B + eta^2*gA*gB + eta^2*wd*gA*B
///   - eta*wd*A*B + eta^2*wd*A*gB + eta^2*wd^2*A*B
/// where gA, gB are the normalized gradients the optimizer applied.
Matrix delta_expansion(const Matrix& a, const Matrix& b, const Matrix& ga_hat,
                       const Matrix& gb_hat, double eta, double weight_decay);

/// W + (alpha/rank) * A * B when the branch is enabled, otherwise W.
Matrix merge(const AdapterLinear& layer);

} // namespace deltalora
