// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0

#include "deltalora/adapters.hpp"

#include <algorithm>
#include <stdexcept>

namespace deltalora {

AdapterLinear make_adapter(Matrix base_w, int rank, double alpha, Rng& rng) {
    const int out = base_w.rows();
    const int in = base_w.cols();
    if (rank < 1 || rank > std::min(out, in)) {
        throw std::invalid_argument("make_adapter: rank " + std::to_string(rank) +
                                    " out of range for " + shape_str(base_w));
    }
    AdapterLinear layer;
    layer.w = std::move(base_w);
    layer.a = kaiming_uniform(out, rank, rng);
    layer.b = Matrix::zeros(rank, in);
    layer.rank = rank;
    layer.alpha = alpha;
    layer.adapters_enabled = true;
    return layer;
}

AdapterLinear make_plain(Matrix base_w) {
    AdapterLinear layer;
    layer.w = std::move(base_w);
    return layer;
}

Matrix adapter_forward(const AdapterLinear& layer, const Matrix& x, AdapterCache& cache,
                       Rng* drop_rng) {
    if (x.cols() != layer.in_features()) {
        throw std::invalid_argument("adapter_forward: input width " + shape_str(x) +
                                    " does not match layer " + shape_str(layer.w));
    }
    cache.input = x;
    Matrix out = matmul_nt(x, layer.w);
    if (!layer.adapters_enabled) {
        cache.branch_input = Matrix();
        cache.drop_mask = Matrix();
        cache.valid = true;
        return out;
    }

    const double p = layer.lowrank_dropout_p;
    if (p > 0.0) {
        if (drop_rng == nullptr) {
            throw std::invalid_argument("adapter_forward: dropout requires an rng");
        }
        const double keep_scale = 1.0 / (1.0 - p);
        cache.drop_mask = Matrix(x.rows(), x.cols());
        cache.branch_input = Matrix(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double keep = drop_rng->next_uniform() >= p ? keep_scale : 0.0;
            cache.drop_mask.data()[i] = keep;
            cache.branch_input.data()[i] = keep * x.data()[i];
        }
    } else {
        cache.drop_mask = Matrix();
        cache.branch_input = x;
    }

    // (X_drop B^T) A^T, staged through the rank-r bottleneck.
    Matrix low = matmul_nt(cache.branch_input, layer.b); // n x rank
    add_scaled(out, layer.scaling(), matmul_nt(low, layer.a));
    cache.valid = true;
    return out;
}

AdapterGrads adapter_backward(const AdapterLinear& layer, const AdapterCache& cache,
                              const Matrix& g_out, bool want_virtual) {
    if (!cache.valid) {
        throw std::invalid_argument("adapter_backward: cache is stale or missing");
    }
    if (g_out.rows() != cache.input.rows() || g_out.cols() != layer.out_features()) {
        throw std::invalid_argument("adapter_backward: upstream gradient " + shape_str(g_out) +
                                    " does not match layer " + shape_str(layer.w));
    }

    AdapterGrads grads;
    grads.input = matmul(g_out, layer.w); // base path: dL/dX = G W

    if (!layer.adapters_enabled) {
        grads.w = matmul_tn(g_out, cache.input); // G^T X
        if (want_virtual) {
            grads.w_virtual = grads.w;
            grads.ab_virtual = grads.w;
        }
        return grads;
    }

    const double s = layer.scaling();

    // Branch gradients without materializing an out x in product:
    //   dL/dA = s * (G^T X_drop) B^T = s * G^T (X_drop B^T)
    //   dL/dB = s * (G A)^T X_drop
    Matrix low = matmul_nt(cache.branch_input, layer.b); // n x rank
    grads.a = scale(matmul_tn(g_out, low), s);
    Matrix ga = matmul(g_out, layer.a); // n x rank
    grads.b = scale(matmul_tn(ga, cache.branch_input), s);

    // Branch contribution to dL/dX: s * (G A) B, routed back through the
    // dropout mask when one was applied.
    Matrix branch_in_grad = scale(matmul(ga, layer.b), s);
    if (!cache.drop_mask.empty()) {
        branch_in_grad = hadamard(branch_in_grad, cache.drop_mask);
    }
    add_in_place(grads.input, branch_in_grad);

    if (want_virtual) {
        grads.w_virtual = matmul_tn(g_out, cache.input);
        grads.ab_virtual = matmul_tn(g_out, cache.branch_input);
    }
    return grads;
}

Matrix delta_product(const DeltaSnapshot& snap, const Matrix& a_new, const Matrix& b_new) {
    if (!snap.a_prev.same_shape(a_new) || !snap.b_prev.same_shape(b_new)) {
        throw std::invalid_argument("delta_product: snapshot shapes " + shape_str(snap.a_prev) +
                                    "," + shape_str(snap.b_prev) + " do not match " +
                                    shape_str(a_new) + "," + shape_str(b_new));
    }
    return sub(matmul(a_new, b_new), matmul(snap.a_prev, snap.b_prev));
}

Matrix delta_expansion(const Matrix& a, const Matrix& b, const Matrix& ga_hat,
                       const Matrix& gb_hat, double eta, double weight_decay) {
    if (!a.same_shape(ga_hat) || !b.same_shape(gb_hat) || a.cols() != b.rows()) {
        throw std::invalid_argument("delta_expansion: inconsistent shapes " + shape_str(a) +
                                    "," + shape_str(b) + "," + shape_str(ga_hat) + "," +
                                    shape_str(gb_hat));
    }
    const double wd = weight_decay;
    const Matrix a_gb = matmul(a, gb_hat);
    const Matrix ab = matmul(a, b);
    const Matrix ga_b = matmul(ga_hat, b);
    const Matrix ga_gb = matmul(ga_hat, gb_hat);

    Matrix out(a.rows(), b.cols());
    add_scaled(out, -eta, a_gb);
    add_scaled(out, -eta * wd, ab);
    add_scaled(out, -eta, ga_b);
    add_scaled(out, eta * eta, ga_gb);
    add_scaled(out, eta * eta * wd, ga_b);
    add_scaled(out, -eta * wd, ab);
    add_scaled(out, eta * eta * wd, a_gb);
    add_scaled(out, eta * eta * wd * wd, ab);
    return out;
}

Matrix merge(const AdapterLinear& layer) {
    if (!layer.adapters_enabled) return layer.w;
    Matrix merged = layer.w;
    add_scaled(merged, layer.scaling(), matmul(layer.a, layer.b));
    return merged;
}

} // namespace deltalora
