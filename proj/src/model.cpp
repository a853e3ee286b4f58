// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0

#include "deltalora/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace deltalora {

ToyModel make_model(const ModelDims& dims, std::uint64_t seed) {
    if (dims.width < 1 || dims.blocks < 1 || dims.heads < 1 || dims.width % dims.heads != 0) {
        throw std::invalid_argument("make_model: invalid dims width=" + std::to_string(dims.width) +
                                    " heads=" + std::to_string(dims.heads) +
                                    " blocks=" + std::to_string(dims.blocks));
    }
    ToyModel m;
    m.dims = dims;
    Rng rng(mix64(seed, 0x6d6f64656cULL)); // "model"
    m.blocks.reserve(dims.blocks);
    for (int i = 0; i < dims.blocks; ++i) {
        m.blocks.push_back(make_block(dims.width, dims.heads, dims.ffn_hidden, rng));
    }
    if (dims.vocab > 0) {
        if (dims.seq_len < 1) {
            throw std::invalid_argument("make_model: LM variant needs seq_len >= 1");
        }
        m.tok_embed = gaussian_matrix(dims.vocab, dims.width, rng, 0.0, 0.02);
        m.pos_embed = gaussian_matrix(dims.seq_len, dims.width, rng, 0.0, 0.02);
        m.lm_head = kaiming_uniform(dims.vocab, dims.width, rng);
    }
    return m;
}

void attach_adapters(ToyModel& model, int rank, double alpha, std::uint64_t seed) {
    Rng rng(mix64(seed, 0x61646170ULL)); // "adap"
    for (auto& block : model.blocks) {
        block.mha.wq = make_adapter(std::move(block.mha.wq.w), rank, alpha, rng);
        block.mha.wv = make_adapter(std::move(block.mha.wv.w), rank, alpha, rng);
    }
}

namespace {

void collect_block_params(ToyModel& m, std::vector<ParamRef>& out) {
    for (std::size_t i = 0; i < m.blocks.size(); ++i) {
        const std::string p = "blocks." + std::to_string(i);
        BlockParams& b = m.blocks[i];
        out.push_back({p + ".attn.wq.w", &b.mha.wq.w});
        if (b.mha.wq.adapters_enabled) {
            out.push_back({p + ".attn.wq.a", &b.mha.wq.a});
            out.push_back({p + ".attn.wq.b", &b.mha.wq.b});
        }
        out.push_back({p + ".attn.wk", &b.mha.wk});
        out.push_back({p + ".attn.wv.w", &b.mha.wv.w});
        if (b.mha.wv.adapters_enabled) {
            out.push_back({p + ".attn.wv.a", &b.mha.wv.a});
            out.push_back({p + ".attn.wv.b", &b.mha.wv.b});
        }
        out.push_back({p + ".attn.wo", &b.mha.wo});
        out.push_back({p + ".ffn.w1", &b.ffn.w1});
        out.push_back({p + ".ffn.b1", &b.ffn.b1});
        out.push_back({p + ".ffn.w2", &b.ffn.w2});
        out.push_back({p + ".ffn.b2", &b.ffn.b2});
        out.push_back({p + ".ln1.gamma", &b.ln1.gamma});
        out.push_back({p + ".ln1.beta", &b.ln1.beta});
        out.push_back({p + ".ln2.gamma", &b.ln2.gamma});
        out.push_back({p + ".ln2.beta", &b.ln2.beta});
    }
}

} // namespace

std::vector<ParamRef> model_parameters(ToyModel& model) {
    std::vector<ParamRef> out;
    collect_block_params(model, out);
    if (model.is_lm()) {
        out.push_back({"embed.tok", &model.tok_embed});
        out.push_back({"embed.pos", &model.pos_embed});
        out.push_back({"head.w", &model.lm_head});
    }
    std::sort(out.begin(), out.end(),
              [](const ParamRef& a, const ParamRef& b) { return a.name < b.name; });
    return out;
}

std::vector<ParamRef> trainable_parameters(ToyModel& model, Mode mode) {
    std::vector<ParamRef> all = model_parameters(model);
    std::vector<ParamRef> out;
    for (auto& ref : all) {
        const std::string& n = ref.name;
        const bool is_adapter = n.ends_with(".a") || n.ends_with(".b");
        const bool is_qv_base = n.ends_with(".wq.w") || n.ends_with(".wv.w");
        switch (mode) {
            case Mode::full_ft:
                if (!is_adapter) out.push_back(ref);
                break;
            case Mode::ft_qv:
                if (is_qv_base) out.push_back(ref);
                break;
            case Mode::lora:
            case Mode::delta_lora:
                if (is_adapter) out.push_back(ref);
                break;
        }
    }
    return out;
}

std::map<std::string, Matrix> snapshot_params(const ToyModel& model) {
    std::map<std::string, Matrix> out;
    for (const auto& ref : model_parameters(const_cast<ToyModel&>(model))) {
        out.emplace(ref.name, *ref.value);
    }
    return out;
}

std::vector<AdapterRef> adapter_layers(ToyModel& model) {
    std::vector<AdapterRef> out;
    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        const std::string p = "blocks." + std::to_string(i) + ".attn.";
        if (model.blocks[i].mha.wq.adapters_enabled)
            out.push_back({p + "wq", &model.blocks[i].mha.wq});
        if (model.blocks[i].mha.wv.adapters_enabled)
            out.push_back({p + "wv", &model.blocks[i].mha.wv});
    }
    return out;
}

namespace {

// Runs the block stack with optional inter-block dropout, shared by both
// forward paths.
Matrix run_blocks(const ToyModel& model, Matrix h, ModelCache& cache, bool training,
                  Rng* drop_rng) {
    const int n_blocks = static_cast<int>(model.blocks.size());
    cache.blocks.assign(n_blocks, BlockCache());
    cache.drop_masks.assign(n_blocks, Matrix());
    for (int i = 0; i < n_blocks; ++i) {
        h = block_forward(h, model.blocks[i], cache.blocks[i]);
        const double p = model.blocks[i].inter_block_dropout_p;
        if (training && p > 0.0 && i + 1 < n_blocks) {
            if (drop_rng == nullptr) {
                throw std::invalid_argument("model_forward: dropout requires an rng");
            }
            Matrix mask(h.rows(), h.cols());
            const double keep_scale = 1.0 / (1.0 - p);
            for (std::size_t j = 0; j < mask.size(); ++j) {
                mask.data()[j] = drop_rng->next_uniform() >= p ? keep_scale : 0.0;
            }
            h = hadamard(h, mask);
            cache.drop_masks[i] = std::move(mask);
        }
    }
    return h;
}

Matrix blocks_backward(const ToyModel& model, const ModelCache& cache, Matrix g,
                       GradMap& grads) {
    for (int i = static_cast<int>(model.blocks.size()) - 1; i >= 0; --i) {
        if (!cache.drop_masks[i].empty()) g = hadamard(g, cache.drop_masks[i]);
        g = block_backward(model.blocks[i], cache.blocks[i], g,
                           "blocks." + std::to_string(i), grads);
    }
    return g;
}

} // namespace

Matrix model_forward(const ToyModel& model, const Matrix& x, ModelCache& cache, bool training,
                     Rng* drop_rng) {
    if (x.cols() != model.dims.width) {
        throw std::invalid_argument("model_forward: input " + shape_str(x) +
                                    " does not match width " + std::to_string(model.dims.width));
    }
    cache.ids.clear();
    Matrix out = run_blocks(model, x, cache, training, drop_rng);
    cache.valid = true;
    return out;
}

Matrix model_backward(const ToyModel& model, const ModelCache& cache, const Matrix& g_out,
                      GradMap& grads) {
    if (!cache.valid) throw std::invalid_argument("model_backward: cache is stale or missing");
    return blocks_backward(model, cache, g_out, grads);
}

Matrix lm_forward(const ToyModel& model, const std::vector<int>& ids, ModelCache& cache,
                  bool training, Rng* drop_rng) {
    if (!model.is_lm()) throw std::invalid_argument("lm_forward: model has no embedding");
    const int n = static_cast<int>(ids.size());
    if (n < 1 || n > model.dims.seq_len) {
        throw std::invalid_argument("lm_forward: sequence length " + std::to_string(n) +
                                    " out of range (seq_len " +
                                    std::to_string(model.dims.seq_len) + ")");
    }
    Matrix h(n, model.dims.width);
    for (int t = 0; t < n; ++t) {
        const int id = ids[t];
        if (id < 0 || id >= model.dims.vocab) {
            throw std::out_of_range("lm_forward: token id " + std::to_string(id) +
                                    " out of vocab " + std::to_string(model.dims.vocab));
        }
        for (int j = 0; j < model.dims.width; ++j)
            h(t, j) = model.tok_embed(id, j) + model.pos_embed(t, j);
    }
    cache.ids = ids;
    h = run_blocks(model, std::move(h), cache, training, drop_rng);

    cache.final_hidden = Matrix(1, model.dims.width);
    for (int j = 0; j < model.dims.width; ++j) cache.final_hidden(0, j) = h(n - 1, j);
    cache.valid = true;
    return matmul_nt(cache.final_hidden, model.lm_head);
}

void lm_backward(const ToyModel& model, const ModelCache& cache, const Matrix& g_logits,
                 GradMap& grads) {
    if (!cache.valid || cache.ids.empty()) {
        throw std::invalid_argument("lm_backward: cache is stale or missing");
    }
    accumulate_grad(grads, "head.w", matmul_tn(g_logits, cache.final_hidden));

    const int n = static_cast<int>(cache.ids.size());
    Matrix g_h(n, model.dims.width);
    Matrix g_last = matmul(g_logits, model.lm_head); // 1 x width
    for (int j = 0; j < model.dims.width; ++j) g_h(n - 1, j) = g_last(0, j);

    Matrix g_in = blocks_backward(model, cache, std::move(g_h), grads);

    Matrix g_tok = Matrix::zeros(model.dims.vocab, model.dims.width);
    Matrix g_pos = Matrix::zeros(model.dims.seq_len, model.dims.width);
    for (int t = 0; t < n; ++t) {
        for (int j = 0; j < model.dims.width; ++j) {
            g_tok(cache.ids[t], j) += g_in(t, j);
            g_pos(t, j) += g_in(t, j);
        }
    }
    accumulate_grad(grads, "embed.tok", std::move(g_tok));
    accumulate_grad(grads, "embed.pos", std::move(g_pos));
}

} // namespace deltalora
