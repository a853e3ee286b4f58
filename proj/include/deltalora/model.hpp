// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0
//
// The toy model: a stack of pre-norm transformer blocks, optionally with a
// byte embedding and LM head for language-model tasks. Exposes a flat,
// name-keyed view of all parameters for the optimizer, checkpoints and
// reports. A model instance is single-writer during training.

#pragma once

#include "deltalora/nn.hpp"
#include "deltalora/optim.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace deltalora {

struct ModelDims {
    int width = 8;
    int heads = 2;
    int blocks = 1;
    int ffn_hidden = 16;
    int vocab = 0;    // > 0 selects the LM variant
    int seq_len = 0;  // LM context length
};

struct ToyModel {
    ModelDims dims;
    std::vector<BlockParams> blocks;
    Matrix tok_embed;  // vocab x width   (LM only)
    Matrix pos_embed;  // seq_len x width (LM only)
    Matrix lm_head;    // vocab x width   (LM only)

    bool is_lm() const { return dims.vocab > 0; }
};

ToyModel make_model(const ModelDims& dims, std::uint64_t seed);

/// Wraps every block's query and value projections with rank-`rank` branches
/// (A Kaiming-initialized from `seed`, B zero). Other matrices stay plain.
void attach_adapters(ToyModel& model, int rank, double alpha, std::uint64_t seed);

struct ParamRef {
    std::string name;
    Matrix* value;
};

/// Every live parameter in a fixed, name-sorted order.
std::vector<ParamRef> model_parameters(ToyModel& model);

/// The subset a given mode trains: everything (full_ft), the raw query/value
/// weights (ft_qv), or the adapter pairs (lora / delta_lora).
std::vector<ParamRef> trainable_parameters(ToyModel& model, Mode mode);

std::map<std::string, Matrix> snapshot_params(const ToyModel& model);

/// Adapter layers in update order, named like the parameter prefix.
struct AdapterRef {
    std::string name;  // e.g. "blocks.0.attn.wq"
    AdapterLinear* layer;
};
std::vector<AdapterRef> adapter_layers(ToyModel& model);

struct ModelCache {
    std::vector<BlockCache> blocks;
    std::vector<Matrix> drop_masks;  // between blocks; empty entries when off
    std::vector<int> ids;            // LM input tokens
    Matrix final_hidden;             // LM: last-position hidden row
    bool valid = false;
};

/// Regression path: X (n x width) -> (n x width).
Matrix model_forward(const ToyModel& model, const Matrix& x, ModelCache& cache,
                     bool training = false, Rng* drop_rng = nullptr);
Matrix model_backward(const ToyModel& model, const ModelCache& cache, const Matrix& g_out,
                      GradMap& grads);

/// LM path: token ids -> 1 x vocab logits for the next byte.
Matrix lm_forward(const ToyModel& model, const std::vector<int>& ids, ModelCache& cache,
                  bool training = false, Rng* drop_rng = nullptr);
void lm_backward(const ToyModel& model, const ModelCache& cache, const Matrix& g_logits,
                 GradMap& grads);

} // namespace deltalora
