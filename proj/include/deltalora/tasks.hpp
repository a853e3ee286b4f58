// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale tasks with deterministic data pipelines. Batches are a pure
// function of (seed, step): the same pair always yields the same samples.
// Task data is immutable after construction and safe for concurrent readers.

#pragma once

#include "deltalora/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace deltalora {

/// What a training loop needs from a task: a pretrained model to start
/// from, per-step batch gradients, and an evaluation metric.
class TrainTask {
public:
    virtual ~TrainTask() = default;

    virtual const ToyModel& pretrained() const = 0;

    /// Mean loss over the batch for (seed, step); accumulates d(mean loss)/d(theta)
    /// into `grads` when non-null. `drop_rng` drives any configured dropout.
    virtual double batch_step(const ToyModel& model, std::uint64_t seed, long step,
                              int batch_size, GradMap* grads, Rng* drop_rng) const = 0;

    /// Mean loss over the held-out split; NaN when the split is empty.
    virtual double eval_loss(const ToyModel& model) const = 0;
};

// -- teacher-student regression ------------------------------------------------

struct TsTaskSpec {
    ModelDims dims;
    int tokens = 4;  // rows per sample
    int n_train = 256;
    int n_eval = 64;
    double noise_std = 0.0;
    // Pretrained = target + perturbation on every query/value weight:
    // a rank-`perturb_rank` component of Frobenius norm perturb_scale*||W||
    // plus a dense component of dense_noise_scale*||W||.
    int perturb_rank = 8;
    double perturb_scale = 0.5;
    double dense_noise_scale = 0.05;
};

/// Regression against a known transformer: inputs are standard-normal token
/// matrices, labels come from the target model (plus optional noise), and
/// the returned pretrained model is the target with perturbed W_Q/W_V. The
/// perturbation construction is recorded in `spec` for reproducibility.
class TeacherStudentTask final : public TrainTask {
public:
    TeacherStudentTask(std::uint64_t seed, const TsTaskSpec& spec);

    const ToyModel& pretrained() const override { return pretrained_; }
    const ToyModel& target() const { return target_; }
    const TsTaskSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }

    double batch_step(const ToyModel& model, std::uint64_t seed, long step, int batch_size,
                      GradMap* grads, Rng* drop_rng) const override;
    double eval_loss(const ToyModel& model) const override;

    /// Sample indices drawn for (seed, step); exposed for reproducibility tests.
    std::vector<int> batch_indices(std::uint64_t seed, long step, int batch_size) const;

    const std::vector<Matrix>& train_inputs() const { return train_x_; }
    const std::vector<Matrix>& train_labels() const { return train_y_; }
    const std::vector<Matrix>& eval_inputs() const { return eval_x_; }

private:
    TsTaskSpec spec_;
    std::uint64_t seed_ = 0;
    ToyModel target_;
    ToyModel pretrained_;
    std::vector<Matrix> train_x_, train_y_, eval_x_, eval_y_;
};

inline TeacherStudentTask gen_teacher_student(std::uint64_t seed, const TsTaskSpec& spec) {
    return TeacherStudentTask(seed, spec);
}

// -- byte-level language modeling ------------------------------------------------

/// A corpus tokenized over the byte values that actually occur. The first
/// floor(train_frac * N) tokens form the train region, the remainder the
/// eval region; sample windows never straddle the boundary, so the splits
/// are disjoint.
struct CharLmTask {
    std::string corpus_path;
    std::vector<int> tokens;          // corpus as ids
    std::vector<unsigned char> byte_of_id;
    int vocab_size = 0;
    int seq_len = 0;
    double train_frac = 0.9;
    std::size_t train_tokens = 0;  // floor(train_frac * N)

    std::size_t eval_tokens() const { return tokens.size() - train_tokens; }
    /// Windows of seq_len inputs plus one target that fit each region.
    std::size_t train_window_count() const;
    std::size_t eval_window_count() const;
};

/// Reads the file as raw bytes. Throws on a missing/unreadable path or an
/// empty file.
CharLmTask load_corpus(const std::string& path, int seq_len, double train_frac = 0.9);

/// Next-byte prediction: the model reads a seq_len window and predicts the
/// byte that follows it.
class CharLmTrainTask final : public TrainTask {
public:
    CharLmTrainTask(CharLmTask data, ModelDims dims, std::uint64_t model_seed);

    const ToyModel& pretrained() const override { return pretrained_; }
    const CharLmTask& data() const { return data_; }

    double batch_step(const ToyModel& model, std::uint64_t seed, long step, int batch_size,
                      GradMap* grads, Rng* drop_rng) const override;
    double eval_loss(const ToyModel& model) const override;

private:
    void window_at(std::size_t start, std::vector<int>& ids, int& target) const;

    CharLmTask data_;
    ToyModel pretrained_;
};

} // namespace deltalora
