// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0
//
// Training loops for the four modes over any task:
//   delta_lora  adapters train via AdamW; after step K the base query/value
//               weights additionally absorb
//               update_ratio * (alpha/rank) * (A'B' - AB) each step
//   lora        adapters train, base weights frozen
//   full_ft     every parameter trains via AdamW
//   ft_qv       only the raw query/value weights train
// A run is strictly sequential; independent runs (sweep points, seeds) may
// execute concurrently and share only the read-only task.

#pragma once

#include "deltalora/checkpoint.hpp"
#include "deltalora/optim.hpp"
#include "deltalora/tasks.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace deltalora {

/// Raised when a run hits a non-finite loss or gradient; the run aborts and
/// no partial result is emitted.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunResult {
    std::vector<std::pair<long, double>> loss_trace;  // (step, train loss)
    std::vector<std::pair<long, double>> eval_trace;  // (step, eval loss)
    std::map<std::string, Matrix> final_params;
    std::map<std::string, AdamWState> final_opt_states;
    // flat_cosine(merged final W, pretrained W) per adapted layer.
    std::vector<std::pair<std::string, double>> per_layer_cosine;
    TrainConfig config_echo;
    std::uint64_t seed = 0;
    double wall_time_s = 0.0;  // informational; excluded from determinism checks

    // delta_lora only: the A*B product per layer at the first step whose
    // guard fired, and that step index (-1 when it never fired).
    std::map<std::string, Matrix> first_fire_product;
    long first_fire_step = -1;

    double final_train_loss() const;
    double final_eval_loss() const;
};

/// Learning rate at step t: `constant` returns eta; `linear` ramps
/// eta * t / warmup_steps, then decays linearly to 0 at total_steps.
double lr_at(const TrainConfig& cfg, long t);

/// Runs the configured mode for total_steps. With `resume`, continues from
/// the checkpoint's step with restored parameters and optimizer state; the
/// continuation is bit-identical to an uninterrupted run.
RunResult train(const TrainTask& task, const TrainConfig& cfg,
                const Checkpoint* resume = nullptr);

/// Final model parameters + optimizer moments + step counter, ready to save.
Checkpoint build_checkpoint(const RunResult& result);

enum class SweepParam { update_ratio, start_steps };
SweepParam sweep_param_from_name(const std::string& name);
const char* sweep_param_name(SweepParam p);

/// One train() per value with the shared seed, results in the given order.
/// max_threads > 1 fans runs out to that many workers.
std::vector<RunResult> sweep(const TrainTask& task, const TrainConfig& base, SweepParam param,
                             const std::vector<double>& values, int max_threads = 1);

} // namespace deltalora
