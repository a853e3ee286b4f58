// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0
//
// From-scratch AdamW with decoupled weight decay. The step returns the
// normalized gradient it applied so callers can reconstruct the update.
// One state per parameter, single-writer; steps for distinct parameters
// share nothing.

#pragma once

#include "deltalora/linalg.hpp"

#include <cstdint>
#include <string>

namespace deltalora {

struct AdamWState {
    Matrix m;  // first moment, parameter-shaped
    Matrix v;  // second moment, entrywise >= 0
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamWState make_adamw_state(int rows, int cols, double beta1 = 0.9, double beta2 = 0.999,
                            double eps = 1e-8);

/// One AdamW step, in place:
///   t <- t+1;  m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g*g
///   g_hat = (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
///   param <- param - eta*g_hat - eta*weight_decay*param
/// Returns g_hat. Bias correction uses std::pow on the step count.
/// Throws on shape mismatch or a non-finite gradient (no silent clamping).
Matrix adamw_step(Matrix& param, const Matrix& grad, AdamWState& state, double eta,
                  double weight_decay);

enum class Mode { delta_lora, lora, full_ft, ft_qv };
enum class Schedule { constant, linear };

const char* mode_name(Mode m);
Mode mode_from_name(const std::string& name);
const char* schedule_name(Schedule s);
Schedule schedule_from_name(const std::string& name);

/// Everything one training run needs besides the task itself.
struct TrainConfig {
    double eta = 1e-3;          // learning rate
    double weight_decay = 0.0;  // decoupled decay applied by adamw_step
    long total_steps = 0;       // T
    long start_steps = 0;       // K: W deltas first fire at step K+1
    double update_ratio = 0.5;  // lambda
    int rank = 4;
    double alpha = 8.0;
    std::uint64_t seed = 0;
    Mode mode = Mode::lora;
    long warmup_steps = 0;
    Schedule schedule = Schedule::constant;

    int batch_size = 8;
    long log_every = 1;
    long eval_every = 0;    // 0: evaluate only at the end
    double clip_norm = 0.0; // 0: no global-norm clipping
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

} // namespace deltalora
