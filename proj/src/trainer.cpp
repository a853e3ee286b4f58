// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0

#include "deltalora/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace deltalora {

namespace {

constexpr std::uint64_t kDropoutStream = 0x64726f70ULL;

double trace_back(const std::vector<std::pair<long, double>>& trace) {
    return trace.empty() ? std::numeric_limits<double>::quiet_NaN() : trace.back().second;
}

} // namespace

double RunResult::final_train_loss() const { return trace_back(loss_trace); }
double RunResult::final_eval_loss() const { return trace_back(eval_trace); }

double lr_at(const TrainConfig& cfg, long t) {
    if (cfg.schedule == Schedule::constant) return cfg.eta;
    if (cfg.warmup_steps > 0 && t < cfg.warmup_steps) {
        return cfg.eta * static_cast<double>(t) / static_cast<double>(cfg.warmup_steps);
    }
    if (cfg.total_steps > cfg.warmup_steps) {
        return cfg.eta * static_cast<double>(cfg.total_steps - t) /
               static_cast<double>(cfg.total_steps - cfg.warmup_steps);
    }
    return cfg.eta;
}

namespace {

void restore_from_checkpoint(const Checkpoint& ckpt, ToyModel& model,
                             std::vector<ParamRef>& trainables,
                             std::map<std::string, AdamWState>& states) {
    for (const auto& ref : model_parameters(model)) {
        auto it = ckpt.tensors.find(ref.name);
        if (it == ckpt.tensors.end()) {
            throw std::runtime_error("resume: checkpoint is missing tensor \"" + ref.name +
                                     "\"");
        }
        if (!it->second.same_shape(*ref.value)) {
            throw std::runtime_error("resume: tensor \"" + ref.name + "\" has shape " +
                                     shape_str(it->second) + ", expected " +
                                     shape_str(*ref.value));
        }
        *ref.value = it->second;
    }
    for (const auto& ref : trainables) {
        AdamWState& st = states.at(ref.name);
        st.m = ckpt.tensors.at("optim." + ref.name + ".m");
        st.v = ckpt.tensors.at("optim." + ref.name + ".v");
        st.step = ckpt.step;
    }
}

void clip_gradients(const std::vector<ParamRef>& trainables, GradMap& grads, double clip_norm) {
    double sq = 0.0;
    for (const auto& ref : trainables) sq += dot_flat(grads.at(ref.name), grads.at(ref.name));
    const double norm = std::sqrt(sq);
    if (norm > clip_norm) {
        const double s = clip_norm / norm;
        for (const auto& ref : trainables) scale_in_place(grads.at(ref.name), s);
    }
}

} // namespace

RunResult train(const TrainTask& task, const TrainConfig& cfg, const Checkpoint* resume) {
    const auto wall_start = std::chrono::steady_clock::now();

    ToyModel model = task.pretrained();
    const bool adapted = cfg.mode == Mode::lora || cfg.mode == Mode::delta_lora;
    if (adapted) attach_adapters(model, cfg.rank, cfg.alpha, cfg.seed);

    std::vector<ParamRef> trainables = trainable_parameters(model, cfg.mode);
    std::map<std::string, AdamWState> states;
    for (const auto& ref : trainables) {
        states.emplace(ref.name, make_adamw_state(ref.value->rows(), ref.value->cols(),
                                                  cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps));
    }

    long start_t = 0;
    if (resume != nullptr) {
        if (resume->step > cfg.total_steps) {
            throw std::runtime_error("resume: checkpoint step " + std::to_string(resume->step) +
                                     " is past total_steps " + std::to_string(cfg.total_steps));
        }
        restore_from_checkpoint(*resume, model, trainables, states);
        start_t = resume->step;
    }

    RunResult result;
    result.config_echo = cfg;
    result.seed = cfg.seed;

    std::vector<AdapterRef> adapters = adapter_layers(model);

    for (long t = start_t; t < cfg.total_steps; ++t) {
        GradMap grads;
        Rng drop_rng(mix64(mix64(cfg.seed, kDropoutStream), static_cast<std::uint64_t>(t)));
        const double loss = task.batch_step(model, cfg.seed, t, cfg.batch_size, &grads, &drop_rng);
        if (!std::isfinite(loss)) {
            throw NumericalError("step " + std::to_string(t) + ": non-finite training loss");
        }
        if (cfg.clip_norm > 0.0) clip_gradients(trainables, grads, cfg.clip_norm);

        const double lr = lr_at(cfg, t);
        if (cfg.mode == Mode::delta_lora) {
            for (const auto& ar : adapters) {
                AdapterLinear& layer = *ar.layer;
                DeltaSnapshot snap{layer.a, layer.b};
                adamw_step(layer.a, grads.at(ar.name + ".a"), states.at(ar.name + ".a"), lr,
                           cfg.weight_decay);
                adamw_step(layer.b, grads.at(ar.name + ".b"), states.at(ar.name + ".b"), lr,
                           cfg.weight_decay);
                if (t > cfg.start_steps && cfg.update_ratio != 0.0) {
                    if (result.first_fire_step < 0) result.first_fire_step = t;
                    if (result.first_fire_step == t) {
                        result.first_fire_product.emplace(ar.name,
                                                          matmul(snap.a_prev, snap.b_prev));
                    }
                    // One transient out x in buffer per adapter per step.
                    Matrix delta = delta_product(snap, layer.a, layer.b);
                    add_scaled(layer.w, cfg.update_ratio * layer.scaling(), delta);
                }
            }
        } else {
            for (const auto& ref : trainables) {
                adamw_step(*ref.value, grads.at(ref.name), states.at(ref.name), lr,
                           cfg.weight_decay);
            }
        }

        if (cfg.log_every > 0 && t % cfg.log_every == 0) {
            result.loss_trace.emplace_back(t, loss);
        }
        if (cfg.eval_every > 0 && (t + 1) % cfg.eval_every == 0 && t + 1 < cfg.total_steps) {
            const double e = task.eval_loss(model);
            if (std::isfinite(e)) result.eval_trace.emplace_back(t + 1, e);
        }
    }

    if (cfg.total_steps > 0) {
        const double e = task.eval_loss(model);
        if (std::isfinite(e)) result.eval_trace.emplace_back(cfg.total_steps, e);
    }

    result.final_params = snapshot_params(model);
    result.final_opt_states = std::move(states);

    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        const MhaParams& now = model.blocks[i].mha;
        const MhaParams& before = task.pretrained().blocks[i].mha;
        const std::string prefix = "blocks." + std::to_string(i) + ".attn.";
        result.per_layer_cosine.emplace_back(prefix + "wq", flat_cosine(merge(now.wq), before.wq.w));
        result.per_layer_cosine.emplace_back(prefix + "wv", flat_cosine(merge(now.wv), before.wv.w));
    }

    result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return result;
}

Checkpoint build_checkpoint(const RunResult& result) {
    Checkpoint ckpt;
    ckpt.step = result.config_echo.total_steps;
    ckpt.tensors = result.final_params;
    for (const auto& [name, st] : result.final_opt_states) {
        ckpt.tensors.emplace("optim." + name + ".m", st.m);
        ckpt.tensors.emplace("optim." + name + ".v", st.v);
    }
    return ckpt;
}

SweepParam sweep_param_from_name(const std::string& name) {
    if (name == "lambda") return SweepParam::update_ratio;
    if (name == "K") return SweepParam::start_steps;
    throw std::invalid_argument("unknown sweep parameter: \"" + name +
                                "\" (expected lambda|K)");
}

const char* sweep_param_name(SweepParam p) {
    return p == SweepParam::update_ratio ? "lambda" : "K";
}

std::vector<RunResult> sweep(const TrainTask& task, const TrainConfig& base, SweepParam param,
                             const std::vector<double>& values, int max_threads) {
    if (values.empty()) throw std::invalid_argument("sweep: values must be non-empty");

    std::vector<TrainConfig> configs;
    configs.reserve(values.size());
    for (double v : values) {
        TrainConfig cfg = base;
        if (param == SweepParam::update_ratio) {
            cfg.update_ratio = v;
        } else {
            cfg.start_steps = static_cast<long>(v);
        }
        configs.push_back(cfg);
    }

    std::vector<RunResult> results(values.size());
    if (max_threads <= 1 || values.size() == 1) {
        for (std::size_t i = 0; i < configs.size(); ++i) results[i] = train(task, configs[i]);
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(configs.size());
    const int workers = std::min<int>(max_threads, static_cast<int>(configs.size()));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= configs.size()) return;
                try {
                    results[i] = train(task, configs[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
    return results;
}

} // namespace deltalora
