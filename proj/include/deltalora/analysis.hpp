// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0
//
// Post-hoc analysis over run results: how far each adapted weight moved from
// its pretrained value (per layer and mode), and sweep summaries. All
// functions here are pure; identical inputs give byte-identical reports.

#pragma once

#include "deltalora/trainer.hpp"

#include <string>
#include <utility>
#include <vector>

namespace deltalora {

struct CosineRow {
    std::string layer;  // e.g. "blocks.0.attn.wq"
    std::string mode;
    double cosine = 1.0;  // flat_cosine(merged final W, pretrained W)
};

struct CosineReport {
    std::vector<CosineRow> rows;
};

/// One row per adapted layer per mode, in the given order. Every run must
/// carry the same layer set as `pretrained`, which maps layer names (e.g.
/// "blocks.0.attn.wq") to the shared pretrained weights.
CosineReport cosine_report(const std::map<std::string, Matrix>& pretrained,
                           const std::vector<std::pair<std::string, const RunResult*>>& results);

/// The adapted-layer name -> pretrained weight map for a model.
std::map<std::string, Matrix> pretrained_adapted_weights(const ToyModel& model);

/// Merged final weight of `layer` from a run's final parameters (base plus
/// scaled A*B when the run trained adapters).
Matrix merged_final_weight(const RunResult& result, const std::string& layer);

struct SweepRow {
    double param_value = 0.0;
    double final_train_loss = 0.0;
    double final_eval_metric = 0.0;
};

/// One row per run, input order preserved.
std::vector<SweepRow> summarize_sweep(
    const std::vector<std::pair<double, const RunResult*>>& results);

// RFC 4180 CSV / JSONL renderings (strings, for the CLI to write).
std::string cosine_report_csv(const CosineReport& report);
std::string cosine_report_jsonl(const CosineReport& report);
std::string sweep_table_csv(const std::string& param_name, const std::vector<SweepRow>& rows);
std::string compare_table_csv(
    const std::vector<std::pair<std::string, const RunResult*>>& results);

} // namespace deltalora
