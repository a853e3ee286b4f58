// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0

#include "deltalora/analysis.hpp"

#include "deltalora/io.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>

namespace deltalora {

std::map<std::string, Matrix> pretrained_adapted_weights(const ToyModel& model) {
    std::map<std::string, Matrix> out;
    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        const std::string prefix = "blocks." + std::to_string(i) + ".attn.";
        out.emplace(prefix + "wq", model.blocks[i].mha.wq.w);
        out.emplace(prefix + "wv", model.blocks[i].mha.wv.w);
    }
    return out;
}

Matrix merged_final_weight(const RunResult& result, const std::string& layer) {
    const auto base_it = result.final_params.find(layer + ".w");
    if (base_it == result.final_params.end()) {
        throw std::invalid_argument("merged_final_weight: run has no layer \"" + layer + "\"");
    }
    Matrix merged = base_it->second;
    const auto a_it = result.final_params.find(layer + ".a");
    const auto b_it = result.final_params.find(layer + ".b");
    if (a_it != result.final_params.end() && b_it != result.final_params.end()) {
        const double s = result.config_echo.alpha / static_cast<double>(result.config_echo.rank);
        add_scaled(merged, s, matmul(a_it->second, b_it->second));
    }
    return merged;
}

CosineReport cosine_report(const std::map<std::string, Matrix>& pretrained,
                           const std::vector<std::pair<std::string, const RunResult*>>& results) {
    CosineReport report;
    for (const auto& [mode, run] : results) {
        for (const auto& [layer, before] : pretrained) {
            if (run->final_params.find(layer + ".w") == run->final_params.end()) {
                throw std::invalid_argument("cosine_report: mode \"" + mode +
                                            "\" is missing layer \"" + layer + "\"");
            }
        }
        for (const auto& [layer, before] : pretrained) {
            report.rows.push_back({layer, mode, flat_cosine(merged_final_weight(*run, layer),
                                                            before)});
        }
    }
    return report;
}

std::vector<SweepRow> summarize_sweep(
    const std::vector<std::pair<double, const RunResult*>>& results) {
    if (results.empty()) throw std::invalid_argument("summarize_sweep: no results");
    std::vector<SweepRow> rows;
    rows.reserve(results.size());
    for (const auto& [value, run] : results) {
        rows.push_back({value, run->final_train_loss(), run->final_eval_loss()});
    }
    return rows;
}

std::string cosine_report_csv(const CosineReport& report) {
    std::string out = csv_line({"layer", "mode", "cosine"});
    for (const auto& row : report.rows) {
        out += csv_line({csv_escape(row.layer), csv_escape(row.mode), format_double(row.cosine)});
    }
    return out;
}

std::string cosine_report_jsonl(const CosineReport& report) {
    std::string out;
    for (const auto& row : report.rows) {
        nlohmann::json j = {{"layer", row.layer}, {"mode", row.mode}, {"cosine", row.cosine}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string sweep_table_csv(const std::string& param_name, const std::vector<SweepRow>& rows) {
    std::string out = csv_line({csv_escape(param_name), "final_train_loss", "final_eval_metric"});
    for (const auto& row : rows) {
        out += csv_line({format_double(row.param_value), format_double(row.final_train_loss),
                         format_double(row.final_eval_metric)});
    }
    return out;
}

std::string compare_table_csv(
    const std::vector<std::pair<std::string, const RunResult*>>& results) {
    std::string out = csv_line({"mode", "final_train_loss", "final_eval_loss"});
    for (const auto& [mode, run] : results) {
        out += csv_line({csv_escape(mode), format_double(run->final_train_loss()),
                         format_double(run->final_eval_loss())});
    }
    return out;
}

} // namespace deltalora
