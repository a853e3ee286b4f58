// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON run configuration: schema validation (unknown keys rejected), dotted
// --set overrides, task construction, and the canonical config echo that is
// embedded in run outputs.

#pragma once

#include "deltalora/optim.hpp"
#include "deltalora/tasks.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace deltalora {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TaskSpecCfg {
    std::string type;  // "teacher_student" | "char_lm"
    // teacher_student
    TsTaskSpec ts;
    // char_lm
    std::string corpus;
    int seq_len = 8;
    double train_frac = 0.9;
    ModelDims lm_dims;
};

struct RunSpec {
    TrainConfig train;
    TaskSpecCfg task;
    std::string out_dir;
    std::vector<std::string> compare_modes;
};

nlohmann::json load_config_file(const std::filesystem::path& path);

/// `key=value` with dotted paths (e.g. task.dim=32). The value is parsed as
/// JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Validates the document against the schema; throws ConfigError naming the
/// missing/unknown/invalid key.
RunSpec parse_run_spec(const nlohmann::json& doc);

/// Canonical JSON with every effective field filled in; parsing the echo
/// reproduces the same RunSpec.
nlohmann::json config_echo(const RunSpec& spec);

std::unique_ptr<TrainTask> make_task(const TaskSpecCfg& task, std::uint64_t seed);

/// Stable run identifier: hash of the canonical config echo.
std::string run_id(const RunSpec& spec);

} // namespace deltalora
