// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0

#include "deltalora/checkpoint.hpp"

#include "deltalora/io.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian; big-endian hosts need byte swaps");

namespace deltalora {

namespace {

constexpr std::size_t kAlign = 64;

std::size_t padded_header_size(std::size_t header_len) {
    // Always at least one NUL so the reader can find the end of the JSON.
    return (header_len / kAlign + 1) * kAlign;
}

} // namespace

std::string checkpoint_bytes(const Checkpoint& ckpt) {
    nlohmann::json table = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& [name, tensor] : ckpt.tensors) {
        table.push_back({{"name", name},
                         {"rows", tensor.rows()},
                         {"cols", tensor.cols()},
                         {"offset", offset}});
        offset += tensor.size() * sizeof(double);
    }
    nlohmann::json header = {
        {"format_version", "1"},
        {"step", ckpt.step},
        {"tensors", std::move(table)},
    };
    std::string bytes = header.dump();
    bytes.resize(padded_header_size(bytes.size()), '\0');

    const std::size_t base = bytes.size();
    bytes.resize(base + offset);
    char* dst = bytes.data() + base;
    for (const auto& [name, tensor] : ckpt.tensors) {
        const std::size_t n = tensor.size() * sizeof(double);
        std::memcpy(dst, tensor.data(), n);
        dst += n;
    }
    return bytes;
}

Checkpoint parse_checkpoint(const std::string& bytes, const std::string& origin) {
    const std::size_t nul = bytes.find('\0');
    if (nul == std::string::npos) {
        throw std::runtime_error("checkpoint " + origin + ": missing header terminator");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(0, nul));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint " + origin + ": bad header: " + e.what());
    }
    if (header.value("format_version", "") != "1") {
        throw std::runtime_error("checkpoint " + origin + ": unsupported format_version");
    }

    Checkpoint ckpt;
    ckpt.step = header.at("step").get<long>();
    const std::size_t base = padded_header_size(nul);
    std::size_t expected_offset = 0;
    for (const auto& entry : header.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const int rows = entry.at("rows").get<int>();
        const int cols = entry.at("cols").get<int>();
        const std::size_t offset = entry.at("offset").get<std::size_t>();
        if (offset != expected_offset) {
            throw std::runtime_error("checkpoint " + origin + ": tensor \"" + name +
                                     "\" offset is inconsistent with the payload layout");
        }
        Matrix tensor(rows, cols);
        const std::size_t nbytes = tensor.size() * sizeof(double);
        if (base + offset + nbytes > bytes.size()) {
            throw std::runtime_error("checkpoint " + origin + ": payload truncated at \"" +
                                     name + "\"");
        }
        std::memcpy(tensor.data(), bytes.data() + base + offset, nbytes);
        if (!ckpt.tensors.emplace(name, std::move(tensor)).second) {
            throw std::runtime_error("checkpoint " + origin + ": duplicate tensor \"" + name +
                                     "\"");
        }
        expected_offset = offset + nbytes;
    }
    if (base + expected_offset != bytes.size()) {
        throw std::runtime_error("checkpoint " + origin + ": trailing bytes after payload");
    }
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    atomic_write_file(path, checkpoint_bytes(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return parse_checkpoint(read_file(path), "\"" + path.string() + "\"");
}

} // namespace deltalora
