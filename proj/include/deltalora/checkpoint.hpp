// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container, format version "1":
//   UTF-8 JSON header {"format_version","step","tensors":[{name,rows,cols,offset}...]}
//   + NUL padding to the next 64-byte boundary (always at least one NUL)
//   + concatenated row-major little-endian float64 payloads.
// Tensor offsets are bytes into the payload section. The tensor table is
// sorted by name and the writer is canonical, so load -> save reproduces a
// file byte for byte.

#pragma once

#include "deltalora/linalg.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace deltalora {

struct Checkpoint {
    long step = 0;
    std::map<std::string, Matrix> tensors;
};

/// Serializes to the container format (atomic: temp file + rename).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// The exact bytes save_checkpoint would write.
std::string checkpoint_bytes(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes, const std::string& origin = "<memory>");

} // namespace deltalora
