// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0
//
// Small file helpers shared by the CLI and the report writers.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace deltalora {

/// Writes via a temp file in the same directory plus rename, so readers
/// never observe a torn file.
void atomic_write_file(const std::filesystem::path& path, const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

/// RFC 4180: quotes a field when it contains a comma, quote or newline,
/// doubling embedded quotes.
std::string csv_escape(const std::string& field);

/// Joins pre-escaped fields with commas and a CRLF terminator.
std::string csv_line(const std::vector<std::string>& fields);

/// Shortest round-trip decimal form of a double (what the JSON writer uses).
std::string format_double(double v);

} // namespace deltalora
