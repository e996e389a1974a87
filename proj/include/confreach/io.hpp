// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "confreach/core.hpp"

namespace confreach {

// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

// %.17g; non-finite values become JSON null.
std::string format_double(double x);

std::string digest_hex(std::uint64_t d);

// {horizon, seed, trajectories: [[{t, p, v, y, u}, ...], ...], terminated: [...]}
std::string dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const std::string& text);

void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace confreach
