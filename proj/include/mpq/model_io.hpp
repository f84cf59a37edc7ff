// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0
//
// On-disk model and dataset formats: a JSON manifest plus raw little-endian
// blobs (float32 parameters and features, uint32 labels). Blob paths in a
// manifest are relative to the manifest's directory.

#pragma once

#include <filesystem>

#include "mpq/graph.hpp"

namespace mpq {

/// Writes `manifest` and `<stem>.bin` beside it.
void save_model(const ModelGraph& model, const std::filesystem::path& manifest);
ModelGraph load_model(const std::filesystem::path& manifest);

/// Writes `manifest`, `<stem>.features.bin` and `<stem>.labels.bin`.
void save_dataset(const Dataset& data, const std::filesystem::path& manifest);
Dataset load_dataset(const std::filesystem::path& manifest);

/// Text file helpers shared by the report writers.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mpq
