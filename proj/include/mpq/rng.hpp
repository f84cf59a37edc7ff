// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mpq {

using Rng = std::mt19937_64;

/// Independent generator for a named substream of a root seed. Streams with
/// different (name, index) pairs are decorrelated through std::seed_seq, whose
/// mixing algorithm is fixed by the standard, so results are portable across
/// standard libraries for the raw engine output.
Rng make_stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

/// FNV-1a over raw bytes.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace mpq
