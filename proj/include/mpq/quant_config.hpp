// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>

namespace mpq {

using BitWidths = std::map<std::string, int, std::less<>>;

/// Bit width per quantizable tensor. Tensors at baseline_bits stay unquantized.
struct QuantConfig {
    BitWidths bits;
    int baseline_bits = 16;

    int bits_of(std::string_view name) const;

    friend bool operator==(const QuantConfig&, const QuantConfig&) = default;
};

QuantConfig uniform_config(std::span<const std::string> names, int bits, int baseline_bits = 16);

}  // namespace mpq
