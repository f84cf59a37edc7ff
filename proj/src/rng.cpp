// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#include "mpq/rng.hpp"

#include "mpq/error.hpp"

namespace mpq {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid argument";
        case ErrorKind::shape_mismatch: return "shape mismatch";
        case ErrorKind::unknown_tensor: return "unknown tensor";
        case ErrorKind::non_finite: return "non-finite value";
        case ErrorKind::data: return "data error";
        case ErrorKind::config: return "config error";
        case ErrorKind::target_unreachable: return "target unreachable";
    }
    return "error";
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

Rng make_stream(std::uint64_t seed, std::string_view name, std::uint64_t index) {
    const std::uint64_t name_hash = fnv1a64(name.data(), name.size());
    std::seed_seq seq{
        static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
        static_cast<std::uint32_t>(name_hash), static_cast<std::uint32_t>(name_hash >> 32),
        static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

}  // namespace mpq
