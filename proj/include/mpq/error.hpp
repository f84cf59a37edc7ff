// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mpq {

enum class ErrorKind {
    invalid_argument,
    shape_mismatch,
    unknown_tensor,
    non_finite,
    data,
    config,
    target_unreachable,
};

/// Single exception type for the toolkit; `kind()` drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace mpq
