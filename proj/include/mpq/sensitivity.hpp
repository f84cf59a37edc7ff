// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-tensor sensitivity scores: quantization error, loss increase under
// Gaussian weight noise, and the Hutchinson estimate of the Hessian trace of
// each tensor's diagonal block. A report's ordering is ascending, so the
// least sensitive tensor comes first.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpq/graph.hpp"
#include "mpq/quant_spec.hpp"

namespace mpq {

enum class Metric { qe, noise, hessian, random };

const char* to_string(Metric m) noexcept;
std::optional<Metric> parse_metric(std::string_view s);

struct Score {
    double mean = 0.0;
    double std = 0.0;
    int trials = 1;

    friend bool operator==(const Score&, const Score&) = default;
};

using ScoreMap = std::map<std::string, Score, std::less<>>;

struct SensitivityReport {
    Metric metric = Metric::qe;
    ScoreMap scores;
    std::vector<std::string> ordering;
    std::uint64_t seed = 0;

    friend bool operator==(const SensitivityReport&, const SensitivityReport&) = default;
};

/// Names sorted ascending by mean score, ties broken lexicographically.
std::vector<std::string> ascending_ordering(const ScoreMap& scores);

/// Scores every model parameter tensor that has a spec, at that spec's bit width.
SensitivityReport score_qe(const ModelGraph& model, const QuantMap& specs);

struct NoiseOptions {
    double lambda = 0.05;
    int trials = 5;
    std::uint64_t seed = 42;
    /// Score accuracy drop instead of loss increase.
    bool use_accuracy = false;
    std::size_t threads = 1;
};

SensitivityReport score_noise(const ModelGraph& model, const Dataset& data, const NoiseOptions& options);

struct HessianOptions {
    int probes = 128;
    std::uint64_t seed = 42;
    /// Divide the trace by the tensor's element count.
    bool normalize = true;
    std::size_t threads = 1;
};

SensitivityReport score_hessian(const ModelGraph& model, const Dataset& data,
                                const HessianOptions& options);

/// Uniformly random ordering; each tensor's score is its rank.
SensitivityReport score_random(std::span<const std::string> tensor_names, std::uint64_t seed);

/// Edit distance treating each string as one symbol; no set requirement.
std::size_t levenshtein_distance(std::span<const std::string> a, std::span<const std::string> b);

/// Levenshtein distance between two orderings of the same name set.
std::size_t ordering_distance(std::span<const std::string> a, std::span<const std::string> b);

}  // namespace mpq
