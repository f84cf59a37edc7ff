// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Sensitivity-guided bit-width configuration search. Both searches start from
// an all-baseline configuration and visit candidate bit widths from highest
// to lowest; a tensor lowered at one level is only ever lowered further.

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <map>
#include <string>
#include <vector>

#include "mpq/graph.hpp"
#include "mpq/quant_config.hpp"
#include "mpq/quant_spec.hpp"

namespace mpq {

using ConfigEvaluator = std::function<double(const QuantConfig&)>;

struct TraceEntry {
    /// Tensors whose bit width differs from the accepted working config.
    BitWidths delta;
    double accuracy = 0.0;
    bool accepted = false;

    friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct SearchOutcome {
    QuantConfig config;
    int evals = 0;
    double target_fraction = 1.0;
    /// target_fraction * baseline_accuracy.
    double target = 0.0;
    double baseline_accuracy = 0.0;
    double achieved_accuracy = 0.0;
    std::vector<TraceEntry> trace;

    friend bool operator==(const SearchOutcome&, const SearchOutcome&) = default;
};

struct SearchProblem {
    ConfigEvaluator evaluator;
    /// Ascending sensitivity; least sensitive first.
    std::vector<std::string> ordering;
    std::vector<int> candidate_bits;
    double target_fraction = 0.99;
    double baseline_accuracy = 1.0;
    int baseline_bits = 16;
};

enum class SearchAlgorithm { bisection, greedy };

const char* to_string(SearchAlgorithm a) noexcept;
std::optional<SearchAlgorithm> parse_algorithm(std::string_view s);

/// Candidate widths strictly below baseline, highest first, deduplicated.
std::vector<int> search_levels(std::span<const int> candidate_bits, int baseline_bits);

/// Evaluation budgets for `levels` bit widths below baseline over N tensors.
std::size_t bisection_budget(std::size_t n, std::size_t levels);
std::size_t greedy_budget(std::size_t n, std::size_t levels);

SearchOutcome bisection_search(const SearchProblem& problem);
SearchOutcome greedy_search(const SearchProblem& problem);
SearchOutcome run_search(SearchAlgorithm algo, const SearchProblem& problem);

/// Scales per bit width: bank[b][tensor] was calibrated (and adjusted) at b.
using SpecBank = std::map<int, QuantMap>;

/// Spec map for a configuration. Every tensor below baseline must have a spec
/// in the bank at its width. An affine layer's output activation is quantized
/// at its weight's width when the bank holds a spec for it.
QuantMap specs_for_config(const ModelGraph& model, const SpecBank& bank, const QuantConfig& config);

/// Top-1 accuracy of the model under `config`.
double evaluate_config(const ModelGraph& model, const Dataset& data, const SpecBank& bank,
                       const QuantConfig& config);

}  // namespace mpq
