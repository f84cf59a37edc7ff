// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dual-scale fake quantization, max-abs calibration and scale adjustment by
// gradient descent on the scales alone.

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mpq/graph.hpp"
#include "mpq/quant_spec.hpp"

namespace mpq {

/// round(clip(alpha x, -1, 1) 2^(b-1)) 2^-(b-1) gamma. Rounding is half away from zero.
double quantize_value(double x, const QuantSpec& spec);

std::vector<float> quantize(std::span<const float> x, const QuantSpec& spec);

/// RMS(Q(x) - x) / max|x|. Throws Error(invalid_argument) for all-zero x.
double quantization_error(std::span<const float> x, const QuantSpec& spec);

/// alpha = 1/m, gamma = m; m == 0 falls back to alpha = gamma = 1.
QuantSpec spec_from_max(double max_abs, int bits);

double max_abs(std::span<const float> x);

struct CalibrationOutcome {
    QuantMap specs;
    /// Calibration-set loss before adjustment followed by one entry per epoch.
    std::vector<double> adjustment_log;
};

using BitsMap = std::map<std::string, int, std::less<>>;

/// Max-abs calibration. Weight tensors use their values; activation tensors
/// use the max over every calibration batch of an unquantized forward pass.
CalibrationOutcome calibrate(const ModelGraph& model, const Dataset& data, const BitsMap& bits,
                             std::size_t batch_size = 256);

struct AdjustOptions {
    double lr = 1e-5;
    int epochs = 20;
    /// 0 means one full-batch step per epoch.
    std::size_t batch_size = 0;
};

/// Gradient descent on {alpha, gamma} of every spec with all tensors quantized
/// simultaneously. Model weights are read-only.
CalibrationOutcome adjust_scales(const ModelGraph& model, const Dataset& data,
                                 const CalibrationOutcome& outcome, const AdjustOptions& options);

inline CalibrationOutcome adjust_scales(const ModelGraph& model, const Dataset& data,
                                        const CalibrationOutcome& outcome, double lr, int epochs) {
    return adjust_scales(model, data, outcome, AdjustOptions{lr, epochs, 0});
}

}  // namespace mpq
