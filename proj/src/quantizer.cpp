// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#include "mpq/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mpq/error.hpp"

namespace mpq {

void validate(const QuantSpec& spec) {
    if (!(spec.alpha > 0.0) || !std::isfinite(spec.alpha) || !(spec.gamma > 0.0) ||
        !std::isfinite(spec.gamma)) {
        throw Error(ErrorKind::invalid_argument, "quantizer scales must be positive and finite");
    }
    if (spec.bits < kMinBits || spec.bits > kMaxBits) {
        throw Error(ErrorKind::invalid_argument,
                    "bit width " + std::to_string(spec.bits) + " outside [2, 16]");
    }
}

double quantize_value(double x, const QuantSpec& spec) {
    const double levels = std::ldexp(1.0, spec.bits - 1);
    const double clipped = std::clamp(spec.alpha * x, -1.0, 1.0);
    // std::round on the scaled value rounds half away from zero.
    const double k = std::round(clipped * levels);
    return k * spec.gamma / levels;
}

std::vector<float> quantize(std::span<const float> x, const QuantSpec& spec) {
    std::vector<float> out(x.size());
    std::transform(x.begin(), x.end(), out.begin(),
                   [&](float v) { return static_cast<float>(quantize_value(v, spec)); });
    return out;
}

double max_abs(std::span<const float> x) {
    double m = 0.0;
    for (float v : x) m = std::max(m, static_cast<double>(std::fabs(v)));
    return m;
}

double quantization_error(std::span<const float> x, const QuantSpec& spec) {
    const double m = max_abs(x);
    if (m == 0.0) {
        throw Error(ErrorKind::invalid_argument,
                    "quantization error is undefined for an all-zero tensor");
    }
    double sq = 0.0;
    for (float v : x) {
        const double e = quantize_value(v, spec) - static_cast<double>(v);
        sq += e * e;
    }
    return std::sqrt(sq / static_cast<double>(x.size())) / m;
}

QuantSpec spec_from_max(double m, int bits) {
    QuantSpec s;
    s.bits = bits;
    if (m > 0.0) {
        s.alpha = 1.0 / m;
        s.gamma = m;
    }
    validate(s);
    return s;
}

CalibrationOutcome calibrate(const ModelGraph& model, const Dataset& data, const BitsMap& bits,
                             std::size_t batch_size) {
    if (data.size() == 0) throw Error(ErrorKind::invalid_argument, "calibration dataset is empty");
    const bool any_activation = std::any_of(bits.begin(), bits.end(), [&](const auto& kv) {
        return model.has_activation(kv.first);
    });
    std::map<std::string, double, std::less<>> act_max;
    if (any_activation) act_max = activation_abs_max(model, data, batch_size);

    CalibrationOutcome out;
    for (const auto& [name, b] : bits) {
        double m = 0.0;
        if (model.has_parameter(name)) {
            m = max_abs(model.parameter(name));
        } else if (model.has_activation(name)) {
            m = act_max.at(name);
        } else {
            throw Error(ErrorKind::unknown_tensor, "cannot calibrate unknown tensor '" + name + "'");
        }
        out.specs[name] = spec_from_max(m, b);
    }
    return out;
}

namespace {

// Gradient steps that would make a scale non-positive halve it instead.
double step_scale(double value, double grad, double lr, int epoch) {
    const double next = value - lr * grad;
    if (!std::isfinite(next)) {
        throw Error(ErrorKind::non_finite, "non-finite scale update at epoch " + std::to_string(epoch));
    }
    return next > 0.0 ? next : 0.5 * value;
}

double quantized_loss(const ModelGraph& model, const Dataset& data, const QuantMap& specs, int epoch) {
    try {
        return forward(model, data, &specs).loss;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::non_finite) throw;
        throw Error(ErrorKind::non_finite,
                    "non-finite calibration loss at epoch " + std::to_string(epoch));
    }
}

}  // namespace

CalibrationOutcome adjust_scales(const ModelGraph& model, const Dataset& data,
                                 const CalibrationOutcome& outcome, const AdjustOptions& options) {
    if (!(options.lr >= 0.0) || !std::isfinite(options.lr)) {
        throw Error(ErrorKind::invalid_argument, "learning rate must be finite and non-negative");
    }
    if (options.epochs < 1) throw Error(ErrorKind::invalid_argument, "epochs must be >= 1");
    if (data.size() == 0) throw Error(ErrorKind::invalid_argument, "calibration dataset is empty");
    if (outcome.specs.empty()) return outcome;

    CalibrationOutcome out = outcome;
    out.adjustment_log.clear();
    out.adjustment_log.push_back(quantized_loss(model, data, out.specs, 0));

    const std::size_t batch = options.batch_size == 0 ? data.size() : std::min(options.batch_size, data.size());
    std::vector<Dataset> batches;
    if (batch < data.size()) {
        std::vector<std::size_t> idx;
        for (std::size_t start = 0; start < data.size(); start += batch) {
            idx.resize(std::min(batch, data.size() - start));
            std::iota(idx.begin(), idx.end(), start);
            batches.push_back(data.subset(idx));
        }
    }

    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        auto step = [&](const Dataset& d) {
            BackwardResult r;
            try {
                r = backward(model, d, &out.specs, {}, true);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::non_finite) throw;
                throw Error(ErrorKind::non_finite,
                            "non-finite calibration loss at epoch " + std::to_string(epoch));
            }
            for (auto& [name, spec] : out.specs) {
                const ScaleGradient& g = r.scales.at(name);
                spec.alpha = step_scale(spec.alpha, g.alpha, options.lr, epoch);
                spec.gamma = step_scale(spec.gamma, g.gamma, options.lr, epoch);
            }
        };
        if (batches.empty()) {
            step(data);
        } else {
            for (const Dataset& d : batches) step(d);
        }
        out.adjustment_log.push_back(quantized_loss(model, data, out.specs, epoch));
    }
    return out;
}

}  // namespace mpq
