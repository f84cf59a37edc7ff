// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small differentiable inference engine: a chain of affine and relu layers
// with a softmax cross-entropy (or squared-error) head. Parameters and
// activations are stored at 32-bit float; matmuls and reductions accumulate in
// double, and the loss head reads the final layer's output unrounded.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mpq/quant_spec.hpp"

namespace mpq {

enum class LayerKind { affine, relu };
enum class LossKind { softmax_cross_entropy, squared_error };

const char* to_string(LayerKind kind) noexcept;
const char* to_string(LossKind kind) noexcept;

struct Layer {
    std::string name;
    LayerKind kind = LayerKind::affine;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<float> weight;  // out_dim x in_dim, row-major
    std::vector<float> bias;    // out_dim

    static Layer affine(std::string name, std::size_t in_dim, std::size_t out_dim);
    static Layer affine(std::string name, std::size_t in_dim, std::size_t out_dim,
                        std::vector<float> weight, std::vector<float> bias);
    static Layer relu(std::string name);
};

// Tensor naming convention shared by every module.
std::string weight_name(std::string_view layer);
std::string bias_name(std::string_view layer);
std::string activation_name(std::string_view layer);

struct ParamInfo {
    std::string name;
    std::size_t layer_index = 0;
    bool is_weight = true;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t numel() const { return rows * cols; }
};

class ModelGraph {
public:
    ModelGraph() = default;
    /// Validates names, dimension chaining and finiteness; relu dims are inferred.
    explicit ModelGraph(std::vector<Layer> layers, LossKind loss = LossKind::softmax_cross_entropy);

    const std::vector<Layer>& layers() const { return layers_; }
    LossKind loss() const { return loss_; }
    bool empty() const { return layers_.empty(); }
    std::size_t input_dim() const;
    std::size_t output_dim() const;

    /// Parameter tensors in layer order, weight before bias.
    const std::vector<ParamInfo>& parameters() const { return params_; }
    std::vector<std::string> parameter_names() const;
    /// One activation tensor per layer output.
    std::vector<std::string> activation_names() const;

    bool has_parameter(std::string_view name) const;
    bool has_activation(std::string_view name) const;
    const ParamInfo& parameter_info(std::string_view name) const;
    std::span<const float> parameter(std::string_view name) const;
    std::size_t parameter_count() const;

    /// Hash over all parameter bytes in declaration order.
    std::uint64_t parameter_hash() const;

private:
    std::vector<Layer> layers_;
    LossKind loss_ = LossKind::softmax_cross_entropy;
    std::vector<ParamInfo> params_;
};

class Dataset {
public:
    Dataset() = default;
    Dataset(std::size_t feature_dim, std::size_t num_classes, std::vector<float> features,
            std::vector<std::uint32_t> labels);

    std::size_t size() const { return labels_.size(); }
    std::size_t feature_dim() const { return feature_dim_; }
    std::size_t num_classes() const { return num_classes_; }
    std::span<const float> features() const { return features_; }
    std::span<const std::uint32_t> labels() const { return labels_; }
    std::span<const float> example(std::size_t i) const;

    Dataset subset(std::span<const std::size_t> indices) const;

private:
    std::size_t feature_dim_ = 0;
    std::size_t num_classes_ = 0;
    std::vector<float> features_;
    std::vector<std::uint32_t> labels_;
};

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;

    friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

/// Substitute values for one parameter tensor without touching the model.
struct ParamOverride {
    std::string_view name;
    std::span<const float> values;
};

using GradientMap = std::map<std::string, std::vector<float>, std::less<>>;

struct ScaleGradient {
    double alpha = 0.0;
    double gamma = 0.0;
};

struct BackwardResult {
    EvalResult eval;
    GradientMap params;
    std::map<std::string, ScaleGradient, std::less<>> scales;
};

/// Mean loss and top-1 accuracy. When `quant` is given, every named weight,
/// bias or activation tensor passes through the quantizer before use.
EvalResult forward(const ModelGraph& model, const Dataset& data, const QuantMap* quant = nullptr,
                   std::span<const ParamOverride> overrides = {});

/// Network outputs (N x output_dim) for a row-major feature matrix.
std::vector<float> compute_logits(const ModelGraph& model, std::span<const float> features,
                                  const QuantMap* quant = nullptr);

/// Reverse-mode gradients of the mean (unquantized) loss.
GradientMap gradients(const ModelGraph& model, const Dataset& data,
                      std::span<const std::string> wrt,
                      std::span<const ParamOverride> overrides = {});

/// Full backward pass, optionally through quantizers. Rounding uses a
/// straight-through estimator; clipping passes gradient only inside [-1, 1].
/// Scale gradients are reported for every tensor in `quant` when requested.
BackwardResult backward(const ModelGraph& model, const Dataset& data, const QuantMap* quant,
                        std::span<const std::string> wrt, bool want_scale_gradients,
                        std::span<const ParamOverride> overrides = {});

/// Step used by hessian_vector_product for a tensor with the given values.
double hvp_step(std::span<const float> values);

/// H v for the diagonal block of `tensor`, via central differences of
/// gradients with step hvp_step(w). The model itself is never modified.
std::vector<float> hessian_vector_product(const ModelGraph& model, const Dataset& data,
                                          std::string_view tensor, std::span<const float> v);

/// Max |value| of every layer output over the dataset, processed in batches.
std::map<std::string, double, std::less<>> activation_abs_max(const ModelGraph& model,
                                                              const Dataset& data,
                                                              std::size_t batch_size = 256);

}  // namespace mpq
