// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deployment cost estimates. Size counts parameter storage only; latency sums
// measured matmul kernel latencies looked up per affine layer at batch size 1.

#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <string>

#include "mpq/graph.hpp"
#include "mpq/quant_config.hpp"

namespace mpq {

enum class KernelKind { matmul };

/// Kernel key. For an affine layer with weight out x in at batch size 1:
/// m = 1, n = out_dim, k = in_dim.
struct KernelKey {
    KernelKind kind = KernelKind::matmul;
    std::size_t m = 0;
    std::size_t n = 0;
    std::size_t k = 0;
    int bits = 16;

    auto operator<=>(const KernelKey&) const = default;
};

std::string describe(const KernelKey& key);

class LatencyTable {
public:
    /// Throws on duplicate keys or non-positive latency.
    void add(const KernelKey& key, double latency_us);
    double lookup(const KernelKey& key) const;
    bool contains(const KernelKey& key) const { return entries_.count(key) != 0; }
    std::size_t size() const { return entries_.size(); }
    const std::map<KernelKey, double>& entries() const { return entries_; }

    /// CSV with header `kind,m,n,k,bits,latency_us`.
    static LatencyTable parse_csv(const std::string& text);
    static LatencyTable load_csv(const std::filesystem::path& path);
    std::string to_csv() const;

private:
    std::map<KernelKey, double> entries_;
};

/// Key used for an affine layer at the given width.
KernelKey affine_kernel(const Layer& layer, int bits);

/// Sum over parameter tensors of numel * bits / 8, in bytes.
double model_size(const ModelGraph& model, const QuantConfig& config);

/// Sum over affine layers of the table latency at the layer weight's width.
double model_latency(const ModelGraph& model, const QuantConfig& config, const LatencyTable& table);

struct CostReport {
    double size_bytes = 0.0;
    double latency_us = 0.0;
    double relative_size = 0.0;
    double relative_latency = 0.0;
    double baseline_size_bytes = 0.0;
    double baseline_latency_us = 0.0;

    double size_megabytes() const { return size_bytes / 1e6; }

    friend bool operator==(const CostReport&, const CostReport&) = default;
};

/// Absolute and relative cost versus every parameter at `baseline_bits`.
CostReport cost_report(const ModelGraph& model, const QuantConfig& config, const LatencyTable& table,
                       int baseline_bits);

}  // namespace mpq
