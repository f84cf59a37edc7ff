// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "mpq/cost_model.hpp"
#include "mpq/error.hpp"

namespace mpq {
namespace {

LatencyTable table_for(const ModelGraph& m, double per_bit) {
    LatencyTable t;
    for (const auto& l : m.layers()) {
        if (l.kind != LayerKind::affine) continue;
        for (int b = 2; b <= 16; ++b) {
            const auto key = affine_kernel(l, b);
            if (!t.contains(key)) t.add(key, per_bit * b * static_cast<double>(l.in_dim * l.out_dim));
        }
    }
    return t;
}

ModelGraph two_layer() {
    return ModelGraph({Layer::affine("a", 4, 8), Layer::relu("r"), Layer::affine("b", 8, 2)});
}

TEST(ModelSize, EmptyModelIsZero) {
    const ModelGraph m;
    EXPECT_EQ(model_size(m, QuantConfig{}), 0.0);
}

TEST(ModelSize, HalfAtEightIsThreeQuarters) {
    const ModelGraph m({Layer::affine("a", 10, 10, std::vector<float>(100), std::vector<float>(10)),
                        Layer::affine("b", 10, 10, std::vector<float>(100), std::vector<float>(10))});
    auto c = uniform_config(m.parameter_names(), 16);
    c.bits["a.weight"] = 8;
    c.bits["a.bias"] = 8;
    EXPECT_EQ(model_size(m, c) / model_size(m, uniform_config(m.parameter_names(), 16)), 0.75);
}

TEST(ModelSize, MissingTensorIsError) {
    const auto m = two_layer();
    auto c = uniform_config(m.parameter_names(), 16);
    c.bits.erase("b.bias");
    EXPECT_THROW(model_size(m, c), Error);
}

TEST(ModelSizeProperty, LinearAndMonotone) {
    const auto m = two_layer();
    std::mt19937_64 rng(1);
    const auto names = m.parameter_names();
    const auto table = table_for(m, 0.01);
    for (int t = 0; t < 100; ++t) {
        QuantConfig c = uniform_config(names, 16);
        for (const auto& n : names) c.bits[n] = 2 + static_cast<int>(rng() % 7);
        QuantConfig doubled = c;
        for (auto& [n, b] : doubled.bits) b *= 2;
        EXPECT_EQ(model_size(m, doubled), 2.0 * model_size(m, c));
        for (const auto& n : names) {
            QuantConfig lower = c;
            if (lower.bits[n] > 2) --lower.bits[n];
            EXPECT_LE(model_size(m, lower), model_size(m, c));
            EXPECT_LE(model_latency(m, lower, table), model_latency(m, c, table));
        }
    }
}

TEST(ModelLatency, SumsTableEntries) {
    const ModelGraph one({Layer::affine("a", 3, 2)});
    LatencyTable t1;
    t1.add(affine_kernel(one.layers()[0], 16), 7.5);
    EXPECT_EQ(model_latency(one, uniform_config(one.parameter_names(), 16), t1), 7.5);

    const auto m = two_layer();
    LatencyTable t;
    t.add(KernelKey{KernelKind::matmul, 1, 8, 4, 16}, 3.0);
    t.add(KernelKey{KernelKind::matmul, 1, 2, 8, 16}, 4.0);
    EXPECT_EQ(model_latency(m, uniform_config(m.parameter_names(), 16), t), 7.0);
}

TEST(ModelLatency, HalfCostTableGivesHalfLatency) {
    const auto m = two_layer();
    LatencyTable t;
    for (const auto& l : m.layers()) {
        if (l.kind != LayerKind::affine) continue;
        t.add(affine_kernel(l, 16), 10.0 * static_cast<double>(l.out_dim));
        t.add(affine_kernel(l, 4), 5.0 * static_cast<double>(l.out_dim));
    }
    const auto r = cost_report(m, uniform_config(m.parameter_names(), 4), t, 16);
    EXPECT_EQ(r.relative_latency, 0.5);
}

TEST(ModelLatency, MissingKeyNamesLayerAndKey) {
    const auto m = two_layer();
    LatencyTable t;
    t.add(KernelKey{KernelKind::matmul, 1, 8, 4, 16}, 3.0);
    try {
        (void)model_latency(m, uniform_config(m.parameter_names(), 16), t);
        FAIL();
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("'b'"), std::string::npos) << msg;
        EXPECT_NE(msg.find("n=2"), std::string::npos) << msg;
    }
}

TEST(CostReport, BaselineAndUniformEight) {
    const auto m = two_layer();
    const auto t = table_for(m, 0.5);
    const auto base = cost_report(m, uniform_config(m.parameter_names(), 16), t, 16);
    EXPECT_EQ(base.relative_size, 1.0);
    EXPECT_EQ(base.relative_latency, 1.0);
    const auto eight = cost_report(m, uniform_config(m.parameter_names(), 8), t, 16);
    EXPECT_EQ(eight.relative_size, 0.5);
}

TEST(CostReport, MixedConfigMatchesHandSummation) {
    const auto m = two_layer();
    const auto t = table_for(m, 0.25);
    QuantConfig c = uniform_config(m.parameter_names(), 16);
    c.bits["a.weight"] = 4;
    c.bits["a.bias"] = 8;
    c.bits["b.weight"] = 8;
    const auto r = cost_report(m, c, t, 16);
    const double size = (32 * 4 + 8 * 8 + 16 * 8 + 2 * 16) / 8.0;
    const double base_size = (32 + 8 + 16 + 2) * 16 / 8.0;
    const double lat = 0.25 * 4 * 32 + 0.25 * 8 * 16;
    const double base_lat = 0.25 * 16 * 32 + 0.25 * 16 * 16;
    EXPECT_EQ(r.size_bytes, size);
    EXPECT_EQ(r.baseline_size_bytes, base_size);
    EXPECT_DOUBLE_EQ(r.relative_size, size / base_size);
    EXPECT_DOUBLE_EQ(r.latency_us, lat);
    EXPECT_DOUBLE_EQ(r.relative_latency, lat / base_lat);
}

TEST(LatencyTable, CsvRoundTrip) {
    const auto t = table_for(two_layer(), 0.1234567);
    const auto back = LatencyTable::parse_csv(t.to_csv());
    EXPECT_EQ(back.entries(), t.entries());
}

TEST(LatencyTable, ParsesAndRejects) {
    const auto t = LatencyTable::parse_csv("kind,m,n,k,bits,latency_us\nmatmul,1,8,4,16,3.5\n\nmatmul,1,8,4,8,2\n");
    EXPECT_EQ(t.size(), 2u);
    EXPECT_EQ(t.lookup(KernelKey{KernelKind::matmul, 1, 8, 4, 8}), 2.0);
    EXPECT_THROW(LatencyTable::parse_csv("matmul,1,8,4,16,3.5\n"), Error);
    EXPECT_THROW(LatencyTable::parse_csv("kind,m,n,k,bits,latency_us\nmatmul,1,8,4,16,3.5\nmatmul,1,8,4,16,3.0\n"),
                 Error);
    EXPECT_THROW(LatencyTable::parse_csv("kind,m,n,k,bits,latency_us\nconv,1,8,4,16,3.5\n"), Error);
    EXPECT_THROW(LatencyTable::parse_csv("kind,m,n,k,bits,latency_us\nmatmul,1,8,4,16\n"), Error);
    EXPECT_THROW(LatencyTable::parse_csv("kind,m,n,k,bits,latency_us\nmatmul,1,8,x,16,1\n"), Error);
    EXPECT_THROW(LatencyTable::parse_csv("kind,m,n,k,bits,latency_us\nmatmul,1,8,4,16,0\n"), Error);
    EXPECT_THROW(LatencyTable::load_csv("/nonexistent/latency.csv"), Error);
}

}  // namespace
}  // namespace mpq
