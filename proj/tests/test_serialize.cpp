// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "mpq/error.hpp"
#include "mpq/serialize.hpp"

namespace mpq {
namespace {

template <typename T, typename Parse>
T round_trip(const T& value, Parse parse) {
    return parse(Json::parse(dump(to_json(value))));
}

TEST(SerializeProperty, QuantMapDoublesRoundTripExactly) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(1e-6, 1e3);
    for (int t = 0; t < 50; ++t) {
        QuantMap m;
        for (int i = 0; i < 10; ++i) m["t" + std::to_string(i)] = QuantSpec{u(rng), u(rng) / 7.0, 2 + i};
        EXPECT_EQ(round_trip(m, quant_map_from_json), m);
    }
}

TEST(Serialize, SpecBankRoundTrip) {
    const SpecBank bank{{8, {{"a.weight", QuantSpec{0.1, 10.0, 8}}}}, {4, {{"a.weight", QuantSpec{1.0 / 3, 3.0, 4}}}}};
    EXPECT_EQ(round_trip(bank, spec_bank_from_json), bank);
}

TEST(Serialize, SensitivityReportRoundTrip) {
    SensitivityReport r;
    r.metric = Metric::noise;
    r.seed = 1234567890123ULL;
    r.scores = {{"a", {0.125, 0.01, 5}}, {"b", {-3e-9, 1e-10, 5}}};
    r.ordering = {"b", "a"};
    EXPECT_EQ(round_trip(r, sensitivity_report_from_json), r);
}

TEST(Serialize, ConfigOutcomeAndCostRoundTrip) {
    QuantConfig c{{{"a", 8}, {"b", 16}}, 16};
    EXPECT_EQ(round_trip(c, quant_config_from_json), c);

    SearchOutcome o;
    o.config = c;
    o.evals = 2;
    o.target_fraction = 0.99;
    o.baseline_accuracy = 0.93;
    o.target = 0.99 * 0.93;
    o.achieved_accuracy = 0.925;
    o.trace = {TraceEntry{{{"a", 8}}, 0.925, true}, TraceEntry{{{"a", 8}, {"b", 8}}, 0.5, false}};
    EXPECT_EQ(round_trip(o, search_outcome_from_json), o);

    CostReport r{100.5, 7.25, 0.5, 0.75, 201.0, 9.0 + 2.0 / 3.0};
    EXPECT_EQ(round_trip(r, cost_report_from_json), r);
}

TEST(Serialize, MalformedInputIsDataError) {
    for (const char* text : {R"({"a.weight": {"alpha": 1}})", R"([1, 2])", R"({"a": {"alpha": "x", "gamma": 1, "bits": 4}})"}) {
        try {
            (void)quant_map_from_json(Json::parse(text));
            FAIL() << text;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::data) << text;
        }
    }
    EXPECT_THROW(read_json("/nonexistent/x.json"), Error);
}

TEST(Serialize, DumpEndsWithNewline) {
    const std::string s = dump(Json{{"x", 1}});
    ASSERT_FALSE(s.empty());
    EXPECT_EQ(s.back(), '\n');
}

}  // namespace
}  // namespace mpq
