// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#include "mpq/serialize.hpp"

#include "mpq/error.hpp"
#include "mpq/model_io.hpp"

namespace mpq {

namespace {

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
    try {
        return fn();
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::data, std::string("malformed ") + what + ": " + e.what());
    }
}

Json bits_to_json(const BitWidths& bits) {
    Json j = Json::object();
    for (const auto& [name, b] : bits) j[name] = b;
    return j;
}

BitWidths bits_from_json(const Json& j) {
    BitWidths bits;
    for (const auto& [name, b] : j.items()) bits[name] = b.get<int>();
    return bits;
}

}  // namespace

Json to_json(const QuantMap& specs) {
    Json j = Json::object();
    for (const auto& [name, s] : specs) j[name] = {{"alpha", s.alpha}, {"gamma", s.gamma}, {"bits", s.bits}};
    return j;
}

QuantMap quant_map_from_json(const Json& j) {
    return guarded("quantizer specs", [&] {
        QuantMap specs;
        for (const auto& [name, js] : j.items()) {
            QuantSpec s{js.at("alpha").get<double>(), js.at("gamma").get<double>(), js.at("bits").get<int>()};
            validate(s);
            specs[name] = s;
        }
        return specs;
    });
}

Json to_json(const SpecBank& bank) {
    Json j = Json::object();
    for (const auto& [b, specs] : bank) j[std::to_string(b)] = to_json(specs);
    return j;
}

SpecBank spec_bank_from_json(const Json& j) {
    return guarded("spec bank", [&] {
        SpecBank bank;
        for (const auto& [b, specs] : j.items()) bank[std::stoi(b)] = quant_map_from_json(specs);
        return bank;
    });
}

Json to_json(const SensitivityReport& r) {
    Json scores = Json::object();
    for (const auto& [name, s] : r.scores) scores[name] = {{"mean", s.mean}, {"std", s.std}, {"trials", s.trials}};
    return {{"metric", to_string(r.metric)}, {"seed", r.seed}, {"scores", scores}, {"ordering", r.ordering}};
}

SensitivityReport sensitivity_report_from_json(const Json& j) {
    return guarded("sensitivity report", [&] {
        SensitivityReport r;
        const auto m = parse_metric(j.at("metric").get<std::string>());
        if (!m) throw Error(ErrorKind::data, "unknown metric in sensitivity report");
        r.metric = *m;
        r.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& [name, s] : j.at("scores").items()) {
            r.scores[name] = Score{s.at("mean").get<double>(), s.at("std").get<double>(), s.at("trials").get<int>()};
        }
        r.ordering = j.at("ordering").get<std::vector<std::string>>();
        return r;
    });
}

Json to_json(const QuantConfig& c) {
    return {{"baseline_bits", c.baseline_bits}, {"bits", bits_to_json(c.bits)}};
}

QuantConfig quant_config_from_json(const Json& j) {
    return guarded("quant config", [&] {
        QuantConfig c;
        c.baseline_bits = j.at("baseline_bits").get<int>();
        c.bits = bits_from_json(j.at("bits"));
        return c;
    });
}

Json to_json(const SearchOutcome& o) {
    Json trace = Json::array();
    for (const auto& e : o.trace) {
        trace.push_back({{"delta", bits_to_json(e.delta)}, {"accuracy", e.accuracy}, {"accepted", e.accepted}});
    }
    return {{"config", to_json(o.config)},
            {"evals", o.evals},
            {"target_fraction", o.target_fraction},
            {"target", o.target},
            {"baseline_accuracy", o.baseline_accuracy},
            {"achieved_accuracy", o.achieved_accuracy},
            {"trace", trace}};
}

SearchOutcome search_outcome_from_json(const Json& j) {
    return guarded("search outcome", [&] {
        SearchOutcome o;
        o.config = quant_config_from_json(j.at("config"));
        o.evals = j.at("evals").get<int>();
        o.target_fraction = j.at("target_fraction").get<double>();
        o.target = j.at("target").get<double>();
        o.baseline_accuracy = j.at("baseline_accuracy").get<double>();
        o.achieved_accuracy = j.at("achieved_accuracy").get<double>();
        for (const auto& e : j.at("trace")) {
            o.trace.push_back({bits_from_json(e.at("delta")), e.at("accuracy").get<double>(),
                               e.at("accepted").get<bool>()});
        }
        return o;
    });
}

Json to_json(const CostReport& r) {
    return {{"size_bytes", r.size_bytes},
            {"size_mb", r.size_megabytes()},
            {"latency_us", r.latency_us},
            {"relative_size", r.relative_size},
            {"relative_latency", r.relative_latency},
            {"baseline_size_bytes", r.baseline_size_bytes},
            {"baseline_latency_us", r.baseline_latency_us}};
}

CostReport cost_report_from_json(const Json& j) {
    return guarded("cost report", [&] {
        CostReport r;
        r.size_bytes = j.at("size_bytes").get<double>();
        r.latency_us = j.at("latency_us").get<double>();
        r.relative_size = j.at("relative_size").get<double>();
        r.relative_latency = j.at("relative_latency").get<double>();
        r.baseline_size_bytes = j.at("baseline_size_bytes").get<double>();
        r.baseline_latency_us = j.at("baseline_latency_us").get<double>();
        return r;
    });
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_json(const std::filesystem::path& path, const Json& j) { write_text_file(path, dump(j)); }

Json read_json(const std::filesystem::path& path) {
    try {
        return Json::parse(read_text_file(path));
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::data, "malformed JSON in '" + path.string() + "': " + e.what());
    }
}

}  // namespace mpq
