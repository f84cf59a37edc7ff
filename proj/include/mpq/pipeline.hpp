// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end orchestration behind the `mpq` command line tool.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mpq/search.hpp"
#include "mpq/sensitivity.hpp"
#include "mpq/serialize.hpp"

namespace mpq {

namespace fs = std::filesystem;

struct FixtureSpec {
    /// Input width followed by every affine layer's output width.
    std::vector<std::size_t> dims{16, 32, 32, 32, 32, 32, 2};
    std::size_t examples = 2048;
    std::size_t eval_examples = 2048;
    std::uint64_t seed = 1;
};

struct FixtureFiles {
    fs::path model;
    fs::path calib;
    fs::path eval;
    fs::path latency_table;
    double calib_accuracy = 0.0;
    double eval_accuracy = 0.0;
};

/// Teacher-labelled synthetic fixture: random relu network whose own argmax
/// defines the labels, plus a bits-monotone latency table for its layers.
FixtureFiles cmd_gen_fixture(const FixtureSpec& spec, const fs::path& out_dir);

struct PipelineConfig {
    fs::path model;
    fs::path calib;
    fs::path eval;
    fs::path latency_table;
    fs::path out;
    Metric metric = Metric::hessian;
    SearchAlgorithm algo = SearchAlgorithm::greedy;
    std::vector<int> bits{8, 4};
    double target = 0.99;
    std::uint64_t seed = 42;
    double lambda = 0.05;
    int trials = 5;
    int probes = 128;
    double lr = 1e-5;
    int epochs = 20;
    int baseline_bits = 16;
    std::size_t sensitivity_samples = 256;
    std::size_t calibration_samples = 256;
    /// Independent sensitivity seeds, seed + r for r in [0, repeats).
    int repeats = 1;
    std::size_t threads = 1;
    bool hessian_raw = false;
    bool noise_accuracy = false;
};

/// Throws Error(config) on any invalid knob.
void validate(const PipelineConfig& config);

Json to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const Json& j);

struct RepeatResult {
    std::uint64_t metric_seed = 0;
    SensitivityReport sensitivity;
    SearchOutcome outcome;
    double verified_accuracy = 0.0;
    CostReport cost;
};

struct RunResult {
    double baseline_accuracy = 0.0;
    std::vector<RepeatResult> repeats;
    Json summary;
};

/// Calibrate + adjust per bit width, score, search and cost every repeat.
/// Writes manifest.json, specs.json, calibration.json, summary.json and, for
/// each repeat, sensitivity.json, config.json, search.json and cost.json
/// (repeat 0 at the top level, repeat r under repeats/<r>/).
RunResult cmd_run(const PipelineConfig& config);

struct CompareResult {
    Json report;
    std::string table;
};

/// Metric x algorithm table of relative size and latency across runs, plus
/// ordering distances between the runs' sensitivity orderings.
CompareResult cmd_compare(const std::vector<fs::path>& run_dirs);

}  // namespace mpq
