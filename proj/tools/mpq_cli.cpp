// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "mpq/error.hpp"
#include "mpq/pipeline.hpp"
#include "mpq/serialize.hpp"

namespace {

enum ExitCode : int { ok = 0, internal = 1, config_error = 2, data_error = 3, unreachable = 4 };

int exit_code(mpq::ErrorKind kind) {
    switch (kind) {
        case mpq::ErrorKind::invalid_argument:
        case mpq::ErrorKind::config:
            return config_error;
        case mpq::ErrorKind::target_unreachable:
            return unreachable;
        case mpq::ErrorKind::shape_mismatch:
        case mpq::ErrorKind::unknown_tensor:
        case mpq::ErrorKind::non_finite:
        case mpq::ErrorKind::data:
            return data_error;
    }
    return internal;
}


}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixed-precision post-training quantization toolkit"};
    app.require_subcommand(1);

    mpq::FixtureSpec fixture;
    std::string fixture_out;
    auto* gen = app.add_subcommand("gen-fixture", "Write a seeded teacher-labelled model, datasets and latency table");
    gen->add_option("--out", fixture_out, "Output directory")->required();
    gen->add_option("--seed", fixture.seed, "Fixture seed")->capture_default_str();
    gen->add_option("--dims", fixture.dims, "Input width then each affine layer's output width")
        ->delimiter(',')
        ->capture_default_str();
    gen->add_option("--examples", fixture.examples, "Calibration pool size")->capture_default_str();
    gen->add_option("--eval-examples", fixture.eval_examples, "Eval split size")->capture_default_str();

    mpq::PipelineConfig cfg;
    std::string manifest;
    std::string out;
    auto* run = app.add_subcommand("run", "Calibrate, score sensitivity, search and report costs");
    run->add_option("--manifest", manifest, "Re-run from a previous run's manifest.json");
    run->add_option("--model", cfg.model, "Model manifest");
    run->add_option("--calib", cfg.calib, "Calibration dataset manifest");
    run->add_option("--eval", cfg.eval, "Eval dataset manifest");
    run->add_option("--latency-table", cfg.latency_table, "Latency table CSV");
    run->add_option("--out", out, "Output directory");
    std::string metric = mpq::to_string(cfg.metric);
    std::string algo = mpq::to_string(cfg.algo);
    run->add_option("--metric", metric, "Sensitivity metric")
        ->check(CLI::IsMember({"qe", "noise", "hessian", "random"}))
        ->capture_default_str();
    run->add_option("--algo", algo, "Search algorithm")
        ->check(CLI::IsMember({"bisection", "greedy"}))
        ->capture_default_str();
    run->add_option("--bits", cfg.bits, "Candidate bit widths")->delimiter(',')->capture_default_str();
    run->add_option("--target", cfg.target, "Relative accuracy target")->capture_default_str();
    run->add_option("--seed", cfg.seed, "Root seed")->capture_default_str();
    run->add_option("--lambda", cfg.lambda, "Noise scale relative to max |w|")->capture_default_str();
    run->add_option("--trials", cfg.trials, "Noise trials per tensor")->capture_default_str();
    run->add_option("--probes", cfg.probes, "Hutchinson probes per tensor")->capture_default_str();
    run->add_option("--lr", cfg.lr, "Scale adjustment learning rate")->capture_default_str();
    run->add_option("--epochs", cfg.epochs, "Scale adjustment epochs")->capture_default_str();
    run->add_option("--baseline-bits", cfg.baseline_bits, "Unquantized reference width")->capture_default_str();
    run->add_option("--sensitivity-samples", cfg.sensitivity_samples, "Examples used for scoring")
        ->capture_default_str();
    run->add_option("--calibration-samples", cfg.calibration_samples, "Examples used for calibration")
        ->capture_default_str();
    run->add_option("--repeats", cfg.repeats, "Repeat with metric seeds seed..seed+repeats-1")->capture_default_str();
    run->add_option("--threads", cfg.threads, "Worker threads for sensitivity scoring")->capture_default_str();
    run->add_flag("--hessian-raw", cfg.hessian_raw, "Report raw trace instead of trace / numel");
    run->add_flag("--noise-accuracy", cfg.noise_accuracy, "Score noise by accuracy drop instead of loss increase");

    std::vector<std::string> compare_dirs;
    std::string compare_out;
    auto* compare = app.add_subcommand("compare", "Compare completed runs on the same model");
    compare->add_option("runs", compare_dirs, "Run directories")->required()->expected(2, -1);
    compare->add_option("--out", compare_out, "Also write the report as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : config_error;
    }

    try {
        if (*gen) {
            const auto files = mpq::cmd_gen_fixture(fixture, fixture_out);
            std::cout << "model " << files.model.string() << "\ncalib " << files.calib.string() << "\neval "
                      << files.eval.string() << "\nlatency " << files.latency_table.string()
                      << "\ncalib accuracy " << files.calib_accuracy << "\neval accuracy " << files.eval_accuracy
                      << "\n";
        } else if (*run) {
            if (!manifest.empty()) {
                const mpq::Json m = mpq::read_json(manifest);
                if (!m.contains("config")) throw mpq::Error(mpq::ErrorKind::config, "manifest has no config");
                mpq::PipelineConfig loaded = mpq::pipeline_config_from_json(m.at("config"));
                if (!out.empty()) loaded.out = out;
                cfg = std::move(loaded);
            } else {
                cfg.out = out;
                cfg.metric = *mpq::parse_metric(metric);
                cfg.algo = *mpq::parse_algorithm(algo);
            }
            const auto result = mpq::cmd_run(cfg);
            std::cout << "baseline accuracy " << result.baseline_accuracy << "\n";
            for (const auto& r : result.repeats) {
                std::cout << "seed " << r.metric_seed << ": accuracy " << r.verified_accuracy << " (target "
                          << r.outcome.target << "), relative size " << 100.0 * r.cost.relative_size
                          << "%, relative latency " << 100.0 * r.cost.relative_latency << "%, evals "
                          << r.outcome.evals << "\n";
            }
        } else if (*compare) {
            std::vector<mpq::fs::path> dirs(compare_dirs.begin(), compare_dirs.end());
            const auto result = mpq::cmd_compare(dirs);
            if (!compare_out.empty()) mpq::write_json(compare_out, result.report);
            std::cout << result.table;
        }
    } catch (const mpq::Error& e) {
        std::cerr << "mpq: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "mpq: internal error: " << e.what() << "\n";
        return internal;
    }
    return ok;
}
