// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#include "mpq/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "mpq/cost_model.hpp"
#include "mpq/error.hpp"
#include "mpq/model_io.hpp"
#include "mpq/quantizer.hpp"
#include "mpq/rng.hpp"

namespace mpq {

namespace {

constexpr int kManifestVersion = 1;

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(name) + ": " + e.what());
    }
}

std::vector<std::uint32_t> argmax_labels(std::span<const float> logits, std::size_t classes) {
    std::vector<std::uint32_t> labels(logits.size() / classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const float* z = logits.data() + i * classes;
        labels[i] = static_cast<std::uint32_t>(std::max_element(z, z + classes) - z);
    }
    return labels;
}

std::vector<float> gaussian_features(std::size_t n, std::size_t dim, Rng rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<float> x(n * dim);
    for (float& v : x) v = static_cast<float>(normal(rng));
    return x;
}

// Shifts the output bias so the teacher's classes are roughly balanced on x.
void balance_output_bias(std::vector<Layer>& layers, std::span<const float> x) {
    Layer& last = layers.back();
    const std::size_t c = last.out_dim;
    const std::vector<float> z = compute_logits(ModelGraph(layers), x);
    const std::size_t n = z.size() / c;
    if (c == 2) {
        std::vector<float> diff(n);
        for (std::size_t i = 0; i < n; ++i) diff[i] = z[i * 2 + 1] - z[i * 2];
        std::nth_element(diff.begin(), diff.begin() + static_cast<std::ptrdiff_t>(n / 2), diff.end());
        last.bias[1] -= diff[n / 2];
        return;
    }
    for (std::size_t k = 0; k < c; ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += z[i * c + k];
        last.bias[k] -= static_cast<float>(mean / static_cast<double>(n));
    }
}

double latency_model_us(std::size_t n, std::size_t k, int bits) {
    return (static_cast<double>(n * k) / 1000.0 + 1.0) * (0.35 + 0.65 * bits / 16.0);
}

Json stats_json(const std::vector<double>& v) {
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double sd = 0.0;
    if (v.size() > 1) {
        for (double x : v) sd += (x - mean) * (x - mean);
        sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
    }
    return {{"mean", mean}, {"std", sd}};
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

fs::path repeat_dir(const fs::path& out, int r) {
    return r == 0 ? out : out / "repeats" / std::to_string(r);
}

}  // namespace

FixtureFiles cmd_gen_fixture(const FixtureSpec& spec, const fs::path& out_dir) {
    if (spec.dims.size() < 2) throw Error(ErrorKind::config, "fixture needs at least an input and an output width");
    if (std::find(spec.dims.begin(), spec.dims.end(), 0u) != spec.dims.end()) {
        throw Error(ErrorKind::config, "fixture layer widths must be positive");
    }
    if (spec.dims.back() < 2) throw Error(ErrorKind::config, "fixture needs at least two classes");
    if (spec.examples == 0 || spec.eval_examples == 0) {
        throw Error(ErrorKind::config, "fixture needs at least one example in each split");
    }

    Rng wrng = make_stream(spec.seed, "fixture-weights");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Layer> layers;
    const std::size_t n_affine = spec.dims.size() - 1;
    for (std::size_t i = 0; i < n_affine; ++i) {
        const std::size_t in = spec.dims[i];
        const std::size_t out = spec.dims[i + 1];
        const double scale = std::sqrt(2.0 / static_cast<double>(in));
        std::vector<float> w(in * out);
        std::vector<float> b(out);
        for (float& v : w) v = static_cast<float>(scale * normal(wrng));
        for (float& v : b) v = static_cast<float>(0.1 * normal(wrng));
        layers.push_back(Layer::affine("fc" + std::to_string(i + 1), in, out, std::move(w), std::move(b)));
        if (i + 1 < n_affine) layers.push_back(Layer::relu("relu" + std::to_string(i + 1)));
    }

    const std::size_t dim = spec.dims.front();
    const std::size_t classes = spec.dims.back();
    std::vector<float> xc = gaussian_features(spec.examples, dim, make_stream(spec.seed, "fixture-calib"));
    std::vector<float> xe = gaussian_features(spec.eval_examples, dim, make_stream(spec.seed, "fixture-eval"));
    balance_output_bias(layers, xc);
    const ModelGraph model(layers);

    const Dataset calib(dim, classes, xc, argmax_labels(compute_logits(model, xc), classes));
    const Dataset eval(dim, classes, xe, argmax_labels(compute_logits(model, xe), classes));

    FixtureFiles files;
    files.calib_accuracy = forward(model, calib).accuracy;
    files.eval_accuracy = forward(model, eval).accuracy;
    if (files.calib_accuracy < 0.95 || files.eval_accuracy < 0.95) {
        throw Error(ErrorKind::data, "fixture teacher failed to reach 95% accuracy on its own labels");
    }

    LatencyTable table;
    std::set<std::pair<std::size_t, std::size_t>> shapes;
    for (const Layer& l : model.layers()) {
        if (l.kind == LayerKind::affine) shapes.insert({l.out_dim, l.in_dim});
    }
    for (const auto& [n, k] : shapes) {
        for (int b = kMinBits; b <= kMaxBits; ++b) {
            table.add(KernelKey{KernelKind::matmul, 1, n, k, b}, latency_model_us(n, k, b));
        }
    }

    fs::create_directories(out_dir);
    files.model = out_dir / "model.json";
    files.calib = out_dir / "calib.json";
    files.eval = out_dir / "eval.json";
    files.latency_table = out_dir / "latency.csv";
    stage("gen-fixture", [&] {
        save_model(model, files.model);
        save_dataset(calib, files.calib);
        save_dataset(eval, files.eval);
        write_text_file(files.latency_table, table.to_csv());
        return 0;
    });
    return files;
}

void validate(const PipelineConfig& c) {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, msg); };
    for (const auto& [flag, path] : {std::pair{"--model", c.model}, {"--calib", c.calib}, {"--eval", c.eval},
                                     {"--latency-table", c.latency_table}}) {
        if (path.empty()) fail(std::string(flag) + " is required");
        if (!fs::exists(path)) fail(std::string(flag) + " path '" + path.string() + "' does not exist");
    }
    if (c.out.empty()) fail("--out is required");
    if (!(c.target > 0.0 && c.target <= 1.0)) fail("--target must lie in (0, 1]");
    if (c.bits.empty()) fail("--bits must list at least one width");
    for (int b : c.bits) {
        if (b < kMinBits || b > kMaxBits) fail("--bits entries must lie in [2, 16]");
    }
    if (c.baseline_bits < kMinBits || c.baseline_bits > kMaxBits) fail("baseline bits must lie in [2, 16]");
    if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) fail("--lambda must be >= 0");
    if (c.trials < 1) fail("--trials must be >= 1");
    if (c.probes < 1) fail("--probes must be >= 1");
    if (!(c.lr >= 0.0) || !std::isfinite(c.lr)) fail("--lr must be >= 0");
    if (c.epochs < 1) fail("--epochs must be >= 1");
    if (c.repeats < 1) fail("--repeats must be >= 1");
    if (c.sensitivity_samples == 0 || c.calibration_samples == 0) fail("sample sizes must be positive");
}

Json to_json(const PipelineConfig& c) {
    return {{"model", c.model.string()},
            {"calib", c.calib.string()},
            {"eval", c.eval.string()},
            {"latency_table", c.latency_table.string()},
            {"out", c.out.string()},
            {"metric", to_string(c.metric)},
            {"algo", to_string(c.algo)},
            {"bits", c.bits},
            {"target", c.target},
            {"seed", c.seed},
            {"lambda", c.lambda},
            {"trials", c.trials},
            {"probes", c.probes},
            {"lr", c.lr},
            {"epochs", c.epochs},
            {"baseline_bits", c.baseline_bits},
            {"sensitivity_samples", c.sensitivity_samples},
            {"calibration_samples", c.calibration_samples},
            {"repeats", c.repeats},
            {"threads", c.threads},
            {"hessian_raw", c.hessian_raw},
            {"noise_accuracy", c.noise_accuracy}};
}

PipelineConfig pipeline_config_from_json(const Json& j) {
    try {
        PipelineConfig c;
        c.model = j.at("model").get<std::string>();
        c.calib = j.at("calib").get<std::string>();
        c.eval = j.at("eval").get<std::string>();
        c.latency_table = j.at("latency_table").get<std::string>();
        c.out = j.at("out").get<std::string>();
        const auto metric = parse_metric(j.at("metric").get<std::string>());
        const auto algo = parse_algorithm(j.at("algo").get<std::string>());
        if (!metric || !algo) throw Error(ErrorKind::config, "manifest names an unknown metric or algorithm");
        c.metric = *metric;
        c.algo = *algo;
        c.bits = j.at("bits").get<std::vector<int>>();
        c.target = j.at("target").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.lambda = j.at("lambda").get<double>();
        c.trials = j.at("trials").get<int>();
        c.probes = j.at("probes").get<int>();
        c.lr = j.at("lr").get<double>();
        c.epochs = j.at("epochs").get<int>();
        c.baseline_bits = j.at("baseline_bits").get<int>();
        c.sensitivity_samples = j.at("sensitivity_samples").get<std::size_t>();
        c.calibration_samples = j.at("calibration_samples").get<std::size_t>();
        c.repeats = j.at("repeats").get<int>();
        c.threads = j.at("threads").get<std::size_t>();
        c.hessian_raw = j.at("hessian_raw").get<bool>();
        c.noise_accuracy = j.at("noise_accuracy").get<bool>();
        return c;
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::config, std::string("malformed run manifest: ") + e.what());
    }
}

RunResult cmd_run(const PipelineConfig& config) {
    validate(config);
    const ModelGraph model = stage("load", [&] { return load_model(config.model); });
    const Dataset pool = stage("load", [&] { return load_dataset(config.calib); });
    const Dataset eval = stage("load", [&] { return load_dataset(config.eval); });
    const LatencyTable table = stage("load", [&] { return LatencyTable::load_csv(config.latency_table); });

    // Disjoint seeded samples: one for sensitivity scoring, one for calibration + adjustment.
    const std::size_t need = config.sensitivity_samples + config.calibration_samples;
    if (pool.size() < need) {
        throw Error(ErrorKind::data, "sample: calibration pool has " + std::to_string(pool.size()) +
                                         " examples but " + std::to_string(need) + " are required");
    }
    std::vector<std::size_t> perm(pool.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng split_rng = make_stream(config.seed, "data-split");
    std::shuffle(perm.begin(), perm.end(), split_rng);
    const std::span<const std::size_t> all(perm);
    const Dataset sens_data = pool.subset(all.subspan(0, config.sensitivity_samples));
    const Dataset calib_data = pool.subset(all.subspan(config.sensitivity_samples, config.calibration_samples));

    const std::vector<int> levels = search_levels(config.bits, config.baseline_bits);
    SpecBank bank;
    Json calibration_log = Json::object();
    stage("calibrate", [&] {
        for (int b : levels) {
            BitsMap bits;
            for (const Layer& l : model.layers()) {
                if (l.kind != LayerKind::affine) continue;
                bits[weight_name(l.name)] = b;
                bits[bias_name(l.name)] = b;
                bits[activation_name(l.name)] = b;
            }
            CalibrationOutcome cal = calibrate(model, calib_data, bits);
            cal = stage("adjust", [&] {
                return adjust_scales(model, calib_data, cal, AdjustOptions{config.lr, config.epochs, 0});
            });
            calibration_log[std::to_string(b)] = cal.adjustment_log;
            bank[b] = std::move(cal.specs);
        }
        return 0;
    });

    RunResult result;
    result.baseline_accuracy = stage("evaluate", [&] { return forward(model, eval).accuracy; });
    const std::vector<std::string> tensors = model.parameter_names();

    for (int r = 0; r < config.repeats; ++r) {
        RepeatResult rep;
        rep.metric_seed = config.seed + static_cast<std::uint64_t>(r);
        rep.sensitivity = stage("sensitivity", [&] {
            switch (config.metric) {
                case Metric::qe:
                    return score_qe(model, levels.empty() ? QuantMap{} : bank.at(levels.back()));
                case Metric::noise:
                    return score_noise(model, sens_data,
                                       NoiseOptions{config.lambda, config.trials, rep.metric_seed,
                                                    config.noise_accuracy, config.threads});
                case Metric::hessian:
                    return score_hessian(model, sens_data,
                                         HessianOptions{config.probes, rep.metric_seed, !config.hessian_raw,
                                                        config.threads});
                case Metric::random:
                    return score_random(tensors, rep.metric_seed);
            }
            throw Error(ErrorKind::config, "unknown metric");
        });

        SearchProblem problem;
        problem.evaluator = [&](const QuantConfig& c) { return evaluate_config(model, eval, bank, c); };
        problem.ordering = rep.sensitivity.ordering;
        if (problem.ordering.size() != tensors.size()) {
            // QE without levels scores nothing; search still needs every tensor.
            problem.ordering = tensors;
        }
        problem.candidate_bits = config.bits;
        problem.target_fraction = config.target;
        problem.baseline_accuracy = result.baseline_accuracy;
        problem.baseline_bits = config.baseline_bits;
        rep.outcome = stage("search", [&] { return run_search(config.algo, problem); });

        rep.verified_accuracy = stage("verify", [&] { return evaluate_config(model, eval, bank, rep.outcome.config); });
        if (!(rep.verified_accuracy >= rep.outcome.target)) {
            throw Error(ErrorKind::target_unreachable, "verify: returned configuration misses the target");
        }
        rep.cost = stage("cost", [&] { return cost_report(model, rep.outcome.config, table, config.baseline_bits); });
        result.repeats.push_back(std::move(rep));
    }

    Json manifest = {{"tool", "mpq"},
                     {"version", kManifestVersion},
                     {"config", to_json(config)},
                     {"model_hash", hex64(model.parameter_hash())},
                     {"model_parameters", model.parameter_count()},
                     {"sample_stream", "data-split"},
                     {"metric_seeds", Json::array()}};
    Json repeats = Json::array();
    std::vector<double> rel_size, rel_lat, size_b, lat_us, acc;
    for (const auto& rep : result.repeats) {
        manifest["metric_seeds"].push_back(rep.metric_seed);
        repeats.push_back({{"metric_seed", rep.metric_seed},
                           {"size_bytes", rep.cost.size_bytes},
                           {"latency_us", rep.cost.latency_us},
                           {"relative_size", rep.cost.relative_size},
                           {"relative_latency", rep.cost.relative_latency},
                           {"achieved_accuracy", rep.outcome.achieved_accuracy},
                           {"verified_accuracy", rep.verified_accuracy},
                           {"evals", rep.outcome.evals}});
        rel_size.push_back(rep.cost.relative_size);
        rel_lat.push_back(rep.cost.relative_latency);
        size_b.push_back(rep.cost.size_bytes);
        lat_us.push_back(rep.cost.latency_us);
        acc.push_back(rep.outcome.achieved_accuracy);
    }
    result.summary = {{"metric", to_string(config.metric)},
                      {"algo", to_string(config.algo)},
                      {"target_fraction", config.target},
                      {"baseline_accuracy", result.baseline_accuracy},
                      {"repeats", repeats},
                      {"size_bytes", stats_json(size_b)},
                      {"latency_us", stats_json(lat_us)},
                      {"relative_size", stats_json(rel_size)},
                      {"relative_latency", stats_json(rel_lat)},
                      {"achieved_accuracy", stats_json(acc)}};

    stage("write", [&] {
        write_json(config.out / "manifest.json", manifest);
        write_json(config.out / "specs.json", to_json(bank));
        write_json(config.out / "calibration.json", calibration_log);
        write_json(config.out / "summary.json", result.summary);
        for (int r = 0; r < config.repeats; ++r) {
            const RepeatResult& rep = result.repeats[static_cast<std::size_t>(r)];
            const fs::path dir = repeat_dir(config.out, r);
            write_json(dir / "sensitivity.json", to_json(rep.sensitivity));
            write_json(dir / "config.json", to_json(rep.outcome.config));
            write_json(dir / "search.json", to_json(rep.outcome));
            write_json(dir / "cost.json", to_json(rep.cost));
        }
        return 0;
    });
    return result;
}

CompareResult cmd_compare(const std::vector<fs::path>& run_dirs) {
    if (run_dirs.size() < 2) throw Error(ErrorKind::config, "compare needs at least two run directories");
    struct RunInfo {
        std::string dir;
        Json manifest;
        Json summary;
        SensitivityReport sensitivity;
    };
    std::vector<RunInfo> runs;
    for (const auto& d : run_dirs) {
        RunInfo info;
        info.dir = d.string();
        info.manifest = read_json(d / "manifest.json");
        info.summary = read_json(d / "summary.json");
        info.sensitivity = sensitivity_report_from_json(read_json(d / "sensitivity.json"));
        runs.push_back(std::move(info));
    }
    const std::string hash = runs.front().manifest.at("model_hash").get<std::string>();
    for (const auto& r : runs) {
        if (r.manifest.at("model_hash").get<std::string>() != hash) {
            throw Error(ErrorKind::data, "runs '" + runs.front().dir + "' and '" + r.dir +
                                             "' were made on different models");
        }
    }

    Json rows = Json::array();
    std::ostringstream table;
    table << std::left << std::setw(10) << "metric" << std::setw(11) << "algo" << std::setw(9) << "target"
          << std::setw(22) << "rel. size" << std::setw(22) << "rel. latency" << std::setw(10) << "accuracy"
          << "run\n";
    auto pct = [](const Json& stats) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << 100.0 * stats.at("mean").get<double>() << "% +- "
          << 100.0 * stats.at("std").get<double>() << "%";
        return s.str();
    };
    for (const auto& r : runs) {
        const Json& s = r.summary;
        rows.push_back({{"run", r.dir},
                        {"metric", s.at("metric")},
                        {"algo", s.at("algo")},
                        {"target_fraction", s.at("target_fraction")},
                        {"repeats", s.at("repeats").size()},
                        {"relative_size", s.at("relative_size")},
                        {"relative_latency", s.at("relative_latency")},
                        {"achieved_accuracy", s.at("achieved_accuracy")}});
        std::ostringstream target;
        target << std::fixed << std::setprecision(3) << s.at("target_fraction").get<double>();
        std::ostringstream accuracy;
        accuracy << std::fixed << std::setprecision(4) << s.at("achieved_accuracy").at("mean").get<double>();
        table << std::left << std::setw(10) << s.at("metric").get<std::string>() << std::setw(11)
              << s.at("algo").get<std::string>() << std::setw(9) << target.str() << std::setw(22)
              << pct(s.at("relative_size")) << std::setw(22) << pct(s.at("relative_latency")) << std::setw(10)
              << accuracy.str() << r.dir << "\n";
    }

    Json distances = Json::array();
    table << "\nordering distances (Levenshtein, N = " << runs.front().sensitivity.ordering.size() << ")\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
        for (std::size_t j = i + 1; j < runs.size(); ++j) {
            const std::size_t d = ordering_distance(runs[i].sensitivity.ordering, runs[j].sensitivity.ordering);
            distances.push_back({{"a", runs[i].dir}, {"b", runs[j].dir}, {"distance", d}});
            table << "  " << runs[i].dir << " (" << to_string(runs[i].sensitivity.metric) << ") vs " << runs[j].dir
                  << " (" << to_string(runs[j].sensitivity.metric) << "): " << d << "\n";
        }
    }

    CompareResult out;
    out.report = {{"model_hash", hash}, {"rows", rows}, {"ordering_distances", distances}};
    out.table = table.str();
    return out;
}

}  // namespace mpq
