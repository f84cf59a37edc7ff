// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#include "mpq/sensitivity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include "mpq/error.hpp"
#include "mpq/quantizer.hpp"
#include "mpq/rng.hpp"

namespace mpq {

const char* to_string(Metric m) noexcept {
    switch (m) {
        case Metric::qe: return "qe";
        case Metric::noise: return "noise";
        case Metric::hessian: return "hessian";
        case Metric::random: return "random";
    }
    return "?";
}

std::optional<Metric> parse_metric(std::string_view s) {
    for (Metric m : {Metric::qe, Metric::noise, Metric::hessian, Metric::random}) {
        if (s == to_string(m)) return m;
    }
    return std::nullopt;
}

std::vector<std::string> ascending_ordering(const ScoreMap& scores) {
    std::vector<std::string> names;
    names.reserve(scores.size());
    for (const auto& [name, s] : scores) names.push_back(name);
    std::stable_sort(names.begin(), names.end(), [&](const std::string& a, const std::string& b) {
        const double ma = scores.find(a)->second.mean;
        const double mb = scores.find(b)->second.mean;
        if (ma != mb) return ma < mb;
        return a < b;
    });
    return names;
}

namespace {

SensitivityReport make_report(Metric metric, ScoreMap scores, std::uint64_t seed) {
    SensitivityReport r;
    r.metric = metric;
    r.ordering = ascending_ordering(scores);
    r.scores = std::move(scores);
    r.seed = seed;
    return r;
}

Score summarize(std::span<const double> samples) {
    Score s;
    s.trials = static_cast<int>(samples.size());
    double sum = 0.0;
    for (double v : samples) sum += v;
    s.mean = sum / static_cast<double>(samples.size());
    if (samples.size() > 1) {
        double sq = 0.0;
        for (double v : samples) sq += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(sq / static_cast<double>(samples.size() - 1));
    }
    return s;
}

// Runs fn(i) for i in [0, count) on up to `threads` workers; rethrows the first failure.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

SensitivityReport score_qe(const ModelGraph& model, const QuantMap& specs) {
    ScoreMap scores;
    for (const auto& [name, spec] : specs) {
        if (!model.has_parameter(name)) continue;
        scores[name] = Score{quantization_error(model.parameter(name), spec), 0.0, 1};
    }
    return make_report(Metric::qe, std::move(scores), 0);
}

SensitivityReport score_noise(const ModelGraph& model, const Dataset& data, const NoiseOptions& options) {
    if (!(options.lambda >= 0.0) || !std::isfinite(options.lambda)) {
        throw Error(ErrorKind::invalid_argument, "noise lambda must be finite and >= 0");
    }
    if (options.trials < 1) throw Error(ErrorKind::invalid_argument, "noise trials must be >= 1");

    const EvalResult clean = forward(model, data);
    const auto& params = model.parameters();
    std::vector<Score> results(params.size());
    parallel_for(params.size(), options.threads, [&](std::size_t i) {
        const std::string& name = params[i].name;
        const std::span<const float> w = model.parameter(name);
        const double sigma = options.lambda * max_abs(w);
        Rng rng = make_stream(options.seed, "noise", i);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<float> perturbed(w.size());
        std::vector<double> samples;
        for (int t = 0; t < options.trials; ++t) {
            for (std::size_t k = 0; k < w.size(); ++k) {
                perturbed[k] = static_cast<float>(w[k] + sigma * normal(rng));
            }
            const ParamOverride o[] = {{name, perturbed}};
            const EvalResult noisy = forward(model, data, nullptr, o);
            samples.push_back(options.use_accuracy ? clean.accuracy - noisy.accuracy
                                                   : noisy.loss - clean.loss);
        }
        results[i] = summarize(samples);
    });

    ScoreMap scores;
    for (std::size_t i = 0; i < params.size(); ++i) scores[params[i].name] = results[i];
    return make_report(Metric::noise, std::move(scores), options.seed);
}

SensitivityReport score_hessian(const ModelGraph& model, const Dataset& data,
                                const HessianOptions& options) {
    if (options.probes < 1) throw Error(ErrorKind::invalid_argument, "probes must be >= 1");
    const auto& params = model.parameters();
    std::vector<Score> results(params.size());
    parallel_for(params.size(), options.threads, [&](std::size_t i) {
        const std::string& name = params[i].name;
        const std::size_t numel = params[i].numel();
        Rng rng = make_stream(options.seed, "hutchinson", i);
        std::vector<float> z(numel);
        std::vector<double> samples;
        samples.reserve(static_cast<std::size_t>(options.probes));
        for (int p = 0; p < options.probes; ++p) {
            for (float& v : z) v = (rng() & 1u) ? 1.0f : -1.0f;
            const std::vector<float> hz = hessian_vector_product(model, data, name, z);
            double quad = 0.0;
            for (std::size_t k = 0; k < numel; ++k) quad += static_cast<double>(z[k]) * hz[k];
            samples.push_back(options.normalize ? quad / static_cast<double>(numel) : quad);
        }
        results[i] = summarize(samples);
    });

    ScoreMap scores;
    for (std::size_t i = 0; i < params.size(); ++i) scores[params[i].name] = results[i];
    return make_report(Metric::hessian, std::move(scores), options.seed);
}

SensitivityReport score_random(std::span<const std::string> tensor_names, std::uint64_t seed) {
    if (tensor_names.empty()) throw Error(ErrorKind::invalid_argument, "no tensors to order");
    std::set<std::string_view> seen;
    for (const auto& n : tensor_names) {
        if (!seen.insert(n).second) {
            throw Error(ErrorKind::invalid_argument, "duplicate tensor name '" + n + "'");
        }
    }
    std::vector<std::string> perm(tensor_names.begin(), tensor_names.end());
    Rng rng = make_stream(seed, "random-order");
    std::shuffle(perm.begin(), perm.end(), rng);
    ScoreMap scores;
    for (std::size_t r = 0; r < perm.size(); ++r) scores[perm[r]] = Score{static_cast<double>(r), 0.0, 1};
    SensitivityReport report = make_report(Metric::random, std::move(scores), seed);
    return report;
}

std::size_t ordering_distance(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::string> sa(a.begin(), a.end());
    std::vector<std::string> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) throw Error(ErrorKind::invalid_argument, "orderings cover different tensor sets");
    return levenshtein_distance(a, b);
}

std::size_t levenshtein_distance(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace mpq
