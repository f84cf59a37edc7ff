// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#include "mpq/search.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include "mpq/error.hpp"

namespace mpq {

int QuantConfig::bits_of(std::string_view name) const {
    auto it = bits.find(name);
    if (it == bits.end()) {
        throw Error(ErrorKind::unknown_tensor, "configuration has no entry for '" + std::string(name) + "'");
    }
    return it->second;
}

QuantConfig uniform_config(std::span<const std::string> names, int bits, int baseline_bits) {
    QuantConfig c;
    c.baseline_bits = baseline_bits;
    for (const auto& n : names) c.bits[n] = bits;
    return c;
}

const char* to_string(SearchAlgorithm a) noexcept {
    return a == SearchAlgorithm::bisection ? "bisection" : "greedy";
}

std::optional<SearchAlgorithm> parse_algorithm(std::string_view s) {
    if (s == "bisection") return SearchAlgorithm::bisection;
    if (s == "greedy") return SearchAlgorithm::greedy;
    return std::nullopt;
}

std::vector<int> search_levels(std::span<const int> candidate_bits, int baseline_bits) {
    std::set<int, std::greater<>> levels;
    for (int b : candidate_bits) {
        if (b < kMinBits || b > kMaxBits) {
            throw Error(ErrorKind::invalid_argument, "candidate bit width " + std::to_string(b) + " outside [2, 16]");
        }
        if (b < baseline_bits) levels.insert(b);
    }
    return {levels.begin(), levels.end()};
}

std::size_t bisection_budget(std::size_t n, std::size_t levels) {
    std::size_t log2n = 0;
    while ((std::size_t{1} << log2n) < n) ++log2n;
    return levels * (log2n + 2) + levels;
}

std::size_t greedy_budget(std::size_t n, std::size_t levels) { return levels * n; }

namespace {

struct Run {
    const SearchProblem& problem;
    std::vector<int> levels;
    SearchOutcome out;

    explicit Run(const SearchProblem& p) : problem(p) {
        if (!p.evaluator) throw Error(ErrorKind::invalid_argument, "search needs an evaluator");
        if (p.ordering.empty()) throw Error(ErrorKind::invalid_argument, "search ordering is empty");
        if (p.candidate_bits.empty()) throw Error(ErrorKind::invalid_argument, "no candidate bit widths");
        if (!(p.target_fraction > 0.0 && p.target_fraction <= 1.0)) {
            throw Error(ErrorKind::invalid_argument, "target fraction must lie in (0, 1]");
        }
        if (p.baseline_bits < kMinBits || p.baseline_bits > kMaxBits) {
            throw Error(ErrorKind::invalid_argument, "baseline bit width outside [2, 16]");
        }
        std::set<std::string_view> seen;
        for (const auto& n : p.ordering) {
            if (!seen.insert(n).second) throw Error(ErrorKind::invalid_argument, "duplicate tensor '" + n + "' in ordering");
        }
        levels = search_levels(p.candidate_bits, p.baseline_bits);
        out.config = uniform_config(p.ordering, p.baseline_bits, p.baseline_bits);
        out.target_fraction = p.target_fraction;
        out.baseline_accuracy = p.baseline_accuracy;
        out.target = p.target_fraction * p.baseline_accuracy;
        out.achieved_accuracy = p.baseline_accuracy;
        if (!(p.baseline_accuracy >= out.target)) {
            throw Error(ErrorKind::target_unreachable, "baseline accuracy is below the target");
        }
    }

    double evaluate(const QuantConfig& candidate) {
        const double a = problem.evaluator(candidate);
        if (std::isnan(a)) throw Error(ErrorKind::non_finite, "evaluator returned NaN");
        TraceEntry e;
        for (const auto& [name, b] : candidate.bits) {
            if (out.config.bits.at(name) != b) e.delta[name] = b;
        }
        e.accuracy = a;
        e.accepted = a >= out.target;
        out.trace.push_back(std::move(e));
        ++out.evals;
        return a;
    }

    void check_budget(std::size_t budget) const {
        if (static_cast<std::size_t>(out.evals) > budget) {
            throw Error(ErrorKind::invalid_argument, "search exceeded its evaluation budget");
        }
    }
};

}  // namespace

// Integer bisection over the number of least-sensitive tensors moved to the
// current width. lowl is the largest known-passing count (0 is the committed
// working config, which passes); upl is the smallest known-failing count, with
// N + 1 standing in for "none fails yet" so that all N tensors are reachable.
SearchOutcome bisection_search(const SearchProblem& problem) {
    Run run(problem);
    std::vector<std::string> ll = problem.ordering;
    for (int b : run.levels) {
        const std::size_t n = ll.size();
        if (n == 0) break;
        std::map<std::size_t, double> known{{0, run.out.achieved_accuracy}};
        auto accuracy_at = [&](std::size_t count) {
            if (auto it = known.find(count); it != known.end()) return it->second;
            QuantConfig lw = run.out.config;
            for (std::size_t i = 0; i < count; ++i) lw.bits[ll[i]] = b;
            return known[count] = run.evaluate(lw);
        };

        std::size_t thr = n / 2;
        std::size_t lowl = 0;
        std::size_t upl = n + 1;
        for (;;) {
            const std::size_t prev = thr;
            if (accuracy_at(thr) >= run.out.target) {
                lowl = thr;
                thr += (upl - thr) / 2;
            } else {
                upl = thr;
                thr -= (thr - lowl + 1) / 2;
            }
            if (thr == prev) break;
        }
        if (!(accuracy_at(thr) >= run.out.target)) thr = lowl;

        for (std::size_t i = 0; i < thr; ++i) run.out.config.bits[ll[i]] = b;
        run.out.achieved_accuracy = known.at(thr);
        ll.resize(thr);
    }
    run.check_budget(bisection_budget(problem.ordering.size(), run.levels.size()));
    return std::move(run.out);
}

SearchOutcome greedy_search(const SearchProblem& problem) {
    Run run(problem);
    std::vector<std::string> ll = problem.ordering;
    for (int b : run.levels) {
        std::vector<std::string> ql;
        for (const auto& l : ll) {
            QuantConfig trial = run.out.config;
            trial.bits[l] = b;
            const double a = run.evaluate(trial);
            if (a >= run.out.target) {
                run.out.config = std::move(trial);
                run.out.achieved_accuracy = a;
                ql.push_back(l);
            }
        }
        ll = std::move(ql);
    }
    run.check_budget(greedy_budget(problem.ordering.size(), run.levels.size()));
    return std::move(run.out);
}

SearchOutcome run_search(SearchAlgorithm algo, const SearchProblem& problem) {
    return algo == SearchAlgorithm::bisection ? bisection_search(problem) : greedy_search(problem);
}

QuantMap specs_for_config(const ModelGraph& model, const SpecBank& bank, const QuantConfig& config) {
    QuantMap specs;
    auto lookup = [&](int b, const std::string& name) -> const QuantSpec* {
        auto level = bank.find(b);
        if (level == bank.end()) return nullptr;
        auto it = level->second.find(name);
        return it == level->second.end() ? nullptr : &it->second;
    };
    for (const auto& [name, b] : config.bits) {
        if (b == config.baseline_bits) continue;
        if (!model.has_parameter(name) && !model.has_activation(name)) {
            throw Error(ErrorKind::unknown_tensor, "configuration refers to unknown tensor '" + name + "'");
        }
        const QuantSpec* s = lookup(b, name);
        if (!s) {
            throw Error(ErrorKind::unknown_tensor,
                        "no " + std::to_string(b) + "-bit spec for tensor '" + name + "'");
        }
        QuantSpec spec = *s;
        spec.bits = b;
        specs[name] = spec;
    }
    for (const Layer& layer : model.layers()) {
        if (layer.kind != LayerKind::affine) continue;
        auto it = config.bits.find(weight_name(layer.name));
        if (it == config.bits.end() || it->second == config.baseline_bits) continue;
        const std::string act = activation_name(layer.name);
        if (specs.count(act)) continue;
        if (const QuantSpec* s = lookup(it->second, act)) {
            QuantSpec spec = *s;
            spec.bits = it->second;
            specs[act] = spec;
        }
    }
    return specs;
}

double evaluate_config(const ModelGraph& model, const Dataset& data, const SpecBank& bank,
                       const QuantConfig& config) {
    const QuantMap specs = specs_for_config(model, bank, config);
    return forward(model, data, &specs).accuracy;
}

}  // namespace mpq
