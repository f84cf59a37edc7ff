// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Test-side reference implementations and fixtures. Nothing here calls into
// the library's numerics; the oracles are written independently in double.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "mpq/graph.hpp"
#include "mpq/model_io.hpp"
#include "mpq/pipeline.hpp"
#include "mpq/quant_config.hpp"

namespace mpq_test {

using mpq::Dataset;
using mpq::Layer;
using mpq::LossKind;
using mpq::ModelGraph;

// ---- double-precision reference network ------------------------------------

struct RefLayer {
    bool affine = true;
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;
    std::vector<double> b;
};

inline std::vector<RefLayer> to_reference(const ModelGraph& model) {
    std::vector<RefLayer> out;
    std::size_t dim = model.input_dim();
    for (const Layer& l : model.layers()) {
        RefLayer r;
        r.affine = l.kind == mpq::LayerKind::affine;
        r.in = dim;
        r.out = r.affine ? l.out_dim : dim;
        r.w.assign(l.weight.begin(), l.weight.end());
        r.b.assign(l.bias.begin(), l.bias.end());
        dim = r.out;
        out.push_back(std::move(r));
    }
    return out;
}

// Runs layers [first, end) on one activation row.
inline std::vector<double> ref_run(const std::vector<RefLayer>& net, std::size_t first, std::vector<double> a) {
    for (std::size_t li = first; li < net.size(); ++li) {
        const RefLayer& l = net[li];
        if (!l.affine) {
            for (double& v : a) v = v > 0.0 ? v : 0.0;
            continue;
        }
        std::vector<double> z(l.out);
        for (std::size_t o = 0; o < l.out; ++o) {
            double s = l.b[o];
            for (std::size_t i = 0; i < l.in; ++i) s += l.w[o * l.in + i] * a[i];
            z[o] = s;
        }
        a = std::move(z);
    }
    return a;
}

inline double ref_example_loss(const std::vector<double>& z, std::uint32_t label, LossKind loss) {
    if (loss == LossKind::squared_error) {
        double s = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) {
            const double d = z[k] - (k == label ? 1.0 : 0.0);
            s += 0.5 * d * d;
        }
        return s;
    }
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s) - z[label];
}

// Inputs of layer `first` for every example.
inline std::vector<std::vector<double>> ref_inputs(const std::vector<RefLayer>& net, std::size_t first,
                                                   const Dataset& data) {
    std::vector<std::vector<double>> rows(data.size());
    for (std::size_t n = 0; n < data.size(); ++n) {
        auto x = data.example(n);
        std::vector<double> a(x.begin(), x.end());
        for (std::size_t li = 0; li < first; ++li) {
            std::vector<RefLayer> one{net[li]};
            a = ref_run(one, 0, std::move(a));
        }
        rows[n] = std::move(a);
    }
    return rows;
}

inline double ref_loss_from(const std::vector<RefLayer>& net, std::size_t first,
                            const std::vector<std::vector<double>>& inputs, const Dataset& data, LossKind loss) {
    double s = 0.0;
    for (std::size_t n = 0; n < inputs.size(); ++n) {
        s += ref_example_loss(ref_run(net, first, inputs[n]), data.labels()[n], loss);
    }
    return s / static_cast<double>(inputs.size());
}

inline double ref_loss(const ModelGraph& model, const Dataset& data) {
    const auto net = to_reference(model);
    return ref_loss_from(net, 0, ref_inputs(net, 0, data), data, model.loss());
}

// Central finite differences of the double-precision loss for every parameter.
// The step is small enough that a perturbation rarely crosses a relu kink.
inline std::map<std::string, std::vector<double>> ref_fd_gradients(const ModelGraph& model, const Dataset& data,
                                                                   double h = 1e-6) {
    auto net = to_reference(model);
    std::map<std::string, std::vector<double>> out;
    for (std::size_t li = 0; li < net.size(); ++li) {
        if (!net[li].affine) continue;
        const auto inputs = ref_inputs(net, li, data);
        const std::string& name = model.layers()[li].name;
        for (bool is_weight : {true, false}) {
            std::vector<double>& p = is_weight ? net[li].w : net[li].b;
            std::vector<double> g(p.size());
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double keep = p[i];
                p[i] = keep + h;
                const double up = ref_loss_from(net, li, inputs, data, model.loss());
                p[i] = keep - h;
                const double down = ref_loss_from(net, li, inputs, data, model.loss());
                p[i] = keep;
                g[i] = (up - down) / (2.0 * h);
            }
            out[is_weight ? mpq::weight_name(name) : mpq::bias_name(name)] = std::move(g);
        }
    }
    return out;
}

// ---- fixtures ----------------------------------------------------------------

/// Quadratic bowl at its minimum: H_W = diag(1, 2, 3), H_b = 1.
inline ModelGraph quadratic_model() {
    return ModelGraph({Layer::affine("fc", 3, 1, {0.0f, 0.0f, 0.0f}, {1.0f})}, LossKind::squared_error);
}

inline Dataset quadratic_data() {
    const float s3 = static_cast<float>(std::sqrt(3.0));
    const float s6 = static_cast<float>(std::sqrt(6.0));
    return Dataset(3, 1, {s3, 0, 0, 0, s6, 0, 0, 0, 3}, {0, 0, 0});
}

inline const double kQuadraticDiag[3] = {3.0 / 3.0, 6.0 / 3.0, 9.0 / 3.0};

/// Squared-error regression with an off-diagonal weight Hessian (1/N) sum x x^T.
struct CorrelatedFixture {
    ModelGraph model;
    Dataset data;
    std::vector<std::vector<double>> hessian;
    double trace = 0.0;
};

inline CorrelatedFixture correlated_fixture() {
    const std::vector<float> x{1.0f, 1.0f, 0.5f, 1.0f, -1.0f, 0.5f, 0.25f, 2.0f, 1.0f, 1.0f, 1.0f, -1.0f};
    CorrelatedFixture f{ModelGraph({Layer::affine("fc", 3, 1, {0.0f, 0.0f, 0.0f}, {1.0f})},
                                   LossKind::squared_error),
                        Dataset(3, 1, x, {0, 0, 0, 0}),
                        std::vector<std::vector<double>>(3, std::vector<double>(3, 0.0)),
                        0.0};
    for (std::size_t n = 0; n < 4; ++n) {
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) f.hessian[i][j] += x[n * 3 + i] * x[n * 3 + j] / 4.0;
        }
    }
    for (std::size_t i = 0; i < 3; ++i) f.trace += f.hessian[i][i];
    return f;
}

/// Zero curvature in every parameter: a dead hidden layer feeding a saturated head.
inline std::pair<ModelGraph, Dataset> flat_fixture() {
    std::vector<float> w1(4 * 2, 0.1f);
    std::vector<float> b1(4, -10.0f);
    std::vector<float> w2(2 * 4, 0.5f);
    std::vector<float> b2{30.0f, -30.0f};
    ModelGraph m({Layer::affine("fc1", 2, 4, w1, b1), Layer::relu("relu1"), Layer::affine("fc2", 4, 2, w2, b2)});
    Dataset d(2, 2, {0.5f, -0.5f, 1.0f, 0.25f, -1.0f, 0.75f}, {0, 0, 0});
    return {std::move(m), std::move(d)};
}

/// Random relu network with its own random data.
inline std::pair<ModelGraph, Dataset> random_mlp(std::uint64_t seed, std::vector<std::size_t> dims,
                                                 std::size_t examples,
                                                 LossKind loss = LossKind::softmax_cross_entropy) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Layer> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        std::vector<float> w(dims[i] * dims[i + 1]);
        std::vector<float> b(dims[i + 1]);
        for (float& v : w) v = static_cast<float>(normal(rng) / std::sqrt(static_cast<double>(dims[i])));
        for (float& v : b) v = static_cast<float>(0.1 * normal(rng));
        layers.push_back(Layer::affine("l" + std::to_string(i), dims[i], dims[i + 1], w, b));
        if (i + 2 < dims.size()) layers.push_back(Layer::relu("r" + std::to_string(i)));
    }
    std::vector<float> x(examples * dims.front());
    for (float& v : x) v = static_cast<float>(normal(rng));
    std::vector<std::uint32_t> y(examples);
    std::uniform_int_distribution<std::uint32_t> cls(0, static_cast<std::uint32_t>(dims.back() - 1));
    for (auto& v : y) v = cls(rng);
    return {ModelGraph(std::move(layers), loss), Dataset(dims.front(), dims.back(), std::move(x), std::move(y))};
}

struct F1 {
    mpq::FixtureFiles files;
    ModelGraph model;
    Dataset calib;
    Dataset eval;
};

inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("mpq-test-" + std::to_string(static_cast<long long>(::getpid())) + "-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Default fixture: 6 affine layers, 2 classes, 2048 + 2048 examples, seed 1.
inline const F1& f1() {
    static const F1 fixture = [] {
        F1 f;
        f.files = mpq::cmd_gen_fixture(mpq::FixtureSpec{}, scratch_dir("f1"));
        f.model = mpq::load_model(f.files.model);
        f.calib = mpq::load_dataset(f.files.calib);
        f.eval = mpq::load_dataset(f.files.eval);
        return f;
    }();
    return fixture;
}

// ---- search oracle ---------------------------------------------------------

/// Separable accuracy model over four equally sized tensors: each tensor at
/// width b costs k_i * p(b) accuracy.
struct SeparableOracle {
    std::vector<std::string> names{"t1", "t2", "t3", "t4"};
    std::vector<double> k{1, 2, 3, 4};
    std::map<int, double> p{{16, 0.0}, {8, 0.002}, {4, 0.01}};
    std::vector<int> bits{4, 8, 16};
    double target_fraction = 0.99;
    int evals = 0;

    double accuracy(const mpq::QuantConfig& c) const {
        double a = 1.0;
        for (std::size_t i = 0; i < names.size(); ++i) a -= k[i] * p.at(c.bits.at(names[i]));
        return a;
    }
    static int size(const mpq::QuantConfig& c) {
        int s = 0;
        for (const auto& [n, b] : c.bits) s += b;
        return s;
    }
    bool meets(const mpq::QuantConfig& c) const { return accuracy(c) >= target_fraction * 1.0; }

    std::vector<mpq::QuantConfig> all_configs() const {
        std::vector<mpq::QuantConfig> out;
        std::function<void(std::size_t, mpq::QuantConfig&)> rec = [&](std::size_t i, mpq::QuantConfig& c) {
            if (i == names.size()) {
                out.push_back(c);
                return;
            }
            for (int b : bits) {
                c.bits[names[i]] = b;
                rec(i + 1, c);
            }
        };
        mpq::QuantConfig c;
        rec(0, c);
        return out;
    }

    /// ordering[0:i] at 8 bits with ordering[0:j] further lowered to 4, j <= i.
    std::vector<mpq::QuantConfig> prefix_configs() const {
        std::vector<mpq::QuantConfig> out;
        for (std::size_t i = 0; i <= names.size(); ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                mpq::QuantConfig c;
                for (std::size_t t = 0; t < names.size(); ++t) c.bits[names[t]] = t < j ? 4 : (t < i ? 8 : 16);
                out.push_back(c);
            }
        }
        return out;
    }
};

// ---- edit distance ---------------------------------------------------------

/// Memoized recursive edit distance.
inline std::size_t edit_distance_oracle(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
    std::function<long(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> long {
        if (i == 0) return static_cast<long>(j);
        if (j == 0) return static_cast<long>(i);
        long& m = memo[i][j];
        if (m >= 0) return m;
        m = std::min({d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1)});
        return m;
    };
    return static_cast<std::size_t>(d(a.size(), b.size()));
}

inline std::vector<std::string> symbols(const std::string& s) {
    std::vector<std::string> out;
    for (char c : s) out.emplace_back(1, c);
    return out;
}

}  // namespace mpq_test
