// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#include "mpq/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>

#include "mpq/error.hpp"
#include "mpq/quantizer.hpp"
#include "mpq/rng.hpp"

namespace mpq {

const char* to_string(LayerKind kind) noexcept {
    return kind == LayerKind::affine ? "affine" : "relu";
}

const char* to_string(LossKind kind) noexcept {
    return kind == LossKind::softmax_cross_entropy ? "softmax_cross_entropy" : "squared_error";
}

Layer Layer::affine(std::string name, std::size_t in_dim, std::size_t out_dim) {
    return affine(std::move(name), in_dim, out_dim, std::vector<float>(in_dim * out_dim, 0.0f),
                  std::vector<float>(out_dim, 0.0f));
}

Layer Layer::affine(std::string name, std::size_t in_dim, std::size_t out_dim,
                    std::vector<float> weight, std::vector<float> bias) {
    Layer l;
    l.name = std::move(name);
    l.kind = LayerKind::affine;
    l.in_dim = in_dim;
    l.out_dim = out_dim;
    l.weight = std::move(weight);
    l.bias = std::move(bias);
    return l;
}

Layer Layer::relu(std::string name) {
    Layer l;
    l.name = std::move(name);
    l.kind = LayerKind::relu;
    return l;
}

std::string weight_name(std::string_view layer) { return std::string(layer) + ".weight"; }
std::string bias_name(std::string_view layer) { return std::string(layer) + ".bias"; }
std::string activation_name(std::string_view layer) { return std::string(layer) + ".act"; }

namespace {

bool all_finite(std::span<const float> v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace

ModelGraph::ModelGraph(std::vector<Layer> layers, LossKind loss)
    : layers_(std::move(layers)), loss_(loss) {
    std::set<std::string, std::less<>> names;
    std::optional<std::size_t> dim;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Layer& l = layers_[i];
        if (l.name.empty()) {
            throw Error(ErrorKind::invalid_argument, "layer " + std::to_string(i) + " has no name");
        }
        if (!names.insert(l.name).second) {
            throw Error(ErrorKind::invalid_argument, "duplicate layer name '" + l.name + "'");
        }
        if (l.kind == LayerKind::relu) {
            if (!dim) {
                throw Error(ErrorKind::shape_mismatch,
                            "relu layer '" + l.name + "' has no preceding affine layer");
            }
            l.in_dim = l.out_dim = *dim;
            l.weight.clear();
            l.bias.clear();
            continue;
        }
        if (l.in_dim == 0 || l.out_dim == 0) {
            throw Error(ErrorKind::shape_mismatch, "affine layer '" + l.name + "' has a zero dimension");
        }
        if (dim && *dim != l.in_dim) {
            throw Error(ErrorKind::shape_mismatch,
                        "layer '" + l.name + "' expects in_dim " + std::to_string(l.in_dim) +
                            " but the previous layer produces " + std::to_string(*dim));
        }
        if (l.weight.size() != l.in_dim * l.out_dim || l.bias.size() != l.out_dim) {
            throw Error(ErrorKind::shape_mismatch, "parameter sizes of layer '" + l.name +
                                                       "' do not match its dimensions");
        }
        if (!all_finite(l.weight) || !all_finite(l.bias)) {
            throw Error(ErrorKind::non_finite, "layer '" + l.name + "' has non-finite parameters");
        }
        dim = l.out_dim;
        params_.push_back({weight_name(l.name), i, true, l.out_dim, l.in_dim});
        params_.push_back({bias_name(l.name), i, false, l.out_dim, 1});
    }
}

std::size_t ModelGraph::input_dim() const {
    for (const Layer& l : layers_) {
        if (l.kind == LayerKind::affine) return l.in_dim;
    }
    return 0;
}

std::size_t ModelGraph::output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim; }

std::vector<std::string> ModelGraph::parameter_names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.name);
    return out;
}

std::vector<std::string> ModelGraph::activation_names() const {
    std::vector<std::string> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) out.push_back(activation_name(l.name));
    return out;
}

bool ModelGraph::has_parameter(std::string_view name) const {
    return std::any_of(params_.begin(), params_.end(), [&](const ParamInfo& p) { return p.name == name; });
}

bool ModelGraph::has_activation(std::string_view name) const {
    return std::any_of(layers_.begin(), layers_.end(),
                       [&](const Layer& l) { return activation_name(l.name) == name; });
}

const ParamInfo& ModelGraph::parameter_info(std::string_view name) const {
    for (const auto& p : params_) {
        if (p.name == name) return p;
    }
    throw Error(ErrorKind::unknown_tensor, "unknown parameter tensor '" + std::string(name) + "'");
}

std::span<const float> ModelGraph::parameter(std::string_view name) const {
    const ParamInfo& p = parameter_info(name);
    const Layer& l = layers_[p.layer_index];
    return p.is_weight ? std::span<const float>(l.weight) : std::span<const float>(l.bias);
}

std::size_t ModelGraph::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.numel();
    return n;
}

std::uint64_t ModelGraph::parameter_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : params_) {
        auto v = parameter(p.name);
        h = fnv1a64(v.data(), v.size_bytes(), h);
    }
    return h;
}

Dataset::Dataset(std::size_t feature_dim, std::size_t num_classes, std::vector<float> features,
                 std::vector<std::uint32_t> labels)
    : feature_dim_(feature_dim), num_classes_(num_classes), features_(std::move(features)),
      labels_(std::move(labels)) {
    if (labels_.empty()) throw Error(ErrorKind::invalid_argument, "dataset has no examples");
    if (feature_dim_ == 0 || num_classes_ == 0) {
        throw Error(ErrorKind::invalid_argument, "dataset needs feature_dim >= 1 and num_classes >= 1");
    }
    if (features_.size() != labels_.size() * feature_dim_) {
        throw Error(ErrorKind::shape_mismatch, "feature matrix size does not match num_examples x feature_dim");
    }
    for (std::uint32_t y : labels_) {
        if (y >= num_classes_) {
            throw Error(ErrorKind::invalid_argument, "label " + std::to_string(y) + " out of range");
        }
    }
    if (!all_finite(features_)) throw Error(ErrorKind::non_finite, "dataset has non-finite features");
}

std::span<const float> Dataset::example(std::size_t i) const {
    return std::span<const float>(features_).subspan(i * feature_dim_, feature_dim_);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::vector<float> f;
    std::vector<std::uint32_t> y;
    f.reserve(indices.size() * feature_dim_);
    y.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= size()) throw Error(ErrorKind::invalid_argument, "subset index out of range");
        auto row = example(i);
        f.insert(f.end(), row.begin(), row.end());
        y.push_back(labels_[i]);
    }
    return Dataset(feature_dim_, num_classes_, std::move(f), std::move(y));
}

namespace {

struct LayerCache {
    std::vector<float> input;       // N x in
    std::vector<float> pre_quant;   // layer output before activation quantization
    std::vector<float> output;      // N x out
    std::span<const float> weight_raw;
    std::span<const float> bias_raw;
    std::vector<float> weight_q;    // empty when the weight is not quantized
    std::vector<float> bias_q;
};

struct Pass {
    const ModelGraph& model;
    const QuantMap* quant;
    std::span<const ParamOverride> overrides;

    const QuantSpec* spec_for(const std::string& name) const {
        if (!quant) return nullptr;
        auto it = quant->find(name);
        return it == quant->end() ? nullptr : &it->second;
    }

    std::span<const float> values(const Layer& layer, bool weight) const {
        const std::string name = weight ? weight_name(layer.name) : bias_name(layer.name);
        for (const auto& o : overrides) {
            if (o.name == name) return o.values;
        }
        return weight ? std::span<const float>(layer.weight) : std::span<const float>(layer.bias);
    }
};

void check_inputs(const ModelGraph& model, const Dataset& data, const QuantMap* quant,
                  std::span<const ParamOverride> overrides) {
    if (model.empty() || model.parameters().empty()) {
        throw Error(ErrorKind::shape_mismatch, "model has no affine layers");
    }
    if (model.input_dim() != data.feature_dim()) {
        throw Error(ErrorKind::shape_mismatch,
                    "model input dim " + std::to_string(model.input_dim()) + " != dataset feature dim " +
                        std::to_string(data.feature_dim()));
    }
    if (model.output_dim() != data.num_classes()) {
        throw Error(ErrorKind::shape_mismatch,
                    "model output dim " + std::to_string(model.output_dim()) + " != num_classes " +
                        std::to_string(data.num_classes()));
    }
    if (quant) {
        for (const auto& [name, spec] : *quant) {
            if (!model.has_parameter(name) && !model.has_activation(name)) {
                throw Error(ErrorKind::unknown_tensor, "quantizer refers to unknown tensor '" + name + "'");
            }
            validate(spec);
        }
    }
    for (const auto& o : overrides) {
        const ParamInfo& p = model.parameter_info(o.name);
        if (o.values.size() != p.numel()) {
            throw Error(ErrorKind::shape_mismatch, "override for '" + std::string(o.name) + "' has wrong size");
        }
    }
}

void quantize_into(std::span<const float> x, const QuantSpec& spec, std::vector<float>& out) {
    out.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(quantize_value(x[i], spec));
}

// Runs the layer chain on `in` (N x input_dim). Fills caches when given.
// `logits` receives the last layer's output before rounding to float.
std::vector<float> run_layers(const Pass& pass, std::vector<float> act, std::size_t n,
                              std::vector<LayerCache>* caches,
                              std::map<std::string, double, std::less<>>* act_max,
                              std::vector<double>* logits = nullptr) {
    const auto& layers = pass.model.layers();
    if (caches) caches->resize(layers.size());
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const Layer& layer = layers[li];
        std::vector<float> out(n * layer.out_dim);
        const bool last = li + 1 == layers.size();
        std::vector<double> wide;
        LayerCache local;
        LayerCache& c = caches ? (*caches)[li] : local;
        if (layer.kind == LayerKind::affine) {
            c.weight_raw = pass.values(layer, true);
            c.bias_raw = pass.values(layer, false);
            std::span<const float> w = c.weight_raw;
            std::span<const float> b = c.bias_raw;
            if (const QuantSpec* s = pass.spec_for(weight_name(layer.name))) {
                quantize_into(c.weight_raw, *s, c.weight_q);
                w = c.weight_q;
            }
            if (const QuantSpec* s = pass.spec_for(bias_name(layer.name))) {
                quantize_into(c.bias_raw, *s, c.bias_q);
                b = c.bias_q;
            }
            const std::size_t in_dim = layer.in_dim;
            if (last && logits) wide.resize(out.size());
            for (std::size_t r = 0; r < n; ++r) {
                const float* a = act.data() + r * in_dim;
                float* z = out.data() + r * layer.out_dim;
                for (std::size_t o = 0; o < layer.out_dim; ++o) {
                    const float* wr = w.data() + o * in_dim;
                    double acc = b[o];
                    for (std::size_t j = 0; j < in_dim; ++j) acc += static_cast<double>(wr[j]) * a[j];
                    z[o] = static_cast<float>(acc);
                    if (!wide.empty()) wide[r * layer.out_dim + o] = acc;
                }
            }
        } else {
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = act[i] > 0.0f ? act[i] : 0.0f;
            if (last && logits) wide.assign(out.begin(), out.end());
        }
        if (act_max) {
            double m = (*act_max)[activation_name(layer.name)];
            for (float v : out) m = std::max(m, static_cast<double>(std::fabs(v)));
            (*act_max)[activation_name(layer.name)] = m;
        }
        const QuantSpec* act_spec = pass.spec_for(activation_name(layer.name));
        if (caches) {
            c.input = std::move(act);
            if (act_spec) c.pre_quant = out;
        }
        if (act_spec) {
            for (float& v : out) v = static_cast<float>(quantize_value(v, *act_spec));
            for (double& v : wide) v = quantize_value(v, *act_spec);
        }
        if (last && logits) *logits = std::move(wide);
        if (caches) c.output = out;
        act = std::move(out);
    }
    return act;
}

std::size_t argmax(const double* z, std::size_t c) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < c; ++k) {
        if (z[k] > z[best]) best = k;
    }
    return best;
}

// Loss and accuracy of logits; writes dL/dlogits of the mean loss when `dlogits` is set.
EvalResult head(LossKind loss, std::span<const double> logits, const Dataset& data,
                std::vector<float>* dlogits) {
    const std::size_t n = data.size();
    const std::size_t c = data.num_classes();
    const auto labels = data.labels();
    if (dlogits) dlogits->assign(n * c, 0.0f);
    double total = 0.0;
    std::size_t correct = 0;
    std::vector<double> p(c);
    for (std::size_t r = 0; r < n; ++r) {
        const double* z = logits.data() + r * c;
        const std::size_t y = labels[r];
        if (argmax(z, c) == y) ++correct;
        if (loss == LossKind::softmax_cross_entropy) {
            double m = z[0];
            for (std::size_t k = 1; k < c; ++k) m = std::max(m, z[k]);
            double sum = 0.0;
            for (std::size_t k = 0; k < c; ++k) {
                p[k] = std::exp(z[k] - m);
                sum += p[k];
            }
            total += m + std::log(sum) - z[y];
            if (dlogits) {
                for (std::size_t k = 0; k < c; ++k) {
                    const double g = p[k] / sum - (k == y ? 1.0 : 0.0);
                    (*dlogits)[r * c + k] = static_cast<float>(g / static_cast<double>(n));
                }
            }
        } else {
            for (std::size_t k = 0; k < c; ++k) {
                const double d = z[k] - (k == y ? 1.0 : 0.0);
                total += 0.5 * d * d;
                if (dlogits) (*dlogits)[r * c + k] = static_cast<float>(d / static_cast<double>(n));
            }
        }
    }
    EvalResult res;
    res.loss = total / static_cast<double>(n);
    res.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (!std::isfinite(res.loss)) {
        throw Error(ErrorKind::non_finite, "loss is not finite");
    }
    return res;
}

// Straight-through backward of the quantizer: returns dL/dx and accumulates scale grads.
void quant_backward(std::span<const float> x, std::span<const float> q, std::span<const float> dq,
                    const QuantSpec& s, std::vector<float>* dx, ScaleGradient* sg) {
    if (dx) dx->resize(x.size());
    double da = 0.0;
    double dg = 0.0;
    const double ag = s.alpha * s.gamma;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const bool inside = std::fabs(s.alpha * x[i]) <= 1.0;
        if (dx) (*dx)[i] = inside ? static_cast<float>(dq[i] * ag) : 0.0f;
        if (sg) {
            if (inside) da += static_cast<double>(dq[i]) * s.gamma * x[i];
            dg += static_cast<double>(dq[i]) * q[i] / s.gamma;
        }
    }
    if (sg) {
        sg->alpha += da;
        sg->gamma += dg;
    }
}

}  // namespace

EvalResult forward(const ModelGraph& model, const Dataset& data, const QuantMap* quant,
                   std::span<const ParamOverride> overrides) {
    check_inputs(model, data, quant, overrides);
    Pass pass{model, quant, overrides};
    const auto f = data.features();
    std::vector<double> logits;
    run_layers(pass, std::vector<float>(f.begin(), f.end()), data.size(), nullptr, nullptr, &logits);
    return head(model.loss(), logits, data, nullptr);
}

std::vector<float> compute_logits(const ModelGraph& model, std::span<const float> features,
                                  const QuantMap* quant) {
    const std::size_t dim = model.input_dim();
    if (dim == 0 || features.size() % dim != 0) {
        throw Error(ErrorKind::shape_mismatch, "feature matrix does not match the model input dim");
    }
    Pass pass{model, quant, {}};
    return run_layers(pass, std::vector<float>(features.begin(), features.end()), features.size() / dim,
                      nullptr, nullptr);
}

BackwardResult backward(const ModelGraph& model, const Dataset& data, const QuantMap* quant,
                        std::span<const std::string> wrt, bool want_scale_gradients,
                        std::span<const ParamOverride> overrides) {
    check_inputs(model, data, quant, overrides);
    std::set<std::string, std::less<>> wanted;
    std::size_t stop = model.layers().size();
    for (const auto& name : wrt) {
        const ParamInfo& p = model.parameter_info(name);
        wanted.insert(name);
        stop = std::min(stop, p.layer_index);
    }
    if (want_scale_gradients && quant && !quant->empty()) stop = 0;

    Pass pass{model, quant, overrides};
    std::vector<LayerCache> caches;
    const auto f = data.features();
    const std::size_t n = data.size();
    std::vector<double> logits;
    run_layers(pass, std::vector<float>(f.begin(), f.end()), n, &caches, nullptr, &logits);

    BackwardResult res;
    std::vector<float> d;
    res.eval = head(model.loss(), logits, data, &d);
    if (want_scale_gradients && quant) {
        for (const auto& [name, spec] : *quant) res.scales[name] = ScaleGradient{};
    }

    const auto& layers = model.layers();
    for (std::size_t li = layers.size(); li-- > stop;) {
        const Layer& layer = layers[li];
        LayerCache& c = caches[li];
        const std::string act = activation_name(layer.name);
        if (const QuantSpec* s = pass.spec_for(act)) {
            std::vector<float> dpre;
            quant_backward(c.pre_quant, c.output, d, *s, &dpre,
                           want_scale_gradients ? &res.scales[act] : nullptr);
            d = std::move(dpre);
        }
        const bool need_input = li > stop;
        if (layer.kind == LayerKind::relu) {
            if (!need_input) break;
            for (std::size_t i = 0; i < d.size(); ++i) {
                if (!(c.input[i] > 0.0f)) d[i] = 0.0f;
            }
            continue;
        }

        const std::size_t in_dim = layer.in_dim;
        const std::size_t out_dim = layer.out_dim;
        const std::string wname = weight_name(layer.name);
        const std::string bname = bias_name(layer.name);
        const QuantSpec* ws = pass.spec_for(wname);
        const QuantSpec* bs = pass.spec_for(bname);
        const bool need_w = wanted.count(wname) || (want_scale_gradients && ws);
        const bool need_b = wanted.count(bname) || (want_scale_gradients && bs);
        if (need_w || need_b) {
            std::vector<double> dw(need_w ? out_dim * in_dim : 0, 0.0);
            std::vector<double> db(out_dim, 0.0);
            for (std::size_t r = 0; r < n; ++r) {
                const float* dr = d.data() + r * out_dim;
                const float* a = c.input.data() + r * in_dim;
                for (std::size_t o = 0; o < out_dim; ++o) {
                    const double g = dr[o];
                    db[o] += g;
                    if (need_w && g != 0.0) {
                        double* row = dw.data() + o * in_dim;
                        for (std::size_t j = 0; j < in_dim; ++j) row[j] += g * a[j];
                    }
                }
            }
            auto finish = [&](const std::string& name, const std::vector<double>& g,
                              std::span<const float> raw, const std::vector<float>& q,
                              const QuantSpec* spec) {
                std::vector<float> gf(g.begin(), g.end());
                if (spec) {
                    std::vector<float> graw;
                    quant_backward(raw, q, gf, *spec, wanted.count(name) ? &graw : nullptr,
                                   want_scale_gradients ? &res.scales[name] : nullptr);
                    gf = std::move(graw);
                }
                if (wanted.count(name)) res.params[name] = std::move(gf);
            };
            if (need_w) finish(wname, dw, c.weight_raw, c.weight_q, ws);
            if (need_b) finish(bname, db, c.bias_raw, c.bias_q, bs);
        }
        if (!need_input) break;
        std::span<const float> w = c.weight_q.empty() ? c.weight_raw : std::span<const float>(c.weight_q);
        std::vector<float> din(n * in_dim, 0.0f);
        for (std::size_t r = 0; r < n; ++r) {
            const float* dr = d.data() + r * out_dim;
            float* dir = din.data() + r * in_dim;
            for (std::size_t o = 0; o < out_dim; ++o) {
                const float g = dr[o];
                if (g == 0.0f) continue;
                const float* wr = w.data() + o * in_dim;
                for (std::size_t j = 0; j < in_dim; ++j) dir[j] += g * wr[j];
            }
        }
        d = std::move(din);
    }
    return res;
}

GradientMap gradients(const ModelGraph& model, const Dataset& data, std::span<const std::string> wrt,
                      std::span<const ParamOverride> overrides) {
    return backward(model, data, nullptr, wrt, false, overrides).params;
}

double hvp_step(std::span<const float> values) { return 1e-3 * (1.0 + max_abs(values)); }

std::vector<float> hessian_vector_product(const ModelGraph& model, const Dataset& data,
                                          std::string_view tensor, std::span<const float> v) {
    const std::span<const float> w = model.parameter(tensor);
    if (v.size() != w.size()) {
        throw Error(ErrorKind::shape_mismatch, "direction for '" + std::string(tensor) + "' has " +
                                                   std::to_string(v.size()) + " elements, expected " +
                                                   std::to_string(w.size()));
    }
    if (!all_finite(v)) throw Error(ErrorKind::non_finite, "direction vector is not finite");

    const double eps = hvp_step(w);
    std::vector<float> plus(w.size());
    std::vector<float> minus(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        plus[i] = static_cast<float>(w[i] + eps * v[i]);
        minus[i] = static_cast<float>(w[i] - eps * v[i]);
    }
    const std::string name(tensor);
    const std::string wrt[] = {name};
    const ParamOverride op[] = {{name, plus}};
    const ParamOverride om[] = {{name, minus}};
    const auto gp = gradients(model, data, wrt, op).at(name);
    const auto gm = gradients(model, data, wrt, om).at(name);
    std::vector<float> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        out[i] = static_cast<float>((static_cast<double>(gp[i]) - gm[i]) / (2.0 * eps));
    }
    return out;
}

std::map<std::string, double, std::less<>> activation_abs_max(const ModelGraph& model,
                                                              const Dataset& data,
                                                              std::size_t batch_size) {
    check_inputs(model, data, nullptr, {});
    if (batch_size == 0) batch_size = data.size();
    std::map<std::string, double, std::less<>> out;
    for (const auto& name : model.activation_names()) out[name] = 0.0;
    Pass pass{model, nullptr, {}};
    const auto f = data.features();
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t rows = std::min(batch_size, data.size() - start);
        auto first = f.begin() + static_cast<std::ptrdiff_t>(start * data.feature_dim());
        std::vector<float> batch(first, first + static_cast<std::ptrdiff_t>(rows * data.feature_dim()));
        run_layers(pass, std::move(batch), rows, nullptr, &out);
    }
    return out;
}

}  // namespace mpq
