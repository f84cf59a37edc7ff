// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#include "mpq/cost_model.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "mpq/error.hpp"
#include "mpq/model_io.hpp"

namespace mpq {

std::string describe(const KernelKey& key) {
    std::ostringstream ss;
    ss << "matmul m=" << key.m << " n=" << key.n << " k=" << key.k << " bits=" << key.bits;
    return ss.str();
}

void LatencyTable::add(const KernelKey& key, double latency_us) {
    if (!(latency_us > 0.0) || !std::isfinite(latency_us)) {
        throw Error(ErrorKind::data, "latency for " + describe(key) + " must be positive");
    }
    if (!entries_.emplace(key, latency_us).second) {
        throw Error(ErrorKind::data, "duplicate latency entry for " + describe(key));
    }
}

double LatencyTable::lookup(const KernelKey& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw Error(ErrorKind::data, "latency table has no entry for " + describe(key));
    return it->second;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r' && c != ' ' && c != '\t') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line_no) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw Error(ErrorKind::data, "latency table line " + std::to_string(line_no) + ": bad number '" + s + "'");
    }
    return v;
}

}  // namespace

LatencyTable LatencyTable::parse_csv(const std::string& text) {
    LatencyTable table;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cols = split(line, ',');
        if (!header) {
            if (cols != std::vector<std::string>{"kind", "m", "n", "k", "bits", "latency_us"}) {
                throw Error(ErrorKind::data, "latency table header must be kind,m,n,k,bits,latency_us");
            }
            header = true;
            continue;
        }
        if (cols.size() != 6) {
            throw Error(ErrorKind::data, "latency table line " + std::to_string(line_no) + ": expected 6 columns");
        }
        if (cols[0] != "matmul") {
            throw Error(ErrorKind::data, "latency table line " + std::to_string(line_no) + ": unknown kind '" + cols[0] + "'");
        }
        KernelKey key;
        key.m = parse_number<std::size_t>(cols[1], line_no);
        key.n = parse_number<std::size_t>(cols[2], line_no);
        key.k = parse_number<std::size_t>(cols[3], line_no);
        key.bits = parse_number<int>(cols[4], line_no);
        table.add(key, parse_number<double>(cols[5], line_no));
    }
    if (!header) throw Error(ErrorKind::data, "latency table is empty");
    return table;
}

LatencyTable LatencyTable::load_csv(const std::filesystem::path& path) {
    return parse_csv(read_text_file(path));
}

std::string LatencyTable::to_csv() const {
    std::ostringstream ss;
    ss.precision(17);
    ss << "kind,m,n,k,bits,latency_us\n";
    for (const auto& [key, us] : entries_) {
        ss << "matmul," << key.m << ',' << key.n << ',' << key.k << ',' << key.bits << ',' << us << '\n';
    }
    return ss.str();
}

KernelKey affine_kernel(const Layer& layer, int bits) {
    return KernelKey{KernelKind::matmul, 1, layer.out_dim, layer.in_dim, bits};
}

double model_size(const ModelGraph& model, const QuantConfig& config) {
    double bytes = 0.0;
    for (const ParamInfo& p : model.parameters()) {
        bytes += static_cast<double>(p.numel()) * config.bits_of(p.name) / 8.0;
    }
    return bytes;
}

double model_latency(const ModelGraph& model, const QuantConfig& config, const LatencyTable& table) {
    double us = 0.0;
    for (const Layer& layer : model.layers()) {
        if (layer.kind != LayerKind::affine) continue;
        const KernelKey key = affine_kernel(layer, config.bits_of(weight_name(layer.name)));
        if (!table.contains(key)) {
            throw Error(ErrorKind::data, "latency table has no entry for layer '" + layer.name + "' (" +
                                             describe(key) + ")");
        }
        us += table.lookup(key);
    }
    return us;
}

CostReport cost_report(const ModelGraph& model, const QuantConfig& config, const LatencyTable& table,
                       int baseline_bits) {
    QuantConfig base;
    base.baseline_bits = baseline_bits;
    for (const auto& name : model.parameter_names()) base.bits[name] = baseline_bits;

    CostReport r;
    r.size_bytes = model_size(model, config);
    r.latency_us = model_latency(model, config, table);
    r.baseline_size_bytes = model_size(model, base);
    r.baseline_latency_us = model_latency(model, base, table);
    r.relative_size = r.baseline_size_bytes > 0.0 ? r.size_bytes / r.baseline_size_bytes : 0.0;
    r.relative_latency = r.baseline_latency_us > 0.0 ? r.latency_us / r.baseline_latency_us : 0.0;
    return r;
}

}  // namespace mpq
