// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0

#include "mpq/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mpq/error.hpp"

namespace mpq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

void append_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t read_u32(const std::string& blob, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[offset + i])) << (8 * i);
    }
    return v;
}

void append_floats(std::string& out, std::span<const float> values) {
    for (float f : values) append_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::vector<float> read_floats(const std::string& blob, std::size_t offset, std::size_t count,
                               const std::string& what) {
    if (offset % 4 != 0 || offset > blob.size() || count > (blob.size() - offset) / 4) {
        throw Error(ErrorKind::data, what + " lies outside its blob");
    }
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<float>(read_u32(blob, offset + 4 * i));
    return out;
}

std::string read_binary(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::data, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_binary(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::data, "cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::data, "failed writing '" + path.string() + "'");
}

json parse_manifest(const fs::path& path, std::string_view format) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::data, "malformed manifest '" + path.string() + "': " + e.what());
    }
    if (!j.is_object() || j.value("format", "") != format) {
        throw Error(ErrorKind::data, "'" + path.string() + "' is not a " + std::string(format) + " manifest");
    }
    if (j.value("version", 0) != kFormatVersion) {
        throw Error(ErrorKind::data, "unsupported manifest version in '" + path.string() + "'");
    }
    return j;
}

template <typename Fn>
auto manifest_field(const fs::path& path, Fn&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::data, "bad field in '" + path.string() + "': " + e.what());
    }
}

fs::path sibling(const fs::path& manifest, const std::string& suffix) {
    return manifest.parent_path() / (manifest.stem().string() + suffix);
}

}  // namespace

std::string read_text_file(const fs::path& path) { return read_binary(path); }

void write_text_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_binary(path, text);
}

void save_model(const ModelGraph& model, const fs::path& manifest) {
    const fs::path blob_path = sibling(manifest, ".bin");
    std::string blob;
    json layers = json::array();
    for (const Layer& l : model.layers()) {
        json jl = {{"name", l.name}, {"kind", to_string(l.kind)}};
        if (l.kind == LayerKind::affine) {
            jl["in_dim"] = l.in_dim;
            jl["out_dim"] = l.out_dim;
            jl["weight_offset"] = blob.size();
            append_floats(blob, l.weight);
            jl["bias_offset"] = blob.size();
            append_floats(blob, l.bias);
        }
        layers.push_back(std::move(jl));
    }
    json j = {{"format", "mpq.model"},
              {"version", kFormatVersion},
              {"loss", to_string(model.loss())},
              {"blob", blob_path.filename().string()},
              {"blob_bytes", blob.size()},
              {"layers", std::move(layers)}};
    write_text_file(manifest, j.dump(2) + "\n");
    write_binary(blob_path, blob);
}

ModelGraph load_model(const fs::path& manifest) {
    const json j = parse_manifest(manifest, "mpq.model");
    return manifest_field(manifest, [&] {
        const std::string blob = read_binary(manifest.parent_path() / j.at("blob").get<std::string>());
        if (blob.size() != j.at("blob_bytes").get<std::size_t>()) {
            throw Error(ErrorKind::data, "parameter blob size does not match manifest");
        }
        LossKind loss = LossKind::softmax_cross_entropy;
        const std::string loss_name = j.value("loss", "softmax_cross_entropy");
        if (loss_name == "squared_error") {
            loss = LossKind::squared_error;
        } else if (loss_name != "softmax_cross_entropy") {
            throw Error(ErrorKind::data, "unknown loss '" + loss_name + "'");
        }
        std::vector<Layer> layers;
        for (const json& jl : j.at("layers")) {
            const std::string name = jl.at("name").get<std::string>();
            const std::string kind = jl.at("kind").get<std::string>();
            if (kind == "relu") {
                layers.push_back(Layer::relu(name));
            } else if (kind == "affine") {
                const auto in = jl.at("in_dim").get<std::size_t>();
                const auto out = jl.at("out_dim").get<std::size_t>();
                auto w = read_floats(blob, jl.at("weight_offset").get<std::size_t>(), in * out,
                                     "weight of '" + name + "'");
                auto b = read_floats(blob, jl.at("bias_offset").get<std::size_t>(), out,
                                     "bias of '" + name + "'");
                layers.push_back(Layer::affine(name, in, out, std::move(w), std::move(b)));
            } else {
                throw Error(ErrorKind::data, "unknown layer kind '" + kind + "'");
            }
        }
        try {
            return ModelGraph(std::move(layers), loss);
        } catch (const Error& e) {
            throw Error(ErrorKind::data, "invalid model '" + manifest.string() + "': " + e.what());
        }
    });
}

void save_dataset(const Dataset& data, const fs::path& manifest) {
    const fs::path fpath = sibling(manifest, ".features.bin");
    const fs::path lpath = sibling(manifest, ".labels.bin");
    std::string fblob;
    append_floats(fblob, data.features());
    std::string lblob;
    for (std::uint32_t y : data.labels()) append_u32(lblob, y);
    json j = {{"format", "mpq.dataset"},
              {"version", kFormatVersion},
              {"num_examples", data.size()},
              {"feature_dim", data.feature_dim()},
              {"num_classes", data.num_classes()},
              {"features", fpath.filename().string()},
              {"labels", lpath.filename().string()}};
    write_text_file(manifest, j.dump(2) + "\n");
    write_binary(fpath, fblob);
    write_binary(lpath, lblob);
}

Dataset load_dataset(const fs::path& manifest) {
    const json j = parse_manifest(manifest, "mpq.dataset");
    return manifest_field(manifest, [&] {
        const auto n = j.at("num_examples").get<std::size_t>();
        const auto dim = j.at("feature_dim").get<std::size_t>();
        const auto classes = j.at("num_classes").get<std::size_t>();
        const std::string fblob = read_binary(manifest.parent_path() / j.at("features").get<std::string>());
        const std::string lblob = read_binary(manifest.parent_path() / j.at("labels").get<std::string>());
        if (fblob.size() != n * dim * 4 || lblob.size() != n * 4) {
            throw Error(ErrorKind::data, "dataset blob sizes do not match manifest '" + manifest.string() + "'");
        }
        std::vector<float> features = read_floats(fblob, 0, n * dim, "features");
        std::vector<std::uint32_t> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = read_u32(lblob, 4 * i);
        try {
            return Dataset(dim, classes, std::move(features), std::move(labels));
        } catch (const Error& e) {
            throw Error(ErrorKind::data, "invalid dataset '" + manifest.string() + "': " + e.what());
        }
    });
}

}  // namespace mpq
