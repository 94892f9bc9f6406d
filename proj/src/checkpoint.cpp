#include "tamperlab/io/checkpoint.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <unordered_map>
#include <vector>

#include "tamperlab/core/errors.hpp"

namespace tamperlab {

using nlohmann::json;

std::uint64_t fnv1a64(const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

json config_to_json(const ModelConfig& c) {
    return json{{"image_size", c.image_size},
                {"base_patch", c.base_patch},
                {"stage_dims", c.stage_dims},
                {"blocks_per_stage", c.blocks_per_stage},
                {"head_dim", c.head_dim},
                {"mlp_ratio", c.mlp_ratio},
                {"loc_width", c.loc_width},
                {"cls_proj_width", c.cls_proj_width},
                {"cls_patch", c.cls_patch},
                {"cls_dim", c.cls_dim},
                {"cls_blocks", c.cls_blocks},
                {"cls_heads", c.cls_heads},
                {"cls_positional", c.cls_positional}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.image_size = j.at("image_size").get<int>();
    c.base_patch = j.at("base_patch").get<int>();
    c.stage_dims = j.at("stage_dims").get<std::vector<int>>();
    c.blocks_per_stage = j.at("blocks_per_stage").get<int>();
    c.head_dim = j.at("head_dim").get<int>();
    c.mlp_ratio = j.at("mlp_ratio").get<int>();
    c.loc_width = j.at("loc_width").get<int>();
    c.cls_proj_width = j.at("cls_proj_width").get<int>();
    c.cls_patch = j.at("cls_patch").get<int>();
    c.cls_dim = j.at("cls_dim").get<int>();
    c.cls_blocks = j.at("cls_blocks").get<int>();
    c.cls_heads = j.at("cls_heads").get<int>();
    c.cls_positional = j.at("cls_positional").get<bool>();
    return c;
}

struct NamedTensorRef {
    std::string name;
    Tensor<float>* tensor;
};

std::vector<NamedTensorRef> collect(Model<float>& model, const AdamState<float>* opt) {
    std::vector<NamedTensorRef> out;
    model.visit_params([&out](const std::string& n, Tensor<float>& t) { out.push_back({n, &t}); });
    if (opt && opt->initialized()) {
        // moment tensors follow the same walk order as the parameters
        std::size_t k = 0;
        model.visit_params([&](const std::string& n, Tensor<float>&) {
            out.push_back({"adam.m." + n, const_cast<Tensor<float>*>(&opt->m[k])});
            out.push_back({"adam.v." + n, const_cast<Tensor<float>*>(&opt->v[k])});
            ++k;
        });
    }
    return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, Model<float>& model,
                     const AdamState<float>* opt, const CheckpointMeta& meta) {
    std::filesystem::create_directories(dir);
    auto refs = collect(model, opt);

    std::vector<char> blob;
    json tensors = json::array();
    for (const auto& r : refs) {
        const std::size_t bytes = static_cast<std::size_t>(r.tensor->size()) * sizeof(float);
        tensors.push_back(json{{"name", r.name},
                               {"shape", r.tensor->shape()},
                               {"offset", blob.size()},
                               {"bytes", bytes}});
        const char* src = reinterpret_cast<const char*>(r.tensor->ptr());
        blob.insert(blob.end(), src, src + bytes);
    }

    json manifest{
        {"format_version", 1},
        {"dtype", "float32"},
        {"blob", "params.bin"},
        {"content_hash", fnv1a64(blob.data(), blob.size())},
        {"model_config", config_to_json(model.cfg)},
        {"tensors", tensors},
        {"epoch", meta.epoch},
        {"adam_step", meta.adam_step},
        {"has_optimizer", opt != nullptr && opt->initialized()},
        {"rng", {{"seed", std::to_string(meta.rng_seed)}, {"counter", std::to_string(meta.rng_counter)}}},
        {"config_echo", meta.config_echo},
    };

    {
        std::ofstream f(dir / "params.bin", std::ios::binary | std::ios::trunc);
        if (!f) throw CheckpointError("cannot write " + (dir / "params.bin").string());
        f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    }
    {
        std::ofstream f(dir / "manifest.json", std::ios::trunc);
        if (!f) throw CheckpointError("cannot write " + (dir / "manifest.json").string());
        f << manifest.dump(2) << "\n";
    }
}

Model<float> load_checkpoint(const std::filesystem::path& dir, AdamState<float>* opt,
                             CheckpointMeta* meta) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw CheckpointError("missing manifest.json in " + dir.string());
    json manifest = json::parse(mf);
    if (manifest.at("dtype").get<std::string>() != "float32")
        throw CheckpointError("unsupported checkpoint dtype");

    std::ifstream bf(dir / manifest.at("blob").get<std::string>(), std::ios::binary);
    if (!bf) throw CheckpointError("missing blob file in " + dir.string());
    std::vector<char> blob((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());
    const auto want_hash = manifest.at("content_hash").get<std::uint64_t>();
    if (fnv1a64(blob.data(), blob.size()) != want_hash)
        throw CheckpointError("checkpoint blob hash mismatch (corrupt file?)");

    Model<float> model(config_from_json(manifest.at("model_config")), /*init_seed=*/0);

    std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> table;  // name -> (offset, bytes)
    for (const auto& t : manifest.at("tensors"))
        table[t.at("name").get<std::string>()] = {t.at("offset").get<std::size_t>(),
                                                  t.at("bytes").get<std::size_t>()};

    auto fill = [&blob, &table, &dir](const std::string& name, Tensor<float>& t) {
        auto it = table.find(name);
        if (it == table.end()) throw CheckpointError("tensor missing from checkpoint: " + name);
        const auto [off, bytes] = it->second;
        if (bytes != static_cast<std::size_t>(t.size()) * sizeof(float))
            throw CheckpointError("tensor size mismatch: " + name + " in " + dir.string());
        std::memcpy(t.ptr(), blob.data() + off, bytes);
    };
    model.visit_params(fill);

    const bool has_opt = manifest.value("has_optimizer", false);
    if (opt) {
        std::vector<Tensor<float>*> params;
        model.visit_params([&params](const std::string&, Tensor<float>& t) { params.push_back(&t); });
        opt->init_like(params);
        if (has_opt) {
            std::size_t k = 0;
            model.visit_params([&](const std::string& n, Tensor<float>&) {
                fill("adam.m." + n, opt->m[k]);
                fill("adam.v." + n, opt->v[k]);
                ++k;
            });
            opt->step = manifest.value("adam_step", 0L);
        }
    }
    if (meta) {
        meta->epoch = manifest.value("epoch", 0);
        meta->adam_step = manifest.value("adam_step", 0L);
        meta->rng_seed = std::stoull(manifest.at("rng").at("seed").get<std::string>());
        meta->rng_counter = std::stoull(manifest.at("rng").at("counter").get<std::string>());
        meta->config_echo = manifest.value("config_echo", std::string());
    }
    return model;
}

}  // namespace tamperlab
