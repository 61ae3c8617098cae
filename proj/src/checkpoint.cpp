#include "imprint/checkpoint.hpp"

#include <fstream>

#include "imprint/error.hpp"

namespace imprint {

using nlohmann::json;

json network_spec_to_json(const NetworkSpec& spec) {
    return {
        {"input_dim", spec.input_dim},
        {"hidden_dims", spec.hidden_dims},
        {"embedding_dim", spec.embedding_dim},
        {"num_classes", spec.num_classes},
        {"head_kind", to_string(spec.head_kind)},
        {"joint_bias", spec.joint_bias},
        {"norm_eps", spec.norm_eps},
    };
}

NetworkSpec network_spec_from_json(const json& doc) {
    NetworkSpec spec;
    spec.input_dim = doc.at("input_dim").get<std::size_t>();
    spec.hidden_dims = doc.at("hidden_dims").get<std::vector<std::size_t>>();
    spec.embedding_dim = doc.at("embedding_dim").get<std::size_t>();
    spec.num_classes = doc.at("num_classes").get<std::size_t>();
    spec.head_kind = head_kind_from_string(doc.at("head_kind").get<std::string>());
    spec.joint_bias = doc.at("joint_bias").get<bool>();
    spec.norm_eps = doc.at("norm_eps").get<double>();
    spec.validate();
    return spec;
}

template <typename T>
json checkpoint_to_json(const ModelParams<T>& params, const CheckpointMeta& meta) {
    json tensors = json::array();
    const auto names = params.names();
    const auto values = params.tensors();
    for (std::size_t i = 0; i < values.size(); ++i) {
        tensors.push_back({
            {"name", names[i]},
            {"shape", values[i].shape()},
            {"data", std::vector<T>(values[i].data().begin(), values[i].data().end())},
        });
    }
    return {
        {"format", "imprint-checkpoint"},
        {"version", kCheckpointVersion},
        {"precision", sizeof(T) == 4 ? "float32" : "float64"},
        {"spec", network_spec_to_json(params.spec)},
        {"tensors", std::move(tensors)},
        {"metadata", {{"epoch", meta.epoch}, {"val_accuracy", meta.val_accuracy}, {"stage", meta.stage}}},
    };
}

template <typename T>
ModelParams<T> checkpoint_from_json(const json& doc, CheckpointMeta* meta) {
    try {
        if (doc.at("format") != "imprint-checkpoint") throw DataError("not an imprint checkpoint");
        if (doc.at("version").get<int>() != kCheckpointVersion) {
            throw DataError("unsupported checkpoint version " + doc.at("version").dump());
        }
        const auto spec = network_spec_from_json(doc.at("spec"));
        Rng unused(0);
        auto params = init_params<T>(spec, unused);
        auto targets = params.tensors();
        const auto names = params.names();
        const auto& stored = doc.at("tensors");
        if (stored.size() != targets.size()) throw DataError("checkpoint tensor count does not match its spec");
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const auto& entry = stored[i];
            if (entry.at("name").get<std::string>() != names[i]) {
                throw DataError("checkpoint tensor " + std::to_string(i) + " is '" +
                                entry.at("name").get<std::string>() + "', expected '" + names[i] + "'");
            }
            if (entry.at("shape").get<Shape>() != targets[i].shape()) {
                throw DataError("checkpoint tensor '" + names[i] + "' has the wrong shape");
            }
            const auto data = entry.at("data").get<std::vector<T>>();
            if (data.size() != targets[i].numel()) throw DataError("checkpoint tensor '" + names[i] + "' is truncated");
            std::copy(data.begin(), data.end(), targets[i].data().begin());
        }
        if (meta) {
            const auto& m = doc.at("metadata");
            meta->epoch = m.at("epoch").get<int>();
            meta->val_accuracy = m.at("val_accuracy").get<double>();
            meta->stage = m.value("stage", "");
        }
        return params;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    } catch (const ContractError& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<T>& params, const CheckpointMeta& meta) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out << checkpoint_to_json(params, meta).dump() << '\n';
}

template <typename T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
    }
    return checkpoint_from_json<T>(doc, meta);
}

template json checkpoint_to_json<float>(const ModelParams<float>&, const CheckpointMeta&);
template json checkpoint_to_json<double>(const ModelParams<double>&, const CheckpointMeta&);
template ModelParams<float> checkpoint_from_json<float>(const json&, CheckpointMeta*);
template ModelParams<double> checkpoint_from_json<double>(const json&, CheckpointMeta*);
template void save_checkpoint<float>(const std::filesystem::path&, const ModelParams<float>&, const CheckpointMeta&);
template void save_checkpoint<double>(const std::filesystem::path&, const ModelParams<double>&, const CheckpointMeta&);
template ModelParams<float> load_checkpoint<float>(const std::filesystem::path&, CheckpointMeta*);
template ModelParams<double> load_checkpoint<double>(const std::filesystem::path&, CheckpointMeta*);

}  // namespace imprint
