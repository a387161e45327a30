#include "intrafair/checkpoint.hpp"

#include "intrafair/errors.hpp"

#include <fstream>

namespace intrafair {

using nlohmann::json;

namespace {

json vec_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vec_from_json(const json& j, Eigen::Index expected, const char* what) {
    const auto values = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != expected)
        throw ParseError(std::string("checkpoint: ") + what + " has wrong length");
    return Eigen::Map<const Vector>(values.data(), expected);
}

}  // namespace

json model_to_json(const MlpModel& model) {
    json layers = json::array();
    for (const auto& l : model.layers) {
        json j;
        j["kind"] = std::string(to_string(l.spec.kind));
        switch (l.spec.kind) {
            case LayerKind::linear: {
                j["width"] = l.spec.width;
                std::vector<double> w;
                w.reserve(static_cast<std::size_t>(l.weight.size()));
                for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
                    for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
                j["weight"] = w;
                j["bias"] = vec_to_json(l.bias);
                break;
            }
            case LayerKind::batchnorm:
                j["width"] = l.spec.width;
                j["scale"] = vec_to_json(l.scale);
                j["shift"] = vec_to_json(l.shift);
                j["running_mean"] = vec_to_json(l.running_mean);
                j["running_var"] = vec_to_json(l.running_var);
                break;
            case LayerKind::dropout: j["p"] = l.spec.dropout_p; break;
            default: break;
        }
        layers.push_back(std::move(j));
    }
    json mask = json::array();
    for (const auto& m : model.pruned) mask.push_back(std::vector<int>(m.begin(), m.end()));
    return json{{"format_version", kCheckpointFormatVersion},
                {"input_width", model.input_width},
                {"threshold", model.threshold},
                {"layers", std::move(layers)},
                {"prune_mask", std::move(mask)}};
}

MlpModel model_from_json(const json& doc) {
    try {
        if (doc.at("format_version").get<int>() != kCheckpointFormatVersion)
            throw ParseError("checkpoint: unsupported format_version");
        MlpModel model;
        model.input_width = doc.at("input_width").get<int>();
        model.threshold = doc.at("threshold").get<double>();
        int width = model.input_width;
        for (const auto& j : doc.at("layers")) {
            Layer l;
            l.spec.kind = parse_layer_kind(j.at("kind").get<std::string>());
            switch (l.spec.kind) {
                case LayerKind::linear: {
                    l.spec.width = j.at("width").get<int>();
                    const auto w = j.at("weight").get<std::vector<double>>();
                    if (l.spec.width <= 0 || w.size() != static_cast<std::size_t>(l.spec.width) * static_cast<std::size_t>(width))
                        throw ParseError("checkpoint: linear weight has wrong size");
                    l.weight.resize(l.spec.width, width);
                    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
                        for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                            l.weight(r, c) = w[static_cast<std::size_t>(r * width + c)];
                    l.bias = vec_from_json(j.at("bias"), l.spec.width, "bias");
                    width = l.spec.width;
                    break;
                }
                case LayerKind::batchnorm:
                    l.spec.width = j.at("width").get<int>();
                    l.scale = vec_from_json(j.at("scale"), l.spec.width, "scale");
                    l.shift = vec_from_json(j.at("shift"), l.spec.width, "shift");
                    l.running_mean = vec_from_json(j.at("running_mean"), l.spec.width, "running_mean");
                    l.running_var = vec_from_json(j.at("running_var"), l.spec.width, "running_var");
                    break;
                case LayerKind::dropout: l.spec.dropout_p = j.at("p").get<double>(); break;
                default: break;
            }
            model.layers.push_back(std::move(l));
        }
        for (const auto& m : doc.at("prune_mask")) {
            const auto bits = m.get<std::vector<int>>();
            model.pruned.emplace_back(bits.begin(), bits.end());
        }
        model.validate();
        return model;
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    } catch (const PreconditionError& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    out << model_to_json(model).dump() << '\n';
}

MlpModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open checkpoint " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError("checkpoint " + path.string() + ": " + e.what());
    }
    return model_from_json(doc);
}

}  // namespace intrafair
