#include "ed2/nn/checkpoint.hpp"

#include "ed2/common/errors.hpp"
#include "ed2/common/numfmt.hpp"

#include <fstream>

namespace ed2::nn {

std::string checkpoint_to_string(const nlohmann::json& spec, const ParamSet& params) {
    std::string out = "{\"spec\":" + spec.dump() + ",\"tensors\":[";
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i) out += ',';
        out += "{\"name\":" + nlohmann::json(params.name(i)).dump() + ",\"shape\":" +
               nlohmann::json(params[i].shape).dump() + ",\"values\":" + format_double_array(params[i].values) + "}";
    }
    out += "]}";
    return out;
}

nlohmann::json checkpoint_to_json(const nlohmann::json& spec, const ParamSet& params) {
    return nlohmann::json::parse(checkpoint_to_string(spec, params));
}

ParamSet checkpoint_from_json(const nlohmann::json& doc, nlohmann::json* spec_out) {
    ParamSet params;
    try {
        for (const auto& t : doc.at("tensors")) {
            ParamTensor tensor;
            tensor.shape = t.at("shape").get<std::vector<std::size_t>>();
            tensor.values = t.at("values").get<std::vector<double>>();
            params.add(t.at("name").get<std::string>(), std::move(tensor));
        }
        if (spec_out != nullptr) *spec_out = doc.at("spec");
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(0, std::string("checkpoint: ") + e.what());
    } catch (const InvalidInput& e) {
        throw ParseError(0, std::string("checkpoint: ") + e.what());
    }
    return params;
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& spec, const ParamSet& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out << checkpoint_to_string(spec, params) << '\n';
}

ParamSet load_checkpoint(const std::filesystem::path& path, nlohmann::json* spec_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(0, std::string("checkpoint: ") + e.what());
    }
    return checkpoint_from_json(doc, spec_out);
}

}  // namespace ed2::nn
