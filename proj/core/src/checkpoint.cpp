#include "dfcn/checkpoint.hpp"

#include "dfcn/csv.hpp"
#include "dfcn/error.hpp"

namespace dfcn {

namespace {
constexpr const char* kFormat = "dfcn-checkpoint/1";
}

nlohmann::json model_to_json(const TrainedModel& model) {
    nlohmann::json log = nlohmann::json::array();
    for (const auto& e : model.log) {
        log.push_back({{"phase", e.phase},
                       {"epoch", e.epoch},
                       {"classification", e.classification},
                       {"reconstruction", e.reconstruction},
                       {"total", e.total},
                       {"val_auc", e.val_auc ? nlohmann::json(*e.val_auc) : nlohmann::json(nullptr)}});
    }
    nlohmann::json j{{"format", kFormat},
                     {"spec", model.spec.to_json()},
                     {"normalizer", model.normalizer.to_json()},
                     {"best_epoch", model.best_epoch},
                     {"log", log}};
    if (model.is_forest())
        j["forest"] = model.forest().to_json();
    else
        j["network"] = model.network().to_json();
    return j;
}

TrainedModel model_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string()) != kFormat) throw Error("not a dfcn checkpoint");
    TrainedModel model;
    model.spec = ModelSpec::from_json(j.at("spec"));
    model.normalizer = Normalizer::from_json(j.at("normalizer"));
    model.best_epoch = j.value("best_epoch", std::size_t{0});
    for (const auto& e : j.at("log")) {
        EpochLog entry;
        entry.phase = e.at("phase").get<std::size_t>();
        entry.epoch = e.at("epoch").get<std::size_t>();
        entry.classification = e.at("classification").get<double>();
        entry.reconstruction = e.at("reconstruction").get<double>();
        entry.total = e.at("total").get<double>();
        if (!e.at("val_auc").is_null()) entry.val_auc = e.at("val_auc").get<double>();
        model.log.push_back(entry);
    }
    if (j.contains("forest"))
        model.body = forest::Forest::from_json(j.at("forest"));
    else
        model.body = nn::NetworkParams::from_json(j.at("network"));
    return model;
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
    io::write_file_atomic(path, model_to_json(model).dump() + "\n");
}

TrainedModel load_model(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("checkpoint not found: " + path.string());
    try {
        return model_from_json(nlohmann::json::parse(io::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

}  // namespace dfcn
