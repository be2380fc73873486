#include "lidarseg/runconfig.hpp"

#include "lidarseg/errors.hpp"
#include "lidarseg/rng.hpp"

#include <stdexcept>

namespace lidarseg {
namespace {

void reject_unknown_keys(const nlohmann::json &user, const nlohmann::json &tmpl,
                         const std::string &path) {
    if (user.is_object()) {
        if (!tmpl.is_object())
            throw FormatError("config: " + (path.empty() ? "root" : path) +
                              " should not be an object");
        for (const auto &item : user.items()) {
            const std::string child = path.empty() ? item.key() : path + "." + item.key();
            auto it = tmpl.find(item.key());
            if (it == tmpl.end())
                throw FormatError("config: unknown key \"" + child + "\"");
            reject_unknown_keys(item.value(), *it, child);
        }
    } else if (user.is_array() && tmpl.is_array() && !tmpl.empty() && tmpl.front().is_object()) {
        for (std::size_t i = 0; i < user.size(); ++i)
            reject_unknown_keys(user[i], tmpl.front(), path + "[" + std::to_string(i) + "]");
    }
}

void deep_merge(nlohmann::json &base, const nlohmann::json &user) {
    if (!user.is_object() || !base.is_object()) {
        base = user;
        return;
    }
    for (const auto &item : user.items()) {
        auto it = base.find(item.key());
        if (it != base.end())
            deep_merge(*it, item.value());
        else
            base[item.key()] = item.value();
    }
}

} // namespace

void RunConfig::validate() const {
    if (synth_scene_count < 1)
        throw std::invalid_argument("synth.scene_count must be at least 1");
    if (pipeline.num_classes < 2 || pipeline.num_classes > 32)
        throw std::invalid_argument("num_classes must be in [2, 32]");
    if (pipeline.voxel_target == 0)
        throw std::invalid_argument("fuse.voxel_target must be positive");
    if (!(pipeline.knn_grid_cell > 0.0))
        throw std::invalid_argument("fuse.grid_cell must be positive");
    pipeline.preseg.validate();
    pipeline.annotation.validate();
    TrainConfig t = train;
    t.num_classes = pipeline.num_classes;
    t.validate();
    if (train_scope != "scan" && train_scope != "window")
        throw std::invalid_argument("train.scope must be \"scan\" or \"window\"");
    if (!(distill_temperature > 0.0))
        throw std::invalid_argument("distill.temperature must be positive");
    if (export_mode != "components" && export_mode != "labels" && export_mode != "ground")
        throw std::invalid_argument("export.mode must be components, labels or ground");
}

RunConfig default_run_config() {
    RunConfig c;
    c.synth_scene = default_scene_spec();
    c.pipeline.num_classes = default_scene_num_classes();
    c.train.num_classes = c.pipeline.num_classes;
    return c;
}

nlohmann::json run_config_to_json(const RunConfig &config) {
    nlohmann::json scene, preseg, label, features, train;
    to_json(scene, config.synth_scene);
    to_json(preseg, config.pipeline.preseg);
    to_json(label, config.pipeline.annotation);
    to_json(features, config.pipeline.features);
    features.erase("time_channel");  // follows train.scope instead
    to_json(train, config.train);
    train.erase("num_classes");  // lives at the top level, mirrored into training
    train.erase("features");     // its own section
    train["scope"] = config.train_scope;

    return nlohmann::json{
        {"num_classes", config.pipeline.num_classes},
        {"synth", {{"scene_count", config.synth_scene_count}, {"scene", scene}}},
        {"fuse",
         {{"voxel_target", config.pipeline.voxel_target},
          {"grid_cell", config.pipeline.knn_grid_cell}}},
        {"preseg", preseg},
        {"label", label},
        {"features", features},
        {"train", train},
        {"distill",
         {{"temperature", config.distill_temperature},
          {"teacher_checkpoint", config.teacher_checkpoint},
          {"student_checkpoint", config.student_checkpoint}}},
        {"eval", {{"checkpoint", config.eval_checkpoint}}},
        {"export", {{"mode", config.export_mode}}}};
}

RunConfig run_config_from_json(const nlohmann::json &j) {
    if (!j.is_object()) throw FormatError("config: root must be a JSON object");
    nlohmann::json doc = run_config_to_json(default_run_config());
    reject_unknown_keys(j, doc, "");
    deep_merge(doc, j);

    RunConfig c;
    try {
        doc.at("num_classes").get_to(c.pipeline.num_classes);
        doc.at("synth").at("scene_count").get_to(c.synth_scene_count);
        from_json(doc.at("synth").at("scene"), c.synth_scene);
        doc.at("fuse").at("voxel_target").get_to(c.pipeline.voxel_target);
        doc.at("fuse").at("grid_cell").get_to(c.pipeline.knn_grid_cell);
        from_json(doc.at("preseg"), c.pipeline.preseg);
        from_json(doc.at("label"), c.pipeline.annotation);
        nlohmann::json features = doc.at("features");
        features["time_channel"] = false;
        from_json(features, c.pipeline.features);
        nlohmann::json train = doc.at("train");
        train.at("scope").get_to(c.train_scope);
        train.erase("scope");
        train["num_classes"] = c.pipeline.num_classes;
        train["features"] = features;
        from_json(train, c.train);
        doc.at("distill").at("temperature").get_to(c.distill_temperature);
        doc.at("distill").at("teacher_checkpoint").get_to(c.teacher_checkpoint);
        doc.at("distill").at("student_checkpoint").get_to(c.student_checkpoint);
        doc.at("eval").at("checkpoint").get_to(c.eval_checkpoint);
        doc.at("export").at("mode").get_to(c.export_mode);
    } catch (const nlohmann::json::exception &e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

void apply_override(nlohmann::json &j, const std::string &assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("--set expects key.path=value, got \"" + assignment + "\"");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);

    nlohmann::json *node = &j;
    std::size_t pos = 0;
    while (true) {
        const std::size_t dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (part.empty())
            throw std::invalid_argument("--set: empty path segment in \"" + key + "\"");
        if (!node->is_object() || !node->contains(part))
            throw std::invalid_argument("--set: unknown config key \"" + key + "\"");
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    if (node->is_object() || node->is_array())
        throw std::invalid_argument("--set: \"" + key + "\" is not a scalar setting");

    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;  // unquoted strings arrive verbatim
    if (node->is_string() && !value.is_string())
        value = raw;  // "mode=components" style: keep the literal text
    *node = value;
}

void apply_master_seed(nlohmann::json &j, std::uint64_t seed) {
    j["synth"]["scene"]["seed"] = mix_seed(seed, 0x73796eu);
    j["preseg"]["rng_seed"] = mix_seed(seed, 0x707265u);
    j["label"]["rng_seed"] = mix_seed(seed, 0x6c6162u);
    j["train"]["seed"] = mix_seed(seed, 0x747261u);
}

} // namespace lidarseg
