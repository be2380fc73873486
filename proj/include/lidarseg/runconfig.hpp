#pragma once

#include "lidarseg/dataset.hpp"
#include "lidarseg/synthetic.hpp"
#include "lidarseg/toymodel.hpp"

#include <json.hpp>

#include <string>

namespace lidarseg {

/// Everything the CLI can be told, one nested document. Serialized layout:
/// {"synth": {...}, "fuse": {...}, "preseg": {...}, "label": {...},
///  "features": {...}, "train": {...}, "distill": {...}, "eval": {...},
///  "export": {...}}. The features section has no time_channel switch; that
/// follows train.scope (fused-window models get the extra channel).
struct RunConfig {
    SyntheticSceneSpec synth_scene;  // "synth.scene"
    int synth_scene_count = 4;

    PipelineConfig pipeline;  // fuse/preseg/label sections plus num_classes

    TrainConfig train;
    std::string train_scope = "scan";  // "scan": per-scan student; "window": fused teacher

    double distill_temperature = 4.0;
    std::string teacher_checkpoint;  // defaults to <run>/checkpoints/teacher.ckpt
    std::string student_checkpoint;  // defaults to <run>/checkpoints/student.ckpt

    std::string eval_checkpoint;  // defaults to the newest checkpoint in <run>/checkpoints

    std::string export_mode = "components";  // components | labels | ground

    void validate() const;
};

RunConfig default_run_config();

nlohmann::json run_config_to_json(const RunConfig &config);

/// Strict parse: every key must be known (checked recursively against the
/// default layout) and every section is optional but complete-after-merge.
/// Throws FormatError on unknown keys, std::invalid_argument on bad values.
RunConfig run_config_from_json(const nlohmann::json &j);

/// Applies one "dotted.path=value" assignment onto a config document. The
/// value is parsed as JSON when possible, else taken as a string. The path
/// must resolve to an existing scalar (no new keys). Throws
/// std::invalid_argument on malformed assignments or unknown paths.
void apply_override(nlohmann::json &j, const std::string &assignment);

/// Overwrites every rng seed field in the document from one master seed,
/// deriving distinct per-module values.
void apply_master_seed(nlohmann::json &j, std::uint64_t seed);

} // namespace lidarseg
