#include "lidarseg/dataset.hpp"
#include "lidarseg/errors.hpp"
#include "lidarseg/fuse.hpp"
#include "lidarseg/kitti_io.hpp"
#include "lidarseg/labeling.hpp"
#include "lidarseg/metrics.hpp"
#include "lidarseg/parallel.hpp"
#include "lidarseg/preseg.hpp"
#include "lidarseg/rng.hpp"
#include "lidarseg/runconfig.hpp"
#include "lidarseg/synthetic.hpp"
#include "lidarseg/toymodel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// LESS_LOG: error < warn (default) < info < debug.
int log_level() {
    static const int level = [] {
        const char *env = std::getenv("LESS_LOG");
        if (!env) return 1;
        const std::string v(env);
        if (v == "error") return 0;
        if (v == "warn") return 1;
        if (v == "info") return 2;
        if (v == "debug") return 3;
        return 1;
    }();
    return level;
}

void log_info(const std::string &msg) {
    if (log_level() >= 2) std::cerr << "[info] " << msg << "\n";
}

void log_debug(const std::string &msg) {
    if (log_level() >= 3) std::cerr << "[debug] " << msg << "\n";
}

struct CommonArgs {
    std::string config_path;
    std::string in_path;
    std::string out_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 0;
    std::vector<std::string> sets;
};

void add_common(CLI::App *sub, CommonArgs &a, bool needs_in) {
    sub->add_option("--config", a.config_path, "JSON config file");
    if (needs_in) sub->add_option("--in", a.in_path, "Input directory")->required();
    sub->add_option("--out", a.out_path, "Output (run) directory")->required();
    sub->add_option("--seed", a.seed, "Master seed; overrides every config seed")
        ->each([&a](const std::string &) { a.seed_given = true; });
    sub->add_option("--threads", a.threads, "Worker thread cap (0 = hardware default)");
    sub->add_option("--set", a.sets, "Config override key.path=value (repeatable)");
}

struct LoadedConfig {
    lidarseg::RunConfig cfg;
    json doc;  // fully resolved document, written beside outputs
};

LoadedConfig load_config(const CommonArgs &a) {
    json doc = lidarseg::run_config_to_json(lidarseg::default_run_config());
    if (!a.config_path.empty()) {
        std::ifstream in(a.config_path);
        if (!in) throw std::invalid_argument("--config: cannot open " + a.config_path);
        json user;
        try {
            in >> user;
        } catch (const json::exception &e) {
            throw std::invalid_argument("--config: " + a.config_path + ": " + e.what());
        }
        // Validate and merge over defaults, then re-serialize to a full doc.
        doc = lidarseg::run_config_to_json(lidarseg::run_config_from_json(user));
    }
    if (a.seed_given) lidarseg::apply_master_seed(doc, a.seed);
    for (const std::string &s : a.sets) lidarseg::apply_override(doc, s);
    LoadedConfig out;
    out.cfg = lidarseg::run_config_from_json(doc);
    out.doc = lidarseg::run_config_to_json(out.cfg);
    return out;
}

void write_text(const fs::path &path, const std::string &text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw lidarseg::DataError("cannot write " + path.string());
    out << text;
}

void write_resolved_config(const fs::path &out_dir, const std::string &name, const json &doc) {
    write_text(out_dir / (name + "_config.json"), doc.dump(2) + "\n");
}

void require_dir(const std::string &flag, const std::string &path) {
    if (!fs::is_directory(path))
        throw std::invalid_argument(flag + ": no such directory: " + path);
}

lidarseg::SyntheticSequence load_scene_dir(const fs::path &dir) {
    auto [scans, poses] = lidarseg::load_sequence(dir);
    lidarseg::SyntheticSequence seq;
    seq.scans = std::move(scans);
    seq.poses = std::move(poses);
    return seq;
}

lidarseg::FusedCloud fuse_scene(const lidarseg::SyntheticSequence &seq,
                                const lidarseg::PipelineConfig &pc) {
    lidarseg::FusedCloud fused = lidarseg::fuse_scans(seq.scans, seq.poses);
    return lidarseg::voxel_downsample(fused, pc.voxel_target).cloud;
}

struct DatasetIndex {
    fs::path root;
    std::vector<fs::path> scenes;
    std::vector<int> train, val;
    int num_classes = 0;
};

DatasetIndex read_dataset_index(const fs::path &root) {
    const fs::path manifest = root / "dataset.json";
    std::ifstream in(manifest);
    if (!in) throw lidarseg::DataError("dataset manifest not found: " + manifest.string());
    json j;
    try {
        in >> j;
        DatasetIndex idx;
        idx.root = root;
        for (const auto &s : j.at("scenes")) idx.scenes.push_back(root / s.get<std::string>());
        idx.train = j.at("train").get<std::vector<int>>();
        idx.val = j.at("val").get<std::vector<int>>();
        idx.num_classes = j.at("num_classes").get<int>();
        for (int i : idx.train)
            if (i < 0 || i >= static_cast<int>(idx.scenes.size()))
                throw lidarseg::ConsistencyError(manifest.string() + ": train index out of range");
        for (int i : idx.val)
            if (i < 0 || i >= static_cast<int>(idx.scenes.size()))
                throw lidarseg::ConsistencyError(manifest.string() + ": val index out of range");
        return idx;
    } catch (const json::exception &e) {
        throw lidarseg::FormatError(manifest.string() + ": " + e.what());
    }
}

std::vector<lidarseg::SceneBundle> build_bundles(const DatasetIndex &idx,
                                                 const std::vector<int> &which,
                                                 const lidarseg::PipelineConfig &pc) {
    std::vector<lidarseg::SceneBundle> out;
    for (int i : which) {
        log_debug("preparing scene " + idx.scenes[static_cast<std::size_t>(i)].string());
        out.push_back(lidarseg::prepare_scene(
            load_scene_dir(idx.scenes[static_cast<std::size_t>(i)]), pc));
    }
    return out;
}

// ---- subcommands ----

void cmd_synth(const CommonArgs &a) {
    LoadedConfig lc = load_config(a);
    const fs::path out(a.out_path);
    fs::create_directories(out / "scenes");

    json scenes = json::array();
    for (int i = 0; i < lc.cfg.synth_scene_count; ++i) {
        lidarseg::SyntheticSceneSpec spec = lc.cfg.synth_scene;
        spec.seed = lidarseg::mix_seed(lc.cfg.synth_scene.seed, 0x7363u,
                                       static_cast<std::uint64_t>(i));
        const lidarseg::SyntheticSequence seq = lidarseg::generate_synthetic(spec);
        char stem[16];
        std::snprintf(stem, sizeof stem, "%03d", i);
        const fs::path dir = out / "scenes" / stem;
        lidarseg::write_sequence(dir, seq, &spec);
        scenes.push_back(std::string("scenes/") + stem);
        std::size_t pts = 0;
        for (const auto &s : seq.scans) pts += s.size();
        log_info("scene " + std::string(stem) + ": " + std::to_string(seq.scans.size()) +
                 " scans, " + std::to_string(pts) + " points");
    }

    json manifest;
    manifest["num_classes"] = lc.cfg.pipeline.num_classes;
    manifest["scenes"] = scenes;
    std::vector<int> train, val;
    if (lc.cfg.synth_scene_count == 1) {
        train = {0};
        val = {0};
    } else {
        for (int i = 0; i + 1 < lc.cfg.synth_scene_count; ++i) train.push_back(i);
        val = {lc.cfg.synth_scene_count - 1};
    }
    manifest["train"] = train;
    manifest["val"] = val;
    write_text(out / "dataset.json", manifest.dump(2) + "\n");
    write_resolved_config(out, "synth", lc.doc);
}

void cmd_preseg(const CommonArgs &a) {
    LoadedConfig lc = load_config(a);
    require_dir("--in", a.in_path);
    const lidarseg::FusedCloud cloud = fuse_scene(load_scene_dir(a.in_path), lc.cfg.pipeline);
    log_info("fused cloud: " + std::to_string(cloud.size()) + " points");
    const lidarseg::PresegResult result = lidarseg::presegment(cloud, lc.cfg.pipeline.preseg);
    log_info("components: " + std::to_string(result.components.size()) + ", ignored points: " +
             std::to_string(result.ignored_ids.size()));
    const fs::path out(a.out_path);
    lidarseg::save_preseg(out / "preseg", result, cloud);
    write_resolved_config(out, "preseg", lc.doc);
}

void cmd_label(const CommonArgs &a) {
    LoadedConfig lc = load_config(a);
    require_dir("--in", a.in_path);
    const fs::path out(a.out_path);
    const lidarseg::FusedCloud cloud = fuse_scene(load_scene_dir(a.in_path), lc.cfg.pipeline);
    const lidarseg::PresegResult preseg = lidarseg::load_preseg(out / "preseg");
    if (preseg.num_points() != cloud.size())
        throw lidarseg::ConsistencyError(
            "presegmentation covers " + std::to_string(preseg.num_points()) +
            " points but the fused cloud has " + std::to_string(cloud.size()) +
            "; rerun preseg with the same fuse settings");
    const std::vector<lidarseg::SparseLabel> clicks = lidarseg::simulate_annotation(
        cloud, preseg, lc.cfg.pipeline.annotation, lc.cfg.pipeline.num_classes);
    const lidarseg::LabelBundle bundle =
        lidarseg::derive_labels(preseg, clicks, lc.cfg.pipeline.num_classes);
    log_info("clicks: " + std::to_string(bundle.sparse.size()) + " (" +
             std::to_string(100.0 * static_cast<double>(bundle.sparse.size()) /
                            static_cast<double>(cloud.size())) +
             "% of points)");
    lidarseg::save_labels(out / "labels", bundle);
    write_resolved_config(out, "label", lc.doc);
}

void cmd_stats(const CommonArgs &a) {
    LoadedConfig lc = load_config(a);
    require_dir("--in", a.in_path);
    const fs::path out(a.out_path);
    const lidarseg::FusedCloud cloud = fuse_scene(load_scene_dir(a.in_path), lc.cfg.pipeline);
    if (!cloud.has_gt())
        throw lidarseg::ConsistencyError("stats needs ground-truth labels in the input sequence");
    const lidarseg::PresegResult preseg = lidarseg::load_preseg(out / "preseg");
    if (preseg.num_points() != cloud.size())
        throw lidarseg::ConsistencyError("presegmentation and fused cloud point counts differ");
    const lidarseg::LabelBundle bundle = lidarseg::load_labels(out / "labels");
    const lidarseg::StatsReport report = lidarseg::label_statistics(bundle, preseg, cloud);
    write_text(out / "stats.json", lidarseg::stats_to_json(report).dump(2) + "\n");
    write_resolved_config(out, "stats", lc.doc);
    std::cout << lidarseg::stats_to_table(report);
}

lidarseg::TrainConfig training_config(const lidarseg::RunConfig &cfg, int num_classes) {
    lidarseg::TrainConfig tc = cfg.train;
    tc.num_classes = num_classes;
    return tc;
}

// Cached features must have been produced with the same static channels the
// model expects; the time channel alone may differ.
void check_static_features(lidarseg::FeatureConfig model, lidarseg::FeatureConfig pipeline,
                           const std::string &what) {
    model.time_channel = pipeline.time_channel = false;
    const bool same = model.knn == pipeline.knn && model.coord_scale == pipeline.coord_scale &&
                      model.z_scale == pipeline.z_scale &&
                      model.range_scale == pipeline.range_scale &&
                      model.local_scale == pipeline.local_scale &&
                      model.time_scale == pipeline.time_scale;
    if (!same)
        throw lidarseg::ConsistencyError(what +
                                         ": checkpoint feature settings differ from the "
                                         "features section of this run's config");
}

void cmd_train(const CommonArgs &a) {
    LoadedConfig lc = load_config(a);
    require_dir("--in", a.in_path);
    const fs::path out(a.out_path);
    const DatasetIndex idx = read_dataset_index(a.in_path);
    if (idx.num_classes != lc.cfg.pipeline.num_classes)
        throw lidarseg::ConsistencyError(
            "dataset has " + std::to_string(idx.num_classes) + " classes but config says " +
            std::to_string(lc.cfg.pipeline.num_classes));

    const bool window_scope = lc.cfg.train_scope == "window";
    lc.cfg.train.features.time_channel = window_scope;
    lc.cfg.train.losses.use_distill = false;  // the distill subcommand owns that phase
    lc.doc = lidarseg::run_config_to_json(lc.cfg);

    const std::vector<lidarseg::SceneBundle> train_b =
        build_bundles(idx, idx.train, lc.cfg.pipeline);
    const std::vector<lidarseg::SceneBundle> val_b = build_bundles(idx, idx.val, lc.cfg.pipeline);

    std::vector<lidarseg::TrainView> train_views, val_views;
    for (const auto &b : train_b) {
        if (window_scope) {
            train_views.push_back(lidarseg::teacher_view(b, lidarseg::LabelMode::ClicksAndPropagated));
        } else {
            for (std::size_t s = 0; s < b.scans.size(); ++s)
                train_views.push_back(
                    lidarseg::student_view(b, s, lidarseg::LabelMode::ClicksAndPropagated));
        }
    }
    for (const auto &b : val_b) {
        if (window_scope) {
            val_views.push_back(lidarseg::teacher_view(b, lidarseg::LabelMode::ClicksAndPropagated));
        } else {
            for (std::size_t s = 0; s < b.scans.size(); ++s)
                val_views.push_back(
                    lidarseg::student_view(b, s, lidarseg::LabelMode::ClicksAndPropagated));
        }
    }
    log_info("training on " + std::to_string(train_views.size()) + " views (" +
             (window_scope ? "fused windows" : "single scans") + ")");

    const lidarseg::TrainResult result =
        lidarseg::train(train_views, val_views, training_config(lc.cfg, idx.num_classes));

    const fs::path ckpt = out / "checkpoints" / (window_scope ? "teacher.ckpt" : "student.ckpt");
    fs::create_directories(ckpt.parent_path());
    json sidecar;
    sidecar["scope"] = lc.cfg.train_scope;
    lidarseg::save_checkpoint(ckpt, result.model, result.bank, sidecar);

    write_text(out / "train_curves.csv", lidarseg::loss_rows_csv(result.loss_rows));
    json report;
    report["val_miou_history"] = result.val_miou_history;
    report["final_val_miou"] =
        result.val_miou_history.empty() ? json() : json(result.val_miou_history.back());
    report["checkpoint"] = ckpt.lexically_relative(out).generic_string();
    write_text(out / "train_report.json", report.dump(2) + "\n");
    write_resolved_config(out, "train", lc.doc);
    if (!result.val_miou_history.empty())
        std::cout << "val mIoU " << result.val_miou_history.back() << "\n";
}

void cmd_distill(const CommonArgs &a) {
    LoadedConfig lc = load_config(a);
    require_dir("--in", a.in_path);
    const fs::path out(a.out_path);
    const DatasetIndex idx = read_dataset_index(a.in_path);

    const fs::path teacher_path = lc.cfg.teacher_checkpoint.empty()
                                      ? out / "checkpoints" / "teacher.ckpt"
                                      : fs::path(lc.cfg.teacher_checkpoint);
    const fs::path student_path = lc.cfg.student_checkpoint.empty()
                                      ? out / "checkpoints" / "student.ckpt"
                                      : fs::path(lc.cfg.student_checkpoint);
    const lidarseg::Checkpoint teacher = lidarseg::load_checkpoint(teacher_path);
    const lidarseg::Checkpoint student = lidarseg::load_checkpoint(student_path);
    if (!teacher.model.features.time_channel)
        throw lidarseg::ConsistencyError(teacher_path.string() +
                                         ": expected a fused-window (teacher) model");
    if (student.model.features.time_channel)
        throw lidarseg::ConsistencyError(student_path.string() +
                                         ": expected a single-scan (student) model");
    if (teacher.model.num_classes != idx.num_classes ||
        student.model.num_classes != idx.num_classes)
        throw lidarseg::ConsistencyError("checkpoint class count does not match the dataset");
    check_static_features(teacher.model.features, lc.cfg.pipeline.features, teacher_path.string());
    check_static_features(student.model.features, lc.cfg.pipeline.features, student_path.string());

    std::vector<lidarseg::SceneBundle> train_b = build_bundles(idx, idx.train, lc.cfg.pipeline);
    const std::vector<lidarseg::SceneBundle> val_b = build_bundles(idx, idx.val, lc.cfg.pipeline);
    lidarseg::fill_teacher_logits(train_b, teacher.model);

    std::vector<lidarseg::TrainView> views, val_views;
    for (const auto &b : train_b)
        for (std::size_t s = 0; s < b.scans.size(); ++s)
            views.push_back(
                lidarseg::student_view(b, s, lidarseg::LabelMode::ClicksAndPropagated, true));
    for (const auto &b : val_b)
        for (std::size_t s = 0; s < b.scans.size(); ++s)
            val_views.push_back(lidarseg::student_view(b, s, lidarseg::LabelMode::ClicksAndPropagated));

    lidarseg::TrainConfig tc = training_config(lc.cfg, idx.num_classes);
    tc.features = student.model.features;
    tc.losses.use_distill = true;
    tc.losses.distill_T = lc.cfg.distill_temperature;
    tc.lr = tc.lr_decayed;  // fine-tune at the decayed rate
    const lidarseg::TrainResult result =
        lidarseg::train_from(student.model, student.bank, views, val_views, tc);

    const fs::path ckpt = out / "checkpoints" / "student_distilled.ckpt";
    fs::create_directories(ckpt.parent_path());
    json sidecar;
    sidecar["scope"] = "scan";
    sidecar["distilled_from"] = teacher_path.filename().string();
    lidarseg::save_checkpoint(ckpt, result.model, result.bank, sidecar);

    write_text(out / "distill_curves.csv", lidarseg::loss_rows_csv(result.loss_rows));
    json report;
    report["val_miou_history"] = result.val_miou_history;
    report["final_val_miou"] =
        result.val_miou_history.empty() ? json() : json(result.val_miou_history.back());
    report["checkpoint"] = ckpt.lexically_relative(out).generic_string();
    write_text(out / "distill_report.json", report.dump(2) + "\n");
    write_resolved_config(out, "distill", lc.doc);
    if (!result.val_miou_history.empty())
        std::cout << "val mIoU " << result.val_miou_history.back() << "\n";
}

void cmd_eval(const CommonArgs &a) {
    LoadedConfig lc = load_config(a);
    require_dir("--in", a.in_path);
    const fs::path out(a.out_path);
    const DatasetIndex idx = read_dataset_index(a.in_path);

    fs::path ckpt_path;
    if (!lc.cfg.eval_checkpoint.empty()) {
        ckpt_path = lc.cfg.eval_checkpoint;
    } else {
        for (const char *name : {"student_distilled.ckpt", "student.ckpt", "teacher.ckpt"}) {
            const fs::path candidate = out / "checkpoints" / name;
            if (fs::exists(candidate)) {
                ckpt_path = candidate;
                break;
            }
        }
        if (ckpt_path.empty())
            throw lidarseg::DataError("no checkpoint under " + (out / "checkpoints").string() +
                                      "; set eval.checkpoint or run train first");
    }
    const lidarseg::Checkpoint cp = lidarseg::load_checkpoint(ckpt_path);
    if (cp.model.num_classes != idx.num_classes)
        throw lidarseg::ConsistencyError("checkpoint class count does not match the dataset");
    check_static_features(cp.model.features, lc.cfg.pipeline.features, ckpt_path.string());

    const std::vector<lidarseg::SceneBundle> val_b = build_bundles(idx, idx.val, lc.cfg.pipeline);
    std::vector<lidarseg::TrainView> views;
    for (const auto &b : val_b) {
        if (cp.model.features.time_channel) {
            views.push_back(lidarseg::teacher_view(b, lidarseg::LabelMode::ClicksAndPropagated));
        } else {
            for (std::size_t s = 0; s < b.scans.size(); ++s)
                views.push_back(
                    lidarseg::student_view(b, s, lidarseg::LabelMode::ClicksAndPropagated));
        }
    }
    const lidarseg::IouReport report = lidarseg::evaluate(cp.model, views);
    write_text(out / "eval.json", lidarseg::iou_report_json(report));
    write_resolved_config(out, "eval", lc.doc);
    std::cout << "mIoU " << report.miou << " over " << views.size() << " views\n";
}

void cmd_export_ply(const CommonArgs &a) {
    LoadedConfig lc = load_config(a);
    require_dir("--in", a.in_path);
    const fs::path out(a.out_path);
    const lidarseg::FusedCloud cloud = fuse_scene(load_scene_dir(a.in_path), lc.cfg.pipeline);

    std::vector<std::uint32_t> color_ids;
    if (lc.cfg.export_mode == "labels") {
        const lidarseg::LabelBundle bundle = lidarseg::load_labels(out / "labels");
        if (bundle.propagated.size() != cloud.size())
            throw lidarseg::ConsistencyError("labels and fused cloud point counts differ");
        color_ids.assign(cloud.size(), lidarseg::kNoComponent);
        for (std::size_t i = 0; i < cloud.size(); ++i)
            if (bundle.propagated[i] != lidarseg::kNoClass)
                color_ids[i] = bundle.propagated[i];
        for (const lidarseg::SparseLabel &s : bundle.sparse) color_ids[s.point_id] = s.class_id;
    } else {
        const lidarseg::PresegResult preseg = lidarseg::load_preseg(out / "preseg");
        if (preseg.num_points() != cloud.size())
            throw lidarseg::ConsistencyError("presegmentation and fused cloud point counts differ");
        if (lc.cfg.export_mode == "components") {
            color_ids = preseg.component_of;
        } else {  // ground
            color_ids.assign(cloud.size(), lidarseg::kNoComponent);
            for (std::size_t c = 0; c < preseg.components.size(); ++c) {
                const std::uint32_t id =
                    preseg.components[c].kind == lidarseg::Component::Kind::Ground ? 1u : 4u;
                for (std::uint32_t p : preseg.components[c].point_ids) color_ids[p] = id;
            }
        }
    }
    lidarseg::write_ply(out / "export.ply", cloud, color_ids);
    write_resolved_config(out, "export", lc.doc);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Label-efficient LiDAR segmentation pipeline"};
    app.require_subcommand(1);

    CommonArgs a_synth, a_preseg, a_label, a_stats, a_train, a_distill, a_eval, a_export;
    CLI::App *synth = app.add_subcommand("synth", "Generate synthetic KITTI-style sequences");
    add_common(synth, a_synth, /*needs_in=*/false);
    CLI::App *preseg = app.add_subcommand("preseg", "Fuse a sequence and presegment it");
    add_common(preseg, a_preseg, true);
    CLI::App *label = app.add_subcommand("label", "Simulate component-wise annotation");
    add_common(label, a_label, true);
    CLI::App *stats = app.add_subcommand("stats", "Report component purity and label coverage");
    add_common(stats, a_stats, true);
    CLI::App *train = app.add_subcommand("train", "Train a model on a generated dataset");
    add_common(train, a_train, true);
    CLI::App *distill = app.add_subcommand("distill", "Fine-tune a student against a teacher");
    add_common(distill, a_distill, true);
    CLI::App *eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on validation scenes");
    add_common(eval_cmd, a_eval, true);
    CLI::App *export_ply = app.add_subcommand("export-ply", "Write a colored point cloud");
    add_common(export_ply, a_export, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            lidarseg::set_max_threads(a_synth.threads);
            cmd_synth(a_synth);
        } else if (preseg->parsed()) {
            lidarseg::set_max_threads(a_preseg.threads);
            cmd_preseg(a_preseg);
        } else if (label->parsed()) {
            lidarseg::set_max_threads(a_label.threads);
            cmd_label(a_label);
        } else if (stats->parsed()) {
            lidarseg::set_max_threads(a_stats.threads);
            cmd_stats(a_stats);
        } else if (train->parsed()) {
            lidarseg::set_max_threads(a_train.threads);
            cmd_train(a_train);
        } else if (distill->parsed()) {
            lidarseg::set_max_threads(a_distill.threads);
            cmd_distill(a_distill);
        } else if (eval_cmd->parsed()) {
            lidarseg::set_max_threads(a_eval.threads);
            cmd_eval(a_eval);
        } else if (export_ply->parsed()) {
            lidarseg::set_max_threads(a_export.threads);
            cmd_export_ply(a_export);
        }
    } catch (const std::invalid_argument &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const lidarseg::DataError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
