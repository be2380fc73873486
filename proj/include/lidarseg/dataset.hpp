#pragma once

#include "lidarseg/fuse.hpp"
#include "lidarseg/labeling.hpp"
#include "lidarseg/preseg.hpp"
#include "lidarseg/spatial_grid.hpp"
#include "lidarseg/synthetic.hpp"
#include "lidarseg/toymodel.hpp"
#include "lidarseg/types.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace lidarseg {

/// Shared knobs for turning a scan sequence into training material.
struct PipelineConfig {
    PresegConfig preseg;
    AnnotationConfig annotation;
    FeatureConfig features;  // static channels; time_channel is per model
    int num_classes = 8;
    std::size_t voxel_target = 120000;  // fused cloud downsample budget
    double knn_grid_cell = 0.5;         // spatial grid pitch for feature queries
};

/// A prepared scene: the fused (teacher) cloud plus one sub-cloud per source
/// scan (student samples), each with per-point supervision derived from the
/// component annotation of the fused cloud.
struct SceneBundle {
    FusedCloud fused;
    std::unique_ptr<SpatialGrid> fused_grid;
    Vec3 origin;  // center-scan sensor position, the feature frame anchor
    PresegResult preseg;
    AnnotationConfig annotation;  // as last applied, including the scene's rng seed
    LabelBundle labels;
    Eigen::MatrixXf features;  // static feature channels, one row per point

    // Per-point supervision on the fused cloud. labels_all carries sparse and
    // propagated labels; labels_clicks_only strips the propagated ones.
    std::vector<std::uint16_t> labels_all;
    std::vector<std::uint16_t> labels_clicks_only;
    std::vector<std::uint8_t> is_sparse;
    std::vector<std::uint32_t> weak;  // 0 = excluded from every loss

    struct SubScan {
        FusedCloud cloud;
        std::unique_ptr<SpatialGrid> grid;
        std::vector<std::uint32_t> fused_ids;  // row in `fused` for each point
        std::vector<std::uint16_t> labels_all;
        std::vector<std::uint16_t> labels_clicks_only;
        std::vector<std::uint8_t> is_sparse;
        std::vector<std::uint32_t> weak;
        // Computed on the sub-scan cloud itself: single-scan neighborhoods
        // are sparser than fused ones, which is the student/teacher contrast.
        Eigen::MatrixXf features;
        MatX teacher_logits;  // n×C once a teacher has been evaluated
    };
    std::vector<SubScan> scans;
};

/// Fuses the sequence, presegments, simulates annotation and splits the
/// result back into per-scan sub-clouds, with per-point features cached.
SceneBundle prepare_scene(const SyntheticSequence &seq, const PipelineConfig &config);

/// Redoes annotation and everything downstream of it on an already prepared
/// scene (geometry, presegmentation and feature caches are kept). Used to
/// compare annotation settings, e.g. click noise, on identical scenes.
void reannotate(SceneBundle &bundle, const AnnotationConfig &annotation, int num_classes);

/// Replacement supervision for the no-presegmentation baseline: `budget`
/// uniformly chosen points labeled with their ground truth. Weak masks turn
/// into the full mask everywhere (every point eligible, nothing constrained).
struct RandomPointLabels {
    std::vector<std::uint16_t> labels;
    std::vector<std::uint8_t> is_sparse;
    std::vector<std::uint32_t> weak;
    struct PerScan {
        std::vector<std::uint16_t> labels;
        std::vector<std::uint8_t> is_sparse;
        std::vector<std::uint32_t> weak;
    };
    std::vector<PerScan> scans;
};
RandomPointLabels random_point_labels(const SceneBundle &bundle, std::size_t budget,
                                      int num_classes, std::uint64_t seed);

/// Which supervision a view exposes.
enum class LabelMode { ClicksOnly, ClicksAndPropagated };

/// Teacher view over the fused cloud.
TrainView teacher_view(const SceneBundle &bundle, LabelMode mode);
/// Student view over one sub-scan.
TrainView student_view(const SceneBundle &bundle, std::size_t scan, LabelMode mode,
                       bool with_teacher_logits = false);
/// Views using the random-point overlay (clicks only by construction).
TrainView random_label_view(const SceneBundle &bundle, const RandomPointLabels &overlay);
TrainView random_label_scan_view(const SceneBundle &bundle, const RandomPointLabels &overlay,
                                 std::size_t scan);

/// Runs the teacher over each scene's fused cloud and scatters the logit rows
/// into the sub-scans for distillation.
void fill_teacher_logits(std::vector<SceneBundle> &scenes, const ToyModel &teacher);

/// The fixed synthetic benchmark: per-scene specs derived from `seed`,
/// prepared end to end. Scene i uses seed mix(seed, i); validation scenes use
/// a disjoint index block.
struct Benchmark {
    std::vector<SceneBundle> train;
    std::vector<SceneBundle> val;
    PipelineConfig config;
    std::size_t total_clicks = 0;   // across training scenes
    std::size_t total_points = 0;   // fused points across training scenes
};
Benchmark build_benchmark(std::uint64_t seed, int train_scenes, int val_scenes,
                          const PipelineConfig &config, const SyntheticSceneSpec &base_spec);

} // namespace lidarseg
