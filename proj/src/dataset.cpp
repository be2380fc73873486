#include "lidarseg/dataset.hpp"

#include "lidarseg/errors.hpp"
#include "lidarseg/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace lidarseg {
namespace {

template <typename T>
std::vector<T> slice(const std::vector<T> &src, const std::vector<std::uint32_t> &ids) {
    std::vector<T> out;
    out.reserve(ids.size());
    for (std::uint32_t id : ids) out.push_back(src[id]);
    return out;
}

std::uint32_t full_mask(int num_classes) {
    return num_classes >= 32 ? 0xFFFFFFFFu : ((1u << num_classes) - 1u);
}

} // namespace

namespace {

/// Annotation and everything derived from it; assumes geometry and preseg
/// are in place.
void derive_supervision(SceneBundle &b, const AnnotationConfig &annotation, int num_classes) {
    const std::vector<SparseLabel> clicks =
        simulate_annotation(b.fused, b.preseg, annotation, num_classes);
    b.annotation = annotation;
    b.labels = derive_labels(b.preseg, clicks, num_classes);

    const std::size_t n = b.fused.size();
    b.labels_all.assign(n, kNoClass);
    b.labels_clicks_only.assign(n, kNoClass);
    b.is_sparse.assign(n, 0);
    b.weak.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        b.labels_all[i] = b.labels.propagated[i];
        b.weak[i] = b.labels.point_weak_mask(b.preseg, static_cast<std::uint32_t>(i));
    }
    for (const SparseLabel &s : b.labels.sparse) {
        b.labels_all[s.point_id] = s.class_id;
        b.labels_clicks_only[s.point_id] = s.class_id;
        b.is_sparse[s.point_id] = 1;
    }
    for (SceneBundle::SubScan &sub : b.scans) {
        sub.labels_all = slice(b.labels_all, sub.fused_ids);
        sub.labels_clicks_only = slice(b.labels_clicks_only, sub.fused_ids);
        sub.is_sparse = slice(b.is_sparse, sub.fused_ids);
        sub.weak = slice(b.weak, sub.fused_ids);
    }
}

Eigen::MatrixXf static_features(const FusedCloud &cloud, const SpatialGrid &grid,
                                const Vec3 &origin, FeatureConfig config) {
    config.time_channel = false;
    std::vector<std::uint32_t> all(cloud.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
    return compute_features(cloud, grid, all, origin, config).cast<float>();
}

} // namespace

SceneBundle prepare_scene(const SyntheticSequence &seq, const PipelineConfig &config) {
    if (seq.scans.empty()) throw std::invalid_argument("prepare_scene: empty sequence");
    if (seq.scans.size() != seq.poses.size())
        throw std::invalid_argument("prepare_scene: scan/pose count mismatch");

    SceneBundle b;
    b.fused = voxel_downsample(fuse_scans(seq.scans, seq.poses), config.voxel_target).cloud;
    b.origin = seq.poses[seq.poses.size() / 2].translation;
    b.fused_grid = std::make_unique<SpatialGrid>(b.fused.points, config.knn_grid_cell);
    b.preseg = presegment(b.fused, config.preseg);
    b.features = static_features(b.fused, *b.fused_grid, b.origin, config.features);

    const std::size_t n = b.fused.size();
    std::uint32_t max_scan = 0;
    for (std::uint32_t s : b.fused.scan_index) max_scan = std::max(max_scan, s);
    b.scans.resize(max_scan + 1);
    for (std::uint32_t s = 0; s <= max_scan; ++s) {
        SceneBundle::SubScan &sub = b.scans[s];
        for (std::uint32_t i = 0; i < n; ++i)
            if (b.fused.scan_index[i] == s) sub.fused_ids.push_back(i);
        sub.cloud = subset_cloud(b.fused, sub.fused_ids);
        sub.grid = std::make_unique<SpatialGrid>(sub.cloud.points, config.knn_grid_cell);
        sub.features = static_features(sub.cloud, *sub.grid, b.origin, config.features);
    }
    derive_supervision(b, config.annotation, config.num_classes);
    return b;
}

void reannotate(SceneBundle &bundle, const AnnotationConfig &annotation, int num_classes) {
    if (bundle.fused.size() == 0) throw std::invalid_argument("reannotate: empty bundle");
    derive_supervision(bundle, annotation, num_classes);
}

RandomPointLabels random_point_labels(const SceneBundle &bundle, std::size_t budget,
                                      int num_classes, std::uint64_t seed) {
    if (!bundle.fused.has_gt())
        throw std::invalid_argument("random_point_labels: cloud has no ground truth");
    const std::size_t n = bundle.fused.size();
    Rng rng(mix_seed(seed, 0xab5eu));
    const std::vector<std::uint32_t> picks = sample_without_replacement(
        rng, static_cast<std::uint32_t>(n),
        static_cast<std::uint32_t>(std::min(budget, n)));

    RandomPointLabels out;
    out.labels.assign(n, kNoClass);
    out.is_sparse.assign(n, 0);
    out.weak.assign(n, full_mask(num_classes));
    for (std::uint32_t id : picks) {
        out.labels[id] = bundle.fused.gt_label[id];
        out.is_sparse[id] = 1;
    }
    out.scans.resize(bundle.scans.size());
    for (std::size_t s = 0; s < bundle.scans.size(); ++s) {
        out.scans[s].labels = slice(out.labels, bundle.scans[s].fused_ids);
        out.scans[s].is_sparse = slice(out.is_sparse, bundle.scans[s].fused_ids);
        out.scans[s].weak = slice(out.weak, bundle.scans[s].fused_ids);
    }
    return out;
}

TrainView teacher_view(const SceneBundle &bundle, LabelMode mode) {
    TrainView v;
    v.cloud = &bundle.fused;
    v.grid = bundle.fused_grid.get();
    v.origin = bundle.origin;
    v.labels = mode == LabelMode::ClicksAndPropagated ? bundle.labels_all
                                                      : bundle.labels_clicks_only;
    v.label_is_sparse = bundle.is_sparse;
    v.weak_masks = bundle.weak;
    v.gt = bundle.fused.gt_label;
    v.feature_cache = &bundle.features;
    return v;
}

TrainView student_view(const SceneBundle &bundle, std::size_t scan, LabelMode mode,
                       bool with_teacher_logits) {
    const SceneBundle::SubScan &sub = bundle.scans.at(scan);
    TrainView v;
    v.cloud = &sub.cloud;
    v.grid = sub.grid.get();
    v.origin = bundle.origin;
    v.labels = mode == LabelMode::ClicksAndPropagated ? sub.labels_all : sub.labels_clicks_only;
    v.label_is_sparse = sub.is_sparse;
    v.weak_masks = sub.weak;
    v.gt = sub.cloud.gt_label;
    v.feature_cache = &sub.features;
    if (with_teacher_logits) {
        if (sub.teacher_logits.size() == 0)
            throw std::invalid_argument("student_view: teacher logits not filled");
        v.teacher_logits = &sub.teacher_logits;
    }
    return v;
}

TrainView random_label_view(const SceneBundle &bundle, const RandomPointLabels &overlay) {
    TrainView v;
    v.cloud = &bundle.fused;
    v.grid = bundle.fused_grid.get();
    v.origin = bundle.origin;
    v.labels = overlay.labels;
    v.label_is_sparse = overlay.is_sparse;
    v.weak_masks = overlay.weak;
    v.gt = bundle.fused.gt_label;
    v.feature_cache = &bundle.features;
    return v;
}

TrainView random_label_scan_view(const SceneBundle &bundle, const RandomPointLabels &overlay,
                                 std::size_t scan) {
    const SceneBundle::SubScan &sub = bundle.scans.at(scan);
    const RandomPointLabels::PerScan &per = overlay.scans.at(scan);
    TrainView v;
    v.cloud = &sub.cloud;
    v.grid = sub.grid.get();
    v.origin = bundle.origin;
    v.labels = per.labels;
    v.label_is_sparse = per.is_sparse;
    v.weak_masks = per.weak;
    v.gt = sub.cloud.gt_label;
    v.feature_cache = &sub.features;
    return v;
}

void fill_teacher_logits(std::vector<SceneBundle> &scenes, const ToyModel &teacher) {
    for (SceneBundle &scene : scenes) {
        TrainView v = teacher_view(scene, LabelMode::ClicksAndPropagated);
        const MatX logits = forward_logits(teacher, v);
        for (SceneBundle::SubScan &sub : scene.scans) {
            sub.teacher_logits.resize(static_cast<Eigen::Index>(sub.fused_ids.size()),
                                      logits.cols());
            for (std::size_t r = 0; r < sub.fused_ids.size(); ++r)
                sub.teacher_logits.row(static_cast<Eigen::Index>(r)) =
                    logits.row(sub.fused_ids[r]);
        }
    }
}

Benchmark build_benchmark(std::uint64_t seed, int train_scenes, int val_scenes,
                          const PipelineConfig &config, const SyntheticSceneSpec &base_spec) {
    Benchmark bench;
    bench.config = config;
    auto make = [&](std::uint64_t tag, int index) {
        const std::uint64_t scene_seed = mix_seed(seed, tag, static_cast<std::uint64_t>(index));
        SyntheticSceneSpec spec = base_spec;
        spec.seed = scene_seed;
        PipelineConfig cfg = config;
        cfg.preseg.rng_seed = mix_seed(scene_seed, 1);
        cfg.annotation.rng_seed = mix_seed(scene_seed, 2);
        return prepare_scene(generate_synthetic(spec), cfg);
    };
    for (int i = 0; i < train_scenes; ++i) {
        bench.train.push_back(make(0x7472u, i));
        bench.total_clicks += bench.train.back().labels.sparse.size();
        bench.total_points += bench.train.back().fused.size();
    }
    for (int i = 0; i < val_scenes; ++i) bench.val.push_back(make(0x766cu, i));
    return bench;
}

} // namespace lidarseg
