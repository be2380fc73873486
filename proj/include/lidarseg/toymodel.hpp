#pragma once

#include "lidarseg/losses.hpp"
#include "lidarseg/metrics.hpp"
#include "lidarseg/spatial_grid.hpp"
#include "lidarseg/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lidarseg {

/// Per-point inputs: scaled position and range plus k-NN shape statistics
/// (mean offset, scatter eigenvalue square roots, mean neighbor distance).
/// Teacher models append the scan's time offset as one more channel.
struct FeatureConfig {
    int knn = 16;
    double coord_scale = 30.0;
    double z_scale = 5.0;
    double range_scale = 30.0;
    double local_scale = 0.5;
    double time_scale = 2.0;
    bool time_channel = false;
};

int feature_dim(const FeatureConfig &config);

/// Features for the given point ids, one row per id. `origin` recenters the
/// coordinates (normally the sensor position of the window's center scan).
MatX compute_features(const FusedCloud &cloud, const SpatialGrid &grid,
                      std::span<const std::uint32_t> ids, const Vec3 &origin,
                      const FeatureConfig &config);

/// One cloud wired for training or evaluation. Label spans are row-aligned
/// with the cloud; weak mask semantics follow Batch (0 = excluded, full mask
/// = unconstrained). teacher_logits, when set, is n×C row-aligned.
/// feature_cache, when set, holds precomputed static features (all channels
/// except time, float32, one row per point); models append their own time
/// channel. Without a cache, features are computed on the fly from grid.
struct TrainView {
    const FusedCloud *cloud = nullptr;
    const SpatialGrid *grid = nullptr;
    Vec3 origin = Vec3::Zero();
    std::span<const std::uint16_t> labels;
    std::span<const std::uint8_t> label_is_sparse;
    std::span<const std::uint32_t> weak_masks;
    std::span<const std::uint16_t> gt;  // evaluation only
    const MatX *teacher_logits = nullptr;
    const Eigen::MatrixXf *feature_cache = nullptr;
};

/// Two tanh hidden layers into a linear embedding, a linear classifier on
/// top, and the projection head used by the prototype loss.
struct ToyModel {
    MatX W1, W2, W3, Wc;  // row-major layer maps: out×in
    VecX b1, b2, b3, bc;
    LinearProjection proj;
    FeatureConfig features;
    int num_classes = 0;

    int input_dim() const { return static_cast<int>(W1.cols()); }
    int embedding_dim() const { return static_cast<int>(W3.rows()); }

    void init_random(const FeatureConfig &feature_config, int num_classes, int hidden_dim,
                     int embedding_dim, int projection_dim, std::uint64_t seed);

    struct ForwardCache {
        MatX X, H1, H2, E, logits;
    };
    ForwardCache forward(const MatX &X) const;

    struct Gradients {
        MatX W1, W2, W3, Wc, Wp;
        VecX b1, b2, b3, bc;
    };
    /// Backprop from d(loss)/d(logits) and an extra d(loss)/d(embeddings)
    /// term (the prototype loss path). The projection gradient is passed
    /// through untouched so all updates move together.
    Gradients backward(const ForwardCache &cache, const MatX &grad_logits,
                       const MatX &grad_embeddings, const MatX &grad_W_proj) const;

    void apply_sgd(const Gradients &g, double lr);
};

struct TrainConfig {
    int num_classes = 0;
    int epochs = 4;
    int steps_per_epoch = 150;
    int batch_size = 1024;
    double lr = 1e-3;
    double lr_decayed = 1e-4;
    double decay_fraction = 0.8;  // switch to lr_decayed after this share of steps
    std::uint64_t seed = 0;
    int hidden_dim = 64;
    int embedding_dim = 32;
    int projection_dim = 16;
    double prototype_momentum = 0.99;
    double prototype_tau = 0.1;
    FeatureConfig features;
    JointLossConfig losses;

    void validate() const;
};

struct LossRow {
    int step;
    double l_sparse, l_propagated, l_weak, l_proto, l_dis;
};

struct TrainResult {
    ToyModel model;
    PrototypeBank bank;
    std::vector<double> val_miou_history;  // one entry per epoch
    std::vector<LossRow> loss_rows;
};

/// Mini-batch SGD on the joint loss. Batches draw half their points from the
/// labeled pool and half from the weak-eligible pool so click-scale labels
/// are actually seen. Deterministic under config.seed. Throws
/// TrainingDivergedError on a non-finite loss.
TrainResult train(std::span<const TrainView> train_views, std::span<const TrainView> val_views,
                  const TrainConfig &config);

/// Continues training from an existing model and bank (the distillation
/// fine-tune entry point: enable config.losses.use_distill and supply
/// teacher_logits on the views).
TrainResult train_from(ToyModel model, PrototypeBank bank,
                       std::span<const TrainView> train_views,
                       std::span<const TrainView> val_views, const TrainConfig &config);

/// Full-cloud logits, computed in chunks.
MatX forward_logits(const ToyModel &model, const TrainView &view);

/// Confusion over every view point whose gt is not in `ignore`.
IouReport evaluate(const ToyModel &model, std::span<const TrainView> views,
                   const std::unordered_set<std::uint16_t> &ignore = {});

void save_checkpoint(const std::filesystem::path &path, const ToyModel &model,
                     const PrototypeBank &bank, const nlohmann::json &sidecar);
struct Checkpoint {
    ToyModel model;
    PrototypeBank bank;
    nlohmann::json sidecar;
};
Checkpoint load_checkpoint(const std::filesystem::path &path);

std::string loss_rows_csv(std::span<const LossRow> rows);

void to_json(nlohmann::json &j, const FeatureConfig &config);
void from_json(const nlohmann::json &j, FeatureConfig &config);
void to_json(nlohmann::json &j, const TrainConfig &config);
void from_json(const nlohmann::json &j, TrainConfig &config);

} // namespace lidarseg
