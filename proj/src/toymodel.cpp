#include "lidarseg/toymodel.hpp"

#include "lidarseg/errors.hpp"
#include "lidarseg/parallel.hpp"
#include "lidarseg/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lidarseg {

int feature_dim(const FeatureConfig &config) { return config.time_channel ? 12 : 11; }

MatX compute_features(const FusedCloud &cloud, const SpatialGrid &grid,
                      std::span<const std::uint32_t> ids, const Vec3 &origin,
                      const FeatureConfig &config) {
    if (config.knn < 1) throw std::invalid_argument("FeatureConfig: knn must be >= 1");
    MatX out(static_cast<Eigen::Index>(ids.size()), feature_dim(config));
    parallel_for(ids.size(), [&](std::size_t row) {
        const std::uint32_t id = ids[row];
        const Vec3 &p = cloud.points[id];
        const std::vector<std::uint32_t> nn = grid.knn(p, static_cast<std::size_t>(config.knn));

        Vec3 centroid = Vec3::Zero();
        double dist_sum = 0.0;
        for (std::uint32_t j : nn) {
            centroid += cloud.points[j];
            dist_sum += (cloud.points[j] - p).norm();
        }
        const double k = static_cast<double>(nn.size());
        centroid /= k;
        Mat3 scatter = Mat3::Zero();
        for (std::uint32_t j : nn) {
            const Vec3 q = cloud.points[j] - centroid;
            scatter += q * q.transpose();
        }
        scatter /= k;
        Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
        const Vec3 lam = eig.eigenvalues().cwiseMax(0.0);

        Eigen::Index f = 0;
        out(row, f++) = (p.x() - origin.x()) / config.coord_scale;
        out(row, f++) = (p.y() - origin.y()) / config.coord_scale;
        out(row, f++) = (p.z() - origin.z()) / config.z_scale;
        out(row, f++) = cloud.range[id] / config.range_scale;
        const Vec3 offset = (centroid - p) / config.local_scale;
        out(row, f++) = offset.x();
        out(row, f++) = offset.y();
        out(row, f++) = offset.z();
        out(row, f++) = std::sqrt(lam(0)) / config.local_scale;
        out(row, f++) = std::sqrt(lam(1)) / config.local_scale;
        out(row, f++) = std::sqrt(lam(2)) / config.local_scale;
        out(row, f++) = dist_sum / k / config.local_scale;
        if (config.time_channel)
            out(row, f++) = static_cast<double>(cloud.time_offset[id]) / config.time_scale;
    });
    return out;
}

void ToyModel::init_random(const FeatureConfig &feature_config, int classes, int hidden_dim,
                           int emb_dim, int projection_dim, std::uint64_t seed) {
    if (classes < 2) throw std::invalid_argument("ToyModel: need at least 2 classes");
    if (hidden_dim < 1 || emb_dim < 1 || projection_dim < 1)
        throw std::invalid_argument("ToyModel: dimensions must be positive");
    features = feature_config;
    num_classes = classes;
    const int in = feature_dim(features);

    auto init_layer = [&](MatX &W, int out_dim, int in_dim, std::uint64_t salt) {
        Rng rng(mix_seed(seed, salt));
        W.resize(out_dim, in_dim);
        const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
        for (Eigen::Index r = 0; r < W.rows(); ++r)
            for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = scale * gaussian(rng);
    };
    init_layer(W1, hidden_dim, in, 1);
    init_layer(W2, hidden_dim, hidden_dim, 2);
    init_layer(W3, emb_dim, hidden_dim, 3);
    init_layer(Wc, classes, emb_dim, 4);
    b1 = VecX::Zero(hidden_dim);
    b2 = VecX::Zero(hidden_dim);
    b3 = VecX::Zero(emb_dim);
    bc = VecX::Zero(classes);
    proj.init_random(projection_dim, emb_dim, mix_seed(seed, 5));
}

ToyModel::ForwardCache ToyModel::forward(const MatX &X) const {
    if (X.cols() != W1.cols()) throw std::invalid_argument("ToyModel: wrong input width");
    ForwardCache cache;
    cache.X = X;
    cache.H1 = ((X * W1.transpose()).rowwise() + b1.transpose()).array().tanh();
    cache.H2 = ((cache.H1 * W2.transpose()).rowwise() + b2.transpose()).array().tanh();
    cache.E = (cache.H2 * W3.transpose()).rowwise() + b3.transpose();
    cache.logits = (cache.E * Wc.transpose()).rowwise() + bc.transpose();
    return cache;
}

ToyModel::Gradients ToyModel::backward(const ForwardCache &cache, const MatX &grad_logits,
                                       const MatX &grad_embeddings,
                                       const MatX &grad_W_proj) const {
    Gradients g;
    g.Wc = grad_logits.transpose() * cache.E;
    g.bc = grad_logits.colwise().sum().transpose();
    const MatX dE = grad_logits * Wc + grad_embeddings;
    g.W3 = dE.transpose() * cache.H2;
    g.b3 = dE.colwise().sum().transpose();
    const MatX dZ2 = ((dE * W3).array() * (1.0 - cache.H2.array().square())).matrix();
    g.W2 = dZ2.transpose() * cache.H1;
    g.b2 = dZ2.colwise().sum().transpose();
    const MatX dZ1 = ((dZ2 * W2).array() * (1.0 - cache.H1.array().square())).matrix();
    g.W1 = dZ1.transpose() * cache.X;
    g.b1 = dZ1.colwise().sum().transpose();
    g.Wp = grad_W_proj;
    return g;
}

void ToyModel::apply_sgd(const Gradients &g, double lr) {
    W1 -= lr * g.W1;
    b1 -= lr * g.b1;
    W2 -= lr * g.W2;
    b2 -= lr * g.b2;
    W3 -= lr * g.W3;
    b3 -= lr * g.b3;
    Wc -= lr * g.Wc;
    bc -= lr * g.bc;
    proj.W -= lr * g.Wp;
}

void TrainConfig::validate() const {
    if (num_classes < 2) throw std::invalid_argument("TrainConfig: num_classes must be >= 2");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (steps_per_epoch < 1)
        throw std::invalid_argument("TrainConfig: steps_per_epoch must be >= 1");
    if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
    if (!(lr > 0.0) || !(lr_decayed > 0.0))
        throw std::invalid_argument("TrainConfig: learning rates must be positive");
    if (!(decay_fraction >= 0.0 && decay_fraction <= 1.0))
        throw std::invalid_argument("TrainConfig: decay_fraction must be in [0, 1]");
    if (hidden_dim < 1 || embedding_dim < 1 || projection_dim < 1)
        throw std::invalid_argument("TrainConfig: dimensions must be positive");
    if (!(prototype_momentum >= 0.0 && prototype_momentum <= 1.0))
        throw std::invalid_argument("TrainConfig: prototype_momentum must be in [0, 1]");
    if (!(prototype_tau > 0.0))
        throw std::invalid_argument("TrainConfig: prototype_tau must be positive");
}

namespace {

/// Batch features, from the view's cache when it has one. The cache carries
/// the static channels only; the time channel is appended per model config.
MatX gather_features(const TrainView &view, const FeatureConfig &config,
                     std::span<const std::uint32_t> ids) {
    if (!view.feature_cache)
        return compute_features(*view.cloud, *view.grid, ids, view.origin, config);

    const Eigen::MatrixXf &cache = *view.feature_cache;
    FeatureConfig static_config = config;
    static_config.time_channel = false;
    const Eigen::Index static_dim = feature_dim(static_config);
    if (cache.cols() != static_dim ||
        cache.rows() != static_cast<Eigen::Index>(view.cloud->size()))
        throw std::invalid_argument("TrainView: feature cache shape mismatch");

    MatX out(static_cast<Eigen::Index>(ids.size()), feature_dim(config));
    for (std::size_t k = 0; k < ids.size(); ++k) {
        out.row(static_cast<Eigen::Index>(k)).head(static_dim) =
            cache.row(ids[k]).cast<double>();
        if (config.time_channel)
            out(static_cast<Eigen::Index>(k), static_dim) =
                static_cast<double>(view.cloud->time_offset[ids[k]]) / config.time_scale;
    }
    return out;
}

struct ViewPools {
    std::vector<std::uint32_t> labeled;        // usable label and nonzero mask
    std::vector<std::uint32_t> weak_eligible;  // nonzero mask
};

ViewPools build_pools(const TrainView &view) {
    ViewPools pools;
    const std::size_t n = view.cloud->size();
    if (view.labels.size() != n || view.label_is_sparse.size() != n ||
        view.weak_masks.size() != n)
        throw std::invalid_argument("TrainView: label spans must match the cloud size");
    for (std::uint32_t i = 0; i < n; ++i) {
        if (view.weak_masks[i] == 0) continue;
        pools.weak_eligible.push_back(i);
        if (view.labels[i] != kNoClass) pools.labeled.push_back(i);
    }
    return pools;
}

std::vector<double> weights_from_views(std::span<const TrainView> views, int num_classes) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (const TrainView &view : views)
        for (std::size_t i = 0; i < view.labels.size(); ++i)
            if (view.labels[i] != kNoClass && view.weak_masks[i] != 0) ++counts[view.labels[i]];
    std::vector<double> weights(counts.size(), 0.0);
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) continue;
        weights[c] = 1.0 / std::sqrt(static_cast<double>(counts[c]));
        sum += weights[c];
        ++present;
    }
    if (present == 0) throw std::invalid_argument("train: no labeled points in any view");
    const double scale = static_cast<double>(present) / sum;
    for (double &w : weights) w *= scale;
    return weights;
}

TrainResult run_training(ToyModel model, PrototypeBank bank,
                         std::span<const TrainView> train_views,
                         std::span<const TrainView> val_views, const TrainConfig &config) {
    config.validate();
    if (train_views.empty()) throw std::invalid_argument("train: no training views");
    if (config.losses.use_distill)
        for (const TrainView &view : train_views)
            if (!view.teacher_logits)
                throw std::invalid_argument("train: distillation requires teacher logits");

    std::vector<ViewPools> pools;
    pools.reserve(train_views.size());
    for (const TrainView &view : train_views) pools.push_back(build_pools(view));

    const std::vector<double> weights = weights_from_views(train_views, model.num_classes);
    const int total_steps = config.epochs * config.steps_per_epoch;
    const int decay_at = static_cast<int>(std::floor(config.decay_fraction * total_steps));

    TrainResult result;
    Rng rng(mix_seed(config.seed, 0x7261u));
    std::vector<std::uint32_t> ids;
    for (int step = 0; step < total_steps; ++step) {
        const std::size_t v = uniform_index(rng, train_views.size());
        const TrainView &view = train_views[v];
        const ViewPools &pool = pools[v];

        ids.clear();
        const std::size_t half = static_cast<std::size_t>(config.batch_size) / 2;
        if (!pool.labeled.empty())
            for (std::size_t i = 0; i < half; ++i)
                ids.push_back(pool.labeled[uniform_index(rng, pool.labeled.size())]);
        if (!pool.weak_eligible.empty())
            while (ids.size() < static_cast<std::size_t>(config.batch_size))
                ids.push_back(pool.weak_eligible[uniform_index(rng, pool.weak_eligible.size())]);
        if (ids.empty()) throw std::invalid_argument("train: view has no usable points");

        const MatX X = gather_features(view, model.features, ids);
        const ToyModel::ForwardCache cache = model.forward(X);

        Batch batch;
        batch.logits = cache.logits;
        batch.embeddings = cache.E;
        batch.labels.resize(ids.size());
        batch.label_is_sparse.resize(ids.size());
        batch.weak_masks.resize(ids.size());
        for (std::size_t k = 0; k < ids.size(); ++k) {
            batch.labels[k] = view.labels[ids[k]];
            batch.label_is_sparse[k] = view.label_is_sparse[ids[k]];
            batch.weak_masks[k] = view.weak_masks[ids[k]];
        }
        batch.class_weights = weights;
        if (config.losses.use_distill && view.teacher_logits) {
            batch.teacher_logits.resize(static_cast<Eigen::Index>(ids.size()), model.num_classes);
            for (std::size_t k = 0; k < ids.size(); ++k)
                batch.teacher_logits.row(static_cast<Eigen::Index>(k)) =
                    view.teacher_logits->row(ids[k]);
        }

        const JointLossResult loss = joint_loss(batch, bank, model.proj, config.losses);
        if (!std::isfinite(loss.total))
            throw TrainingDivergedError("non-finite loss at step " + std::to_string(step));
        result.loss_rows.push_back(
            {step, loss.l_sparse, loss.l_propagated, loss.l_weak, loss.l_proto, loss.l_dis});

        const ToyModel::Gradients grads =
            model.backward(cache, loss.grad_logits, loss.grad_embeddings, loss.grad_W);
        model.apply_sgd(grads, step < decay_at ? config.lr : config.lr_decayed);

        if (config.losses.use_proto) {
            // Post-step bank refresh from the batch that was just seen; only
            // labeled points with component information feed it.
            std::vector<std::uint16_t> update_labels(batch.labels);
            for (std::size_t k = 0; k < update_labels.size(); ++k)
                if (batch.weak_masks[k] == 0) update_labels[k] = kNoClass;
            prototype_update(bank, cache.E, update_labels, model.proj);
        }

        if ((step + 1) % config.steps_per_epoch == 0 && !val_views.empty()) {
            const IouReport report = evaluate(model, val_views);
            result.val_miou_history.push_back(report.miou);
        }
    }
    result.model = std::move(model);
    result.bank = std::move(bank);
    return result;
}

} // namespace

TrainResult train(std::span<const TrainView> train_views, std::span<const TrainView> val_views,
                  const TrainConfig &config) {
    config.validate();
    ToyModel model;
    model.init_random(config.features, config.num_classes, config.hidden_dim,
                      config.embedding_dim, config.projection_dim, config.seed);
    PrototypeBank bank;
    bank.momentum = config.prototype_momentum;
    bank.tau = config.prototype_tau;
    bank.init_random(config.num_classes, config.projection_dim, mix_seed(config.seed, 6));
    return run_training(std::move(model), std::move(bank), train_views, val_views, config);
}

TrainResult train_from(ToyModel model, PrototypeBank bank,
                       std::span<const TrainView> train_views,
                       std::span<const TrainView> val_views, const TrainConfig &config) {
    if (model.num_classes != config.num_classes)
        throw std::invalid_argument("train_from: model and config disagree on classes");
    if (feature_dim(model.features) != feature_dim(config.features))
        throw std::invalid_argument("train_from: model and config disagree on input width");
    return run_training(std::move(model), std::move(bank), train_views, val_views, config);
}

MatX forward_logits(const ToyModel &model, const TrainView &view) {
    const std::size_t n = view.cloud->size();
    MatX logits(static_cast<Eigen::Index>(n), model.num_classes);
    constexpr std::size_t kChunk = 8192;
    std::vector<std::uint32_t> ids;
    for (std::size_t lo = 0; lo < n; lo += kChunk) {
        const std::size_t hi = std::min(n, lo + kChunk);
        ids.resize(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) ids[i - lo] = static_cast<std::uint32_t>(i);
        const MatX X = gather_features(view, model.features, ids);
        logits.middleRows(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo)) =
            model.forward(X).logits;
    }
    return logits;
}

IouReport evaluate(const ToyModel &model, std::span<const TrainView> views,
                   const std::unordered_set<std::uint16_t> &ignore) {
    ConfusionMatrix cm(model.num_classes);
    std::vector<std::uint16_t> pred;
    for (const TrainView &view : views) {
        if (view.gt.size() != view.cloud->size())
            throw std::invalid_argument("evaluate: view lacks ground truth");
        const MatX logits = forward_logits(model, view);
        pred.resize(static_cast<std::size_t>(logits.rows()));
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            Eigen::Index best = 0;
            logits.row(i).maxCoeff(&best);
            pred[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(best);
        }
        cm.accumulate(view.gt, pred, ignore);
    }
    return iou(cm);
}

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x4C534D31;  // "LSM1" little-endian int

void write_matrix(std::ofstream &out, const MatX &m) {
    const std::uint32_t rows = static_cast<std::uint32_t>(m.rows());
    const std::uint32_t cols = static_cast<std::uint32_t>(m.cols());
    out.write(reinterpret_cast<const char *>(&rows), 4);
    out.write(reinterpret_cast<const char *>(&cols), 4);
    // Raw doubles: reloading a checkpoint must reproduce the model bit for bit.
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            out.write(reinterpret_cast<const char *>(&v), 8);
        }
}

MatX read_matrix(std::ifstream &in, const std::filesystem::path &path) {
    std::uint32_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char *>(&rows), 4);
    in.read(reinterpret_cast<char *>(&cols), 4);
    if (!in) throw FormatError(path.string() + ": truncated matrix header");
    MatX m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
        for (std::uint32_t c = 0; c < cols; ++c) {
            double v = 0.0;
            in.read(reinterpret_cast<char *>(&v), 8);
            if (!in) throw FormatError(path.string() + ": truncated matrix body");
            m(r, c) = v;
        }
    return m;
}

} // namespace

void save_checkpoint(const std::filesystem::path &path, const ToyModel &model,
                     const PrototypeBank &bank, const nlohmann::json &sidecar) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char *>(&kCheckpointMagic), 4);
    const std::uint32_t version = 1;
    out.write(reinterpret_cast<const char *>(&version), 4);
    const std::uint32_t flags = model.features.time_channel ? 1u : 0u;
    out.write(reinterpret_cast<const char *>(&flags), 4);
    const std::uint32_t classes = static_cast<std::uint32_t>(model.num_classes);
    out.write(reinterpret_cast<const char *>(&classes), 4);
    write_matrix(out, model.W1);
    write_matrix(out, model.b1);
    write_matrix(out, model.W2);
    write_matrix(out, model.b2);
    write_matrix(out, model.W3);
    write_matrix(out, model.b3);
    write_matrix(out, model.Wc);
    write_matrix(out, model.bc);
    write_matrix(out, model.proj.W);
    write_matrix(out, bank.P);

    nlohmann::json meta = sidecar;
    to_json(meta["features"], model.features);
    meta["prototype_momentum"] = bank.momentum;
    meta["prototype_tau"] = bank.tau;
    std::filesystem::path sidecar_path = path;
    sidecar_path += ".json";
    std::ofstream js(sidecar_path);
    if (!js) throw DataError("cannot write " + sidecar_path.string());
    js << meta.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::uint32_t magic = 0, version = 0, flags = 0, classes = 0;
    in.read(reinterpret_cast<char *>(&magic), 4);
    in.read(reinterpret_cast<char *>(&version), 4);
    in.read(reinterpret_cast<char *>(&flags), 4);
    in.read(reinterpret_cast<char *>(&classes), 4);
    if (!in || magic != kCheckpointMagic)
        throw FormatError(path.string() + ": not a model checkpoint (bad magic at byte 0)");
    if (version != 1)
        throw FormatError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(version));

    Checkpoint cp;
    cp.model.num_classes = static_cast<int>(classes);
    cp.model.W1 = read_matrix(in, path);
    cp.model.b1 = read_matrix(in, path);
    cp.model.W2 = read_matrix(in, path);
    cp.model.b2 = read_matrix(in, path);
    cp.model.W3 = read_matrix(in, path);
    cp.model.b3 = read_matrix(in, path);
    cp.model.Wc = read_matrix(in, path);
    cp.model.bc = read_matrix(in, path);
    cp.model.proj.W = read_matrix(in, path);
    cp.bank.P = read_matrix(in, path);

    std::filesystem::path sidecar_path = path;
    sidecar_path += ".json";
    std::ifstream js(sidecar_path);
    if (!js) throw DataError("cannot read " + sidecar_path.string());
    js >> cp.sidecar;
    from_json(cp.sidecar.at("features"), cp.model.features);
    cp.bank.momentum = cp.sidecar.at("prototype_momentum").get<double>();
    cp.bank.tau = cp.sidecar.at("prototype_tau").get<double>();
    if (feature_dim(cp.model.features) != cp.model.W1.cols())
        throw ConsistencyError(path.string() + ": feature config and W1 width disagree");
    if ((flags & 1u) != (cp.model.features.time_channel ? 1u : 0u))
        throw ConsistencyError(path.string() + ": time-channel flag and sidecar disagree");
    return cp;
}

std::string loss_rows_csv(std::span<const LossRow> rows) {
    std::ostringstream out;
    out << "step,l_sparse,l_propagated,l_weak,l_proto,l_dis\n";
    out.precision(10);
    for (const LossRow &row : rows)
        out << row.step << ',' << row.l_sparse << ',' << row.l_propagated << ',' << row.l_weak
            << ',' << row.l_proto << ',' << row.l_dis << '\n';
    return out.str();
}

void to_json(nlohmann::json &j, const FeatureConfig &config) {
    j = nlohmann::json{{"knn", config.knn},
                       {"coord_scale", config.coord_scale},
                       {"z_scale", config.z_scale},
                       {"range_scale", config.range_scale},
                       {"local_scale", config.local_scale},
                       {"time_scale", config.time_scale},
                       {"time_channel", config.time_channel}};
}

void from_json(const nlohmann::json &j, FeatureConfig &config) {
    config = FeatureConfig{};
    j.at("knn").get_to(config.knn);
    j.at("coord_scale").get_to(config.coord_scale);
    j.at("z_scale").get_to(config.z_scale);
    j.at("range_scale").get_to(config.range_scale);
    j.at("local_scale").get_to(config.local_scale);
    j.at("time_scale").get_to(config.time_scale);
    j.at("time_channel").get_to(config.time_channel);
}

void to_json(nlohmann::json &j, const TrainConfig &config) {
    nlohmann::json feats;
    to_json(feats, config.features);
    j = nlohmann::json{{"num_classes", config.num_classes},
                       {"epochs", config.epochs},
                       {"steps_per_epoch", config.steps_per_epoch},
                       {"batch_size", config.batch_size},
                       {"lr", config.lr},
                       {"lr_decayed", config.lr_decayed},
                       {"decay_fraction", config.decay_fraction},
                       {"seed", config.seed},
                       {"hidden_dim", config.hidden_dim},
                       {"embedding_dim", config.embedding_dim},
                       {"projection_dim", config.projection_dim},
                       {"prototype_momentum", config.prototype_momentum},
                       {"prototype_tau", config.prototype_tau},
                       {"features", feats},
                       {"losses",
                        {{"use_sparse", config.losses.use_sparse},
                         {"use_propagated", config.losses.use_propagated},
                         {"use_weak", config.losses.use_weak},
                         {"use_proto", config.losses.use_proto},
                         {"use_distill", config.losses.use_distill},
                         {"distill_T", config.losses.distill_T}}}};
}

void from_json(const nlohmann::json &j, TrainConfig &config) {
    config = TrainConfig{};
    j.at("num_classes").get_to(config.num_classes);
    j.at("epochs").get_to(config.epochs);
    j.at("steps_per_epoch").get_to(config.steps_per_epoch);
    j.at("batch_size").get_to(config.batch_size);
    j.at("lr").get_to(config.lr);
    j.at("lr_decayed").get_to(config.lr_decayed);
    j.at("decay_fraction").get_to(config.decay_fraction);
    j.at("seed").get_to(config.seed);
    j.at("hidden_dim").get_to(config.hidden_dim);
    j.at("embedding_dim").get_to(config.embedding_dim);
    j.at("projection_dim").get_to(config.projection_dim);
    j.at("prototype_momentum").get_to(config.prototype_momentum);
    j.at("prototype_tau").get_to(config.prototype_tau);
    from_json(j.at("features"), config.features);
    const nlohmann::json &jl = j.at("losses");
    jl.at("use_sparse").get_to(config.losses.use_sparse);
    jl.at("use_propagated").get_to(config.losses.use_propagated);
    jl.at("use_weak").get_to(config.losses.use_weak);
    jl.at("use_proto").get_to(config.losses.use_proto);
    jl.at("use_distill").get_to(config.losses.use_distill);
    jl.at("distill_T").get_to(config.losses.distill_T);
}

} // namespace lidarseg
