#include "lidarseg/losses.hpp"

#include "lidarseg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lidarseg {

namespace {

constexpr double kWeakClamp = 1e-7;  // disallowed mass capped at 1 - kWeakClamp

void require(bool ok, const char *message) {
    if (!ok) throw std::invalid_argument(message);
}

} // namespace

MatX softmax_rows(const MatX &logits) {
    MatX out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        out.row(i) = (logits.row(i).array() - m).exp();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

MatX log_softmax_rows(const MatX &logits) {
    MatX out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        const double lse = std::log((logits.row(i).array() - m).exp().sum()) + m;
        out.row(i) = logits.row(i).array() - lse;
    }
    return out;
}

void Batch::check() const {
    const Eigen::Index n = logits.rows();
    require(embeddings.rows() == n, "Batch: logits and embeddings row counts differ");
    require(labels.size() == static_cast<std::size_t>(n), "Batch: labels size mismatch");
    require(label_is_sparse.size() == labels.size(), "Batch: label_is_sparse size mismatch");
    require(weak_masks.size() == labels.size(), "Batch: weak_masks size mismatch");
    require(class_weights.size() == static_cast<std::size_t>(logits.cols()),
            "Batch: class_weights size mismatch");
    if (teacher_logits.size() > 0) {
        require(teacher_logits.rows() == n && teacher_logits.cols() == logits.cols(),
                "Batch: teacher_logits shape mismatch");
    }
    for (std::size_t i = 0; i < labels.size(); ++i)
        require(labels[i] == kNoClass || labels[i] < logits.cols(),
                "Batch: label out of class range");
}

WceResult loss_wce(const MatX &logits, const std::vector<std::uint16_t> &labels,
                   const std::vector<double> &weights) {
    require(labels.size() == static_cast<std::size_t>(logits.rows()),
            "loss_wce: one label slot per row required");
    require(weights.size() == static_cast<std::size_t>(logits.cols()),
            "loss_wce: one weight per class required");

    WceResult result;
    result.grad_logits = MatX::Zero(logits.rows(), logits.cols());
    std::size_t labeled = 0;
    for (std::uint16_t y : labels)
        if (y != kNoClass) ++labeled;
    if (labeled == 0) return result;
    result.has_labels = true;

    const MatX log_probs = log_softmax_rows(logits);
    const double inv_n = 1.0 / static_cast<double>(labeled);
    double value = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const std::uint16_t y = labels[static_cast<std::size_t>(i)];
        if (y == kNoClass) continue;
        require(y < logits.cols(), "loss_wce: label out of class range");
        const double w = weights[y];
        value -= w * log_probs(i, y);
        result.grad_logits.row(i) = w * inv_n * log_probs.row(i).array().exp().matrix();
        result.grad_logits(i, y) -= w * inv_n;
    }
    result.value = value * inv_n;
    return result;
}

WeakResult loss_weak(const MatX &probs, const std::vector<std::uint32_t> &masks) {
    require(masks.size() == static_cast<std::size_t>(probs.rows()),
            "loss_weak: one mask per row required");
    const Eigen::Index C = probs.cols();
    require(C <= 32, "loss_weak: masks hold at most 32 classes");
    const std::uint32_t full = C == 32 ? 0xFFFFFFFFu : ((1u << C) - 1u);

    WeakResult result;
    result.grad_logits = MatX::Zero(probs.rows(), C);
    for (std::size_t i = 0; i < masks.size(); ++i)
        require((masks[i] & full) != 0, "loss_weak: empty mask; filter such points upstream");

    double value = 0.0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const std::uint32_t mask = masks[static_cast<std::size_t>(i)] & full;
        if (mask == full) continue;  // nothing disallowed, nothing to penalize
        ++result.active_points;
        double disallowed = 0.0;
        for (Eigen::Index c = 0; c < C; ++c)
            if (!(mask & (1u << c))) disallowed += probs(i, c);
        if (disallowed >= 1.0 - kWeakClamp) {
            value -= std::log(kWeakClamp);  // clamped: flat region, zero gradient
            continue;
        }
        const double allowed = 1.0 - disallowed;
        value -= std::log(allowed);
        for (Eigen::Index c = 0; c < C; ++c) {
            const double indicator = (mask & (1u << c)) ? 0.0 : 1.0;
            result.grad_logits(i, c) = probs(i, c) * (indicator - disallowed) / allowed;
        }
    }
    if (result.active_points == 0) {
        result.value = 0.0;
        return result;
    }
    const double inv_n = 1.0 / static_cast<double>(result.active_points);
    result.value = value * inv_n;
    result.grad_logits *= inv_n;
    return result;
}

void LinearProjection::init_random(int out_dim, int in_dim, std::uint64_t seed) {
    require(out_dim > 0 && in_dim > 0, "LinearProjection: dimensions must be positive");
    Rng rng(seed);
    W.resize(out_dim, in_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (Eigen::Index r = 0; r < W.rows(); ++r)
        for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = scale * gaussian(rng);
}

MatX LinearProjection::project_normalized(const MatX &embeddings) const {
    require(embeddings.cols() == W.cols(), "LinearProjection: embedding dimension mismatch");
    MatX z = embeddings * W.transpose();
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double norm = std::max(z.row(i).norm(), 1e-12);
        z.row(i) /= norm;
    }
    return z;
}

void PrototypeBank::init_random(int num_classes, int dim, std::uint64_t seed) {
    require(num_classes > 0 && dim > 0, "PrototypeBank: dimensions must be positive");
    Rng rng(seed);
    P.resize(num_classes, dim);
    for (Eigen::Index c = 0; c < P.rows(); ++c) {
        double norm = 0.0;
        do {
            for (Eigen::Index d = 0; d < P.cols(); ++d) P(c, d) = gaussian(rng);
            norm = P.row(c).norm();
        } while (norm < 1e-12);
        P.row(c) /= norm;
    }
}

void prototype_update(PrototypeBank &bank, const MatX &embeddings,
                      const std::vector<std::uint16_t> &labels, const LinearProjection &h) {
    require(labels.size() == static_cast<std::size_t>(embeddings.rows()),
            "prototype_update: one label slot per row required");
    if (bank.momentum == 1.0) return;  // nothing can change, keep rows bit-equal
    const MatX projected = h.project_normalized(embeddings);
    require(projected.cols() == bank.P.cols(), "prototype_update: projection dim mismatch");

    const Eigen::Index C = bank.P.rows();
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(C), 0);
    MatX sums = MatX::Zero(C, bank.P.cols());
    for (Eigen::Index i = 0; i < projected.rows(); ++i) {
        const std::uint16_t y = labels[static_cast<std::size_t>(i)];
        if (y == kNoClass) continue;
        require(y < C, "prototype_update: label out of class range");
        sums.row(y) += projected.row(i);
        ++counts[y];
    }
    for (Eigen::Index c = 0; c < C; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0) continue;
        const MatX mean = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        bank.P.row(c) = bank.momentum * bank.P.row(c) + (1.0 - bank.momentum) * mean;
    }
}

ProtoResult loss_proto(const MatX &embeddings, const std::vector<std::uint16_t> &labels,
                       const PrototypeBank &bank, const std::vector<double> &weights,
                       const LinearProjection &h) {
    require(labels.size() == static_cast<std::size_t>(embeddings.rows()),
            "loss_proto: one label slot per row required");
    require(weights.size() == static_cast<std::size_t>(bank.P.rows()),
            "loss_proto: one weight per class required");
    require(bank.tau > 0.0, "loss_proto: tau must be positive");

    ProtoResult result;
    result.grad_embeddings = MatX::Zero(embeddings.rows(), embeddings.cols());
    result.grad_W = MatX::Zero(h.W.rows(), h.W.cols());
    std::size_t labeled = 0;
    for (std::uint16_t y : labels)
        if (y != kNoClass) ++labeled;
    if (labeled == 0) return result;
    result.has_labels = true;

    const MatX z = embeddings * h.W.transpose();  // n×Dp, pre-normalization
    const double inv_n = 1.0 / static_cast<double>(labeled);
    double value = 0.0;
    for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
        const std::uint16_t y = labels[static_cast<std::size_t>(i)];
        if (y == kNoClass) continue;
        const double norm = std::max(z.row(i).norm(), 1e-12);
        const VecX u = z.row(i).transpose() / norm;
        const VecX scores = bank.P * u / bank.tau;  // C
        const double m = scores.maxCoeff();
        const VecX shifted = (scores.array() - m).exp();
        const double lse = std::log(shifted.sum()) + m;
        const VecX sigma = (scores.array() - lse).exp();
        const double w = weights[y];
        value += w * (lse - scores(y));

        // dL/dscores -> dL/du -> dL/dz through the normalization Jacobian.
        VecX dscores = w * inv_n * sigma;
        dscores(y) -= w * inv_n;
        const VecX du = bank.P.transpose() * dscores / bank.tau;
        const VecX dz = (du - u * u.dot(du)) / norm;
        result.grad_embeddings.row(i) = (h.W.transpose() * dz).transpose();
        result.grad_W += dz * embeddings.row(i);
    }
    result.value = value * inv_n;
    return result;
}

DistillResult loss_distill(const MatX &student_logits, const MatX &teacher_logits, double T) {
    require(student_logits.rows() == teacher_logits.rows() &&
                student_logits.cols() == teacher_logits.cols(),
            "loss_distill: student and teacher shapes differ");
    require(T > 0.0, "loss_distill: temperature must be positive");
    DistillResult result;
    result.grad_student = MatX::Zero(student_logits.rows(), student_logits.cols());
    const Eigen::Index n = student_logits.rows();
    if (n == 0) return result;

    const MatX teacher_soft = softmax_rows(teacher_logits / T);
    const MatX student_log_soft = log_softmax_rows(student_logits / T);
    const double inv_n = 1.0 / static_cast<double>(n);
    result.value = -T * T * inv_n * (teacher_soft.array() * student_log_soft.array()).sum();
    // Same softmax path as the teacher so equal logits give an exactly zero
    // gradient and self-distillation is a fixed point.
    result.grad_student = T * inv_n * (softmax_rows(student_logits / T) - teacher_soft);
    return result;
}

JointLossResult joint_loss(const Batch &batch, const PrototypeBank &bank,
                           const LinearProjection &h, const JointLossConfig &config) {
    batch.check();
    const Eigen::Index n = batch.logits.rows();
    const Eigen::Index C = batch.logits.cols();
    JointLossResult result;
    result.grad_logits = MatX::Zero(n, C);
    result.grad_embeddings = MatX::Zero(batch.embeddings.rows(), batch.embeddings.cols());
    result.grad_W = MatX::Zero(h.W.rows(), h.W.cols());

    // Points with no component information never contribute.
    std::vector<std::uint16_t> usable_labels(batch.labels);
    for (std::size_t i = 0; i < usable_labels.size(); ++i)
        if (batch.weak_masks[i] == 0) usable_labels[i] = kNoClass;

    if (config.use_sparse) {
        std::vector<std::uint16_t> sparse_labels(usable_labels);
        for (std::size_t i = 0; i < sparse_labels.size(); ++i)
            if (!batch.label_is_sparse[i]) sparse_labels[i] = kNoClass;
        const WceResult r = loss_wce(batch.logits, sparse_labels, batch.class_weights);
        result.l_sparse = r.value;
        result.grad_logits += r.grad_logits;
    }
    if (config.use_propagated) {
        std::vector<std::uint16_t> prop_labels(usable_labels);
        for (std::size_t i = 0; i < prop_labels.size(); ++i)
            if (batch.label_is_sparse[i]) prop_labels[i] = kNoClass;
        const WceResult r = loss_wce(batch.logits, prop_labels, batch.class_weights);
        result.l_propagated = r.value;
        result.grad_logits += r.grad_logits;
    }
    if (config.use_weak) {
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < batch.weak_masks.size(); ++i)
            if (batch.weak_masks[i] != 0) rows.push_back(static_cast<Eigen::Index>(i));
        if (!rows.empty()) {
            MatX logits_sub(static_cast<Eigen::Index>(rows.size()), C);
            std::vector<std::uint32_t> masks_sub(rows.size());
            for (std::size_t k = 0; k < rows.size(); ++k) {
                logits_sub.row(static_cast<Eigen::Index>(k)) = batch.logits.row(rows[k]);
                masks_sub[k] = batch.weak_masks[static_cast<std::size_t>(rows[k])];
            }
            const WeakResult r = loss_weak(softmax_rows(logits_sub), masks_sub);
            result.l_weak = r.value;
            for (std::size_t k = 0; k < rows.size(); ++k)
                result.grad_logits.row(rows[k]) += r.grad_logits.row(static_cast<Eigen::Index>(k));
        }
    }
    if (config.use_proto) {
        const ProtoResult r =
            loss_proto(batch.embeddings, usable_labels, bank, batch.class_weights, h);
        result.l_proto = r.value;
        result.grad_embeddings += r.grad_embeddings;
        result.grad_W += r.grad_W;
    }
    if (config.use_distill) {
        require(batch.teacher_logits.size() > 0, "joint_loss: distillation without teacher logits");
        const DistillResult r = loss_distill(batch.logits, batch.teacher_logits, config.distill_T);
        result.l_dis = r.value;
        result.grad_logits += r.grad_student;
    }
    result.total = result.l_sparse + result.l_propagated + result.l_weak + result.l_proto +
                   result.l_dis;
    return result;
}

} // namespace lidarseg
