#pragma once

#include "lidarseg/types.hpp"

#include <cstdint>
#include <vector>

namespace lidarseg {

/// Numerically stable row-wise softmax / log-softmax.
MatX softmax_rows(const MatX &logits);
MatX log_softmax_rows(const MatX &logits);

/// One training batch. Rows of `logits` and `embeddings` correspond; `labels`
/// uses kNoClass for unlabeled points and `label_is_sparse` distinguishes
/// clicked labels from propagated ones. A zero weak mask means the point has
/// no component-level information and takes part in no loss term.
struct Batch {
    MatX logits;                              // n×C
    MatX embeddings;                          // n×D
    std::vector<std::uint16_t> labels;
    std::vector<std::uint8_t> label_is_sparse;
    std::vector<std::uint32_t> weak_masks;
    std::vector<double> class_weights;        // size C
    MatX teacher_logits;                      // n×C when distilling, else 0×0

    std::size_t size() const { return static_cast<std::size_t>(logits.rows()); }
    int num_classes() const { return static_cast<int>(logits.cols()); }
    void check() const;  // shape and invariant validation, throws invalid_argument
};

struct WceResult {
    double value = 0.0;
    MatX grad_logits;       // same shape as logits; zero rows for unlabeled points
    bool has_labels = false;
};

/// Class-weighted cross entropy averaged over labeled points. A batch with no
/// labeled point yields zero loss and gradient with has_labels = false.
WceResult loss_wce(const MatX &logits, const std::vector<std::uint16_t> &labels,
                   const std::vector<double> &weights);

struct WeakResult {
    double value = 0.0;
    MatX grad_logits;
    std::size_t active_points = 0;  // points with at least one disallowed class
};

/// Penalizes probability mass on classes absent from each point's mask:
/// mean over active points of -log(1 - disallowed mass), the mass clamped to
/// 1-1e-7 (a clamped point gets zero gradient). Every mask must have at
/// least one allowed class; empty masks belong upstream.
WeakResult loss_weak(const MatX &probs, const std::vector<std::uint32_t> &masks);

/// Linear map to the projection space; project_normalized returns unit rows.
struct LinearProjection {
    MatX W;  // Dp×D

    void init_random(int out_dim, int in_dim, std::uint64_t seed);
    MatX project_normalized(const MatX &embeddings) const;  // n×Dp
};

struct PrototypeBank {
    MatX P;                  // C×Dp, one prototype per class
    double momentum = 0.99;
    double tau = 0.1;

    /// Rows drawn uniformly on the unit sphere.
    void init_random(int num_classes, int dim, std::uint64_t seed);
};

/// Momentum update P_c <- m·P_c + (1-m)·mean of normalized projections of the
/// labeled points of class c. Classes absent from the batch stay bit-equal.
/// No gradient flows through this update.
void prototype_update(PrototypeBank &bank, const MatX &embeddings,
                      const std::vector<std::uint16_t> &labels, const LinearProjection &h);

struct ProtoResult {
    double value = 0.0;
    MatX grad_embeddings;  // n×D
    MatX grad_W;           // Dp×D
    bool has_labels = false;
};

/// Weighted cross entropy over prototype similarities: softmax over
/// h(f(x))·P_c / tau, evaluated at each labeled point's class, averaged over
/// labeled points. Prototypes are constants here.
ProtoResult loss_proto(const MatX &embeddings, const std::vector<std::uint16_t> &labels,
                       const PrototypeBank &bank, const std::vector<double> &weights,
                       const LinearProjection &h);

struct DistillResult {
    double value = 0.0;
    MatX grad_student;
};

/// T²-scaled cross entropy between the softened teacher and student
/// distributions, averaged over rows. Gradient with respect to the student
/// logits is (T/n)(softmax(student/T) - softmax(teacher/T)).
DistillResult loss_distill(const MatX &student_logits, const MatX &teacher_logits, double T);

struct JointLossConfig {
    bool use_sparse = true;
    bool use_propagated = true;
    bool use_weak = true;
    bool use_proto = true;
    bool use_distill = false;
    double distill_T = 4.0;
};

struct JointLossResult {
    double total = 0.0;
    double l_sparse = 0.0, l_propagated = 0.0, l_weak = 0.0, l_proto = 0.0, l_dis = 0.0;
    MatX grad_logits;
    MatX grad_embeddings;
    MatX grad_W;
};

/// Unit-weight sum of the enabled terms. Sparse and propagated cross
/// entropies are normalized independently over their own index sets; points
/// with an empty weak mask contribute to nothing.
JointLossResult joint_loss(const Batch &batch, const PrototypeBank &bank,
                           const LinearProjection &h, const JointLossConfig &config);

} // namespace lidarseg
