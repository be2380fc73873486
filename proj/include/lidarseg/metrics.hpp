#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace lidarseg {

/// Row-major C×C count matrix; rows are ground truth, columns are predictions.
class ConfusionMatrix {
  public:
    explicit ConfusionMatrix(int num_classes);

    int num_classes() const { return num_classes_; }
    std::uint64_t at(int gt, int pred) const;
    std::uint64_t total() const;

    /// Adds one (gt, pred) pair per element. Points whose gt class is in
    /// `ignore` are skipped. Throws std::invalid_argument on length mismatch
    /// or class ids >= C.
    void accumulate(std::span<const std::uint16_t> gt, std::span<const std::uint16_t> pred,
                    const std::unordered_set<std::uint16_t> &ignore = {});

    /// Shard merge; commutative and associative.
    ConfusionMatrix &operator+=(const ConfusionMatrix &other);

    void reset();

  private:
    int num_classes_;
    std::vector<std::uint64_t> counts_;
};

struct IouReport {
    std::vector<double> per_class;  // NaN for classes absent from both gt and pred
    double miou = 0.0;              // mean over defined classes; NaN when none
};

/// IoU_c = TP / (TP + FP + FN). Classes with zero gt and zero predictions are
/// excluded from the mean.
IouReport iou(const ConfusionMatrix &cm);

/// JSON report with one entry per class plus the mean.
std::string iou_report_json(const IouReport &report, const std::vector<std::string> &class_names = {});

} // namespace lidarseg
