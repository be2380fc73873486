#include "lidarseg/metrics.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lidarseg {

ConfusionMatrix::ConfusionMatrix(int num_classes) : num_classes_(num_classes) {
    if (num_classes <= 0) throw std::invalid_argument("ConfusionMatrix: num_classes must be positive");
    counts_.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
}

std::uint64_t ConfusionMatrix::at(int gt, int pred) const {
    return counts_[static_cast<std::size_t>(gt) * num_classes_ + pred];
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (const auto c : counts_) t += c;
    return t;
}

void ConfusionMatrix::accumulate(std::span<const std::uint16_t> gt,
                                 std::span<const std::uint16_t> pred,
                                 const std::unordered_set<std::uint16_t> &ignore) {
    if (gt.size() != pred.size()) throw std::invalid_argument("accumulate: gt/pred length mismatch");
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (ignore.count(gt[i])) continue;
        if (gt[i] >= num_classes_ || pred[i] >= num_classes_) {
            throw std::invalid_argument("accumulate: class id out of range at element " + std::to_string(i));
        }
        ++counts_[static_cast<std::size_t>(gt[i]) * num_classes_ + pred[i]];
    }
}

ConfusionMatrix &ConfusionMatrix::operator+=(const ConfusionMatrix &other) {
    if (other.num_classes_ != num_classes_) throw std::invalid_argument("merge: class count mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
}

void ConfusionMatrix::reset() { counts_.assign(counts_.size(), 0); }

IouReport iou(const ConfusionMatrix &cm) {
    const int C = cm.num_classes();
    IouReport report;
    report.per_class.assign(C, std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    int defined = 0;
    for (int c = 0; c < C; ++c) {
        std::uint64_t tp = cm.at(c, c);
        std::uint64_t fp = 0, fn = 0;
        for (int k = 0; k < C; ++k) {
            if (k == c) continue;
            fp += cm.at(k, c);
            fn += cm.at(c, k);
        }
        if (tp + fp + fn == 0) continue;  // absent from gt and predictions
        report.per_class[c] = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
        sum += report.per_class[c];
        ++defined;
    }
    report.miou = defined > 0 ? sum / defined : std::numeric_limits<double>::quiet_NaN();
    return report;
}

std::string iou_report_json(const IouReport &report, const std::vector<std::string> &class_names) {
    nlohmann::json j;
    j["per_class"] = nlohmann::json::array();
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        nlohmann::json entry;
        entry["class"] = c;
        if (c < class_names.size()) entry["name"] = class_names[c];
        if (std::isnan(report.per_class[c])) {
            entry["iou"] = nullptr;
        } else {
            entry["iou"] = report.per_class[c];
        }
        j["per_class"].push_back(entry);
    }
    if (std::isnan(report.miou)) {
        j["miou"] = nullptr;
    } else {
        j["miou"] = report.miou;
    }
    return j.dump(2);
}

} // namespace lidarseg
