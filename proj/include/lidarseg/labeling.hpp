#pragma once

#include "lidarseg/preseg.hpp"
#include "lidarseg/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lidarseg {

struct AnnotationConfig {
    double purity_cutoff_fraction = 0.05;  // a class needs count > fraction*size to be clicked
    int clicks_per_class = 1;
    double click_budget_fraction = 0.0;    // cap total clicks at floor(fraction*points); 0 = no cap
    double noise_rate = 0.0;               // chance a click's class is swapped for a wrong one
    std::uint64_t rng_seed = 0;

    void validate() const;
};

/// One annotator click: the point and the class it was labeled with (equal to
/// the point's ground truth unless noise changed it).
struct SparseLabel {
    std::uint32_t point_id;
    std::uint16_t class_id;
};

/// Clicks for each sufficiently represented class in each component, sampled
/// uniformly inside the class; sorted by point id. Components where no class
/// clears the cutoff receive no clicks. Under a click budget, components are
/// visited in a seeded random order and kept while their clicks still fit, so
/// the same components are annotated regardless of the noise rate.
std::vector<SparseLabel> simulate_annotation(const FusedCloud &cloud, const PresegResult &preseg,
                                             const AnnotationConfig &config, int num_classes);

struct LabelBundle {
    std::vector<SparseLabel> sparse;            // sorted by point id
    std::vector<std::uint32_t> weak_masks;      // per component: bit c set iff class c annotated
    std::vector<std::uint16_t> propagated;      // per point; kNoClass when absent
    std::vector<std::uint32_t> ignored_ids;     // points outside every kept component
    int num_classes = 0;

    std::uint32_t point_weak_mask(const PresegResult &preseg, std::uint32_t point_id) const {
        const std::uint32_t c = preseg.component_of[point_id];
        return c == kNoComponent ? 0u : weak_masks[c];
    }
};

/// Expands clicks into the three label types: weak masks per component,
/// dense propagated labels for components with exactly one annotated class
/// (the clicked points included), nothing for unannotated components.
/// Requires num_classes <= 32 so a mask fits one word.
LabelBundle derive_labels(const PresegResult &preseg, const std::vector<SparseLabel> &sparse,
                          int num_classes);

struct StatsReport {
    std::size_t num_components = 0;
    std::size_t one_category = 0, two_category = 0, more_category = 0;
    double mean_categories = 0.0;
    std::size_t total_points = 0;
    std::size_t sparse_count = 0, propagated_count = 0, weak_count = 0;
    double coverage_sparse = 0.0;      // fractions of total points
    double coverage_propagated = 0.0;  // clicked points counted under sparse, not here
    double coverage_weak = 0.0;
    double propagated_error_rate = 0.0;
    std::vector<double> per_class_sparse_coverage;      // of each class's gt points
    std::vector<double> per_class_propagated_coverage;
};

/// Component purity and label-coverage bookkeeping against ground truth.
StatsReport label_statistics(const LabelBundle &bundle, const PresegResult &preseg,
                             const FusedCloud &cloud);

/// w_c = 1/sqrt(count_c) over classes with labels, rescaled to mean 1; absent
/// classes get 0. Throws std::invalid_argument when every count is zero.
std::vector<double> class_weights(const std::vector<std::size_t> &label_counts);

/// Sparse plus propagated label tallies per class, the usual input to
/// class_weights.
std::vector<std::size_t> count_labels(const LabelBundle &bundle);

/// sparse.bin (uint32 point, uint16 class records), weak_masks.bin (uint32
/// per component), propagated.bin (uint16 per point), labels.json.
void save_labels(const std::filesystem::path &dir, const LabelBundle &bundle);
LabelBundle load_labels(const std::filesystem::path &dir);

void to_json(nlohmann::json &j, const AnnotationConfig &config);
void from_json(const nlohmann::json &j, AnnotationConfig &config);
nlohmann::json stats_to_json(const StatsReport &report);
std::string stats_to_table(const StatsReport &report);

} // namespace lidarseg
