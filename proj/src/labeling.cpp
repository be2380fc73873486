#include "lidarseg/labeling.hpp"

#include "lidarseg/errors.hpp"
#include "lidarseg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

namespace lidarseg {

void AnnotationConfig::validate() const {
    if (!(purity_cutoff_fraction >= 0.0 && purity_cutoff_fraction < 1.0))
        throw std::invalid_argument("purity_cutoff_fraction must be in [0, 1)");
    if (clicks_per_class < 1) throw std::invalid_argument("clicks_per_class must be >= 1");
    if (!(click_budget_fraction >= 0.0 && click_budget_fraction <= 1.0))
        throw std::invalid_argument("click_budget_fraction must be in [0, 1]");
    if (!(noise_rate >= 0.0 && noise_rate < 1.0))
        throw std::invalid_argument("noise_rate must be in [0, 1)");
}

std::vector<SparseLabel> simulate_annotation(const FusedCloud &cloud, const PresegResult &preseg,
                                             const AnnotationConfig &config, int num_classes) {
    config.validate();
    if (!cloud.has_gt()) throw std::invalid_argument("simulate_annotation needs ground truth");
    if (num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");

    std::vector<std::vector<SparseLabel>> per_component(preseg.components.size());
    for (std::size_t ci = 0; ci < preseg.components.size(); ++ci) {
        const Component &comp = preseg.components[ci];
        std::vector<std::vector<std::uint32_t>> by_class(static_cast<std::size_t>(num_classes));
        for (std::uint32_t id : comp.point_ids) {
            const std::uint16_t gt = cloud.gt_label[id];
            if (gt < num_classes) by_class[gt].push_back(id);
        }
        const double cutoff = config.purity_cutoff_fraction * static_cast<double>(comp.point_ids.size());
        Rng rng(mix_seed(config.rng_seed, static_cast<std::uint64_t>(ci)));
        for (int c = 0; c < num_classes; ++c) {
            const auto &ids = by_class[static_cast<std::size_t>(c)];
            if (static_cast<double>(ids.size()) <= cutoff || ids.empty()) continue;
            const std::size_t clicks =
                std::min<std::size_t>(static_cast<std::size_t>(config.clicks_per_class), ids.size());
            const std::vector<std::uint32_t> picks =
                sample_without_replacement(rng, static_cast<std::uint32_t>(ids.size()),
                                           static_cast<std::uint32_t>(clicks));
            for (std::uint32_t p : picks) {
                std::uint16_t label = static_cast<std::uint16_t>(c);
                if (config.noise_rate > 0.0 && uniform_double(rng) < config.noise_rate &&
                    num_classes > 1) {
                    // Uniform over the wrong classes.
                    std::size_t wrong = uniform_index(rng, static_cast<std::size_t>(num_classes - 1));
                    if (wrong >= static_cast<std::size_t>(c)) ++wrong;
                    label = static_cast<std::uint16_t>(wrong);
                }
                per_component[ci].push_back({ids[p], label});
            }
        }
    }

    std::vector<SparseLabel> out;
    if (config.click_budget_fraction > 0.0) {
        // First fit over a seeded component order; the order rng is separate
        // from the click rngs so the kept set ignores the noise rate.
        const std::size_t budget = static_cast<std::size_t>(
            config.click_budget_fraction * static_cast<double>(preseg.num_points()));
        std::vector<std::uint32_t> order(per_component.size());
        std::iota(order.begin(), order.end(), 0u);
        Rng order_rng(mix_seed(config.rng_seed, 0x62756467u));
        shuffle(order, order_rng);
        std::size_t kept = 0;
        for (std::uint32_t ci : order) {
            if (per_component[ci].empty() || kept + per_component[ci].size() > budget) continue;
            kept += per_component[ci].size();
            out.insert(out.end(), per_component[ci].begin(), per_component[ci].end());
        }
    } else {
        for (const auto &clicks : per_component) out.insert(out.end(), clicks.begin(), clicks.end());
    }
    std::sort(out.begin(), out.end(),
              [](const SparseLabel &a, const SparseLabel &b) { return a.point_id < b.point_id; });
    return out;
}

LabelBundle derive_labels(const PresegResult &preseg, const std::vector<SparseLabel> &sparse,
                          int num_classes) {
    if (num_classes < 1 || num_classes > 32)
        throw std::invalid_argument("derive_labels supports 1..32 classes");
    LabelBundle bundle;
    bundle.num_classes = num_classes;
    bundle.sparse = sparse;
    std::sort(bundle.sparse.begin(), bundle.sparse.end(),
              [](const SparseLabel &a, const SparseLabel &b) { return a.point_id < b.point_id; });
    bundle.weak_masks.assign(preseg.components.size(), 0u);
    bundle.propagated.assign(preseg.num_points(), kNoClass);
    bundle.ignored_ids = preseg.ignored_ids;

    for (const SparseLabel &s : bundle.sparse) {
        if (s.point_id >= preseg.num_points())
            throw std::invalid_argument("sparse label references point " +
                                        std::to_string(s.point_id) + " beyond the cloud");
        if (s.class_id >= num_classes)
            throw std::invalid_argument("sparse label class " + std::to_string(s.class_id) +
                                        " is outside 0.." + std::to_string(num_classes - 1));
        const std::uint32_t comp = preseg.component_of[s.point_id];
        if (comp == kNoComponent)
            throw std::invalid_argument("sparse label on ignored point " +
                                        std::to_string(s.point_id));
        bundle.weak_masks[comp] |= 1u << s.class_id;
    }
    for (std::size_t ci = 0; ci < preseg.components.size(); ++ci) {
        const std::uint32_t mask = bundle.weak_masks[ci];
        if (mask == 0 || (mask & (mask - 1)) != 0) continue;  // zero or multiple classes
        std::uint16_t cls = 0;
        while (!(mask & (1u << cls))) ++cls;
        for (std::uint32_t id : preseg.components[ci].point_ids) bundle.propagated[id] = cls;
    }
    return bundle;
}

StatsReport label_statistics(const LabelBundle &bundle, const PresegResult &preseg,
                             const FusedCloud &cloud) {
    if (!cloud.has_gt()) throw std::invalid_argument("label_statistics needs ground truth");
    if (bundle.propagated.size() != cloud.size())
        throw std::invalid_argument("bundle and cloud disagree on point count");

    StatsReport report;
    report.total_points = cloud.size();
    report.num_components = preseg.components.size();

    double category_sum = 0.0;
    for (const Component &comp : preseg.components) {
        std::set<std::uint16_t> classes;
        for (std::uint32_t id : comp.point_ids) classes.insert(cloud.gt_label[id]);
        category_sum += static_cast<double>(classes.size());
        if (classes.size() == 1) ++report.one_category;
        else if (classes.size() == 2) ++report.two_category;
        else ++report.more_category;
    }
    if (report.num_components > 0)
        report.mean_categories = category_sum / static_cast<double>(report.num_components);

    const int C = bundle.num_classes;
    std::vector<std::size_t> gt_count(static_cast<std::size_t>(C), 0);
    std::vector<std::size_t> sparse_per_class(static_cast<std::size_t>(C), 0);
    std::vector<std::size_t> prop_per_class(static_cast<std::size_t>(C), 0);
    for (std::uint32_t i = 0; i < cloud.size(); ++i)
        if (cloud.gt_label[i] < C) ++gt_count[cloud.gt_label[i]];

    std::vector<bool> clicked(cloud.size(), false);
    for (const SparseLabel &s : bundle.sparse) {
        clicked[s.point_id] = true;
        const std::uint16_t gt = cloud.gt_label[s.point_id];
        if (gt < C) ++sparse_per_class[gt];  // coverage is about gt points reached
    }
    report.sparse_count = bundle.sparse.size();

    std::size_t prop_errors = 0;
    for (std::uint32_t i = 0; i < cloud.size(); ++i) {
        if (bundle.propagated[i] == kNoClass || clicked[i]) continue;
        ++report.propagated_count;
        const std::uint16_t gt = cloud.gt_label[i];
        if (gt < C && bundle.propagated[i] == gt) ++prop_per_class[gt];
        if (bundle.propagated[i] != gt) ++prop_errors;
    }
    for (std::uint32_t i = 0; i < cloud.size(); ++i)
        if (bundle.point_weak_mask(preseg, i) != 0) ++report.weak_count;

    const double n = static_cast<double>(report.total_points);
    if (n > 0) {
        report.coverage_sparse = static_cast<double>(report.sparse_count) / n;
        report.coverage_propagated = static_cast<double>(report.propagated_count) / n;
        report.coverage_weak = static_cast<double>(report.weak_count) / n;
    }
    if (report.propagated_count > 0)
        report.propagated_error_rate =
            static_cast<double>(prop_errors) / static_cast<double>(report.propagated_count);

    report.per_class_sparse_coverage.assign(static_cast<std::size_t>(C), 0.0);
    report.per_class_propagated_coverage.assign(static_cast<std::size_t>(C), 0.0);
    for (int c = 0; c < C; ++c) {
        if (gt_count[c] == 0) continue;
        report.per_class_sparse_coverage[c] =
            static_cast<double>(sparse_per_class[c]) / static_cast<double>(gt_count[c]);
        report.per_class_propagated_coverage[c] =
            static_cast<double>(prop_per_class[c]) / static_cast<double>(gt_count[c]);
    }
    return report;
}

std::vector<double> class_weights(const std::vector<std::size_t> &label_counts) {
    std::vector<double> weights(label_counts.size(), 0.0);
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < label_counts.size(); ++c) {
        if (label_counts[c] == 0) continue;
        weights[c] = 1.0 / std::sqrt(static_cast<double>(label_counts[c]));
        sum += weights[c];
        ++present;
    }
    if (present == 0) throw std::invalid_argument("class_weights: no class has labels");
    const double scale = static_cast<double>(present) / sum;  // mean over present classes -> 1
    for (double &w : weights) w *= scale;
    return weights;
}

std::vector<std::size_t> count_labels(const LabelBundle &bundle) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(bundle.num_classes), 0);
    std::vector<bool> clicked;
    for (const SparseLabel &s : bundle.sparse) {
        if (clicked.size() <= s.point_id) clicked.resize(s.point_id + 1, false);
        clicked[s.point_id] = true;
        ++counts[s.class_id];
    }
    for (std::size_t i = 0; i < bundle.propagated.size(); ++i) {
        if (bundle.propagated[i] == kNoClass) continue;
        if (i < clicked.size() && clicked[i]) continue;  // already counted via its click
        ++counts[bundle.propagated[i]];
    }
    return counts;
}

void save_labels(const std::filesystem::path &dir, const LabelBundle &bundle) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "sparse.bin", std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / "sparse.bin").string());
        for (const SparseLabel &s : bundle.sparse) {
            out.write(reinterpret_cast<const char *>(&s.point_id), sizeof(s.point_id));
            out.write(reinterpret_cast<const char *>(&s.class_id), sizeof(s.class_id));
        }
    }
    {
        std::ofstream out(dir / "weak_masks.bin", std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / "weak_masks.bin").string());
        out.write(reinterpret_cast<const char *>(bundle.weak_masks.data()),
                  static_cast<std::streamsize>(bundle.weak_masks.size() * sizeof(std::uint32_t)));
    }
    {
        std::ofstream out(dir / "propagated.bin", std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / "propagated.bin").string());
        out.write(reinterpret_cast<const char *>(bundle.propagated.data()),
                  static_cast<std::streamsize>(bundle.propagated.size() * sizeof(std::uint16_t)));
    }
    nlohmann::json j = {{"num_classes", bundle.num_classes},
                        {"num_sparse", bundle.sparse.size()},
                        {"num_components", bundle.weak_masks.size()},
                        {"num_points", bundle.propagated.size()},
                        {"num_ignored", bundle.ignored_ids.size()}};
    std::ofstream out(dir / "labels.json");
    if (!out) throw DataError("cannot write " + (dir / "labels.json").string());
    out << j.dump(2) << "\n";
}

namespace {

std::vector<char> read_all(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("cannot read " + path.string());
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<char> data(static_cast<std::size_t>(size));
    in.read(data.data(), size);
    if (in.gcount() != size) throw FormatError(path.string() + ": short read");
    return data;
}

} // namespace

LabelBundle load_labels(const std::filesystem::path &dir) {
    nlohmann::json j;
    {
        std::ifstream in(dir / "labels.json");
        if (!in) throw DataError("cannot read " + (dir / "labels.json").string());
        in >> j;
    }
    LabelBundle bundle;
    bundle.num_classes = j.at("num_classes").get<int>();

    const std::vector<char> sparse_raw = read_all(dir / "sparse.bin");
    if (sparse_raw.size() % 6 != 0)
        throw FormatError((dir / "sparse.bin").string() + ": size " +
                          std::to_string(sparse_raw.size()) + " is not a multiple of 6");
    bundle.sparse.resize(sparse_raw.size() / 6);
    for (std::size_t i = 0; i < bundle.sparse.size(); ++i) {
        std::memcpy(&bundle.sparse[i].point_id, sparse_raw.data() + i * 6, 4);
        std::memcpy(&bundle.sparse[i].class_id, sparse_raw.data() + i * 6 + 4, 2);
    }

    const std::vector<char> weak_raw = read_all(dir / "weak_masks.bin");
    if (weak_raw.size() % 4 != 0)
        throw FormatError((dir / "weak_masks.bin").string() + ": size not a multiple of 4");
    bundle.weak_masks.resize(weak_raw.size() / 4);
    std::memcpy(bundle.weak_masks.data(), weak_raw.data(), weak_raw.size());

    const std::vector<char> prop_raw = read_all(dir / "propagated.bin");
    if (prop_raw.size() % 2 != 0)
        throw FormatError((dir / "propagated.bin").string() + ": size not a multiple of 2");
    bundle.propagated.resize(prop_raw.size() / 2);
    std::memcpy(bundle.propagated.data(), prop_raw.data(), prop_raw.size());

    if (bundle.sparse.size() != j.at("num_sparse").get<std::size_t>() ||
        bundle.weak_masks.size() != j.at("num_components").get<std::size_t>() ||
        bundle.propagated.size() != j.at("num_points").get<std::size_t>())
        throw ConsistencyError("labels.json counts disagree with the binary files in " +
                               dir.string());
    return bundle;
}

void to_json(nlohmann::json &j, const AnnotationConfig &config) {
    j = nlohmann::json{{"purity_cutoff_fraction", config.purity_cutoff_fraction},
                       {"clicks_per_class", config.clicks_per_class},
                       {"click_budget_fraction", config.click_budget_fraction},
                       {"noise_rate", config.noise_rate},
                       {"rng_seed", config.rng_seed}};
}

void from_json(const nlohmann::json &j, AnnotationConfig &config) {
    config = AnnotationConfig{};
    j.at("purity_cutoff_fraction").get_to(config.purity_cutoff_fraction);
    j.at("clicks_per_class").get_to(config.clicks_per_class);
    j.at("click_budget_fraction").get_to(config.click_budget_fraction);
    j.at("noise_rate").get_to(config.noise_rate);
    j.at("rng_seed").get_to(config.rng_seed);
}

nlohmann::json stats_to_json(const StatsReport &r) {
    return nlohmann::json{{"num_components", r.num_components},
                          {"one_category", r.one_category},
                          {"two_category", r.two_category},
                          {"more_category", r.more_category},
                          {"mean_categories", r.mean_categories},
                          {"total_points", r.total_points},
                          {"sparse_count", r.sparse_count},
                          {"propagated_count", r.propagated_count},
                          {"weak_count", r.weak_count},
                          {"coverage_sparse", r.coverage_sparse},
                          {"coverage_propagated", r.coverage_propagated},
                          {"coverage_weak", r.coverage_weak},
                          {"propagated_error_rate", r.propagated_error_rate},
                          {"per_class_sparse_coverage", r.per_class_sparse_coverage},
                          {"per_class_propagated_coverage", r.per_class_propagated_coverage}};
}

std::string stats_to_table(const StatsReport &r) {
    char buf[256];
    std::string s;
    const double nc = r.num_components > 0 ? static_cast<double>(r.num_components) : 1.0;
    std::snprintf(buf, sizeof(buf), "components            %zu\n", r.num_components);
    s += buf;
    std::snprintf(buf, sizeof(buf), "  one category        %6.1f%%\n",
                  100.0 * static_cast<double>(r.one_category) / nc);
    s += buf;
    std::snprintf(buf, sizeof(buf), "  two categories      %6.1f%%\n",
                  100.0 * static_cast<double>(r.two_category) / nc);
    s += buf;
    std::snprintf(buf, sizeof(buf), "  over two            %6.1f%%\n",
                  100.0 * static_cast<double>(r.more_category) / nc);
    s += buf;
    std::snprintf(buf, sizeof(buf), "  mean categories     %6.2f\n", r.mean_categories);
    s += buf;
    std::snprintf(buf, sizeof(buf), "coverage (of %zu points)\n", r.total_points);
    s += buf;
    std::snprintf(buf, sizeof(buf), "  sparse              %6.2f%%\n", 100.0 * r.coverage_sparse);
    s += buf;
    std::snprintf(buf, sizeof(buf), "  propagated          %6.1f%%\n",
                  100.0 * r.coverage_propagated);
    s += buf;
    std::snprintf(buf, sizeof(buf), "  weak                %6.1f%%\n", 100.0 * r.coverage_weak);
    s += buf;
    std::snprintf(buf, sizeof(buf), "propagated error rate %6.2f%%\n",
                  100.0 * r.propagated_error_rate);
    s += buf;
    return s;
}

} // namespace lidarseg
