#include "lidarseg/fuse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace lidarseg {

FusedCloud fuse_scans(std::span<const Scan> scans, std::span<const Pose> poses) {
    if (scans.empty()) throw std::invalid_argument("fuse_scans: empty scan list");
    if (scans.size() != poses.size()) throw std::invalid_argument("fuse_scans: scan/pose count mismatch");

    std::size_t total = 0;
    bool any_labels = false;
    for (const auto &s : scans) {
        total += s.size();
        any_labels |= !s.labels.empty();
    }

    FusedCloud out;
    out.points.reserve(total);
    out.range.reserve(total);
    out.scan_index.reserve(total);
    out.time_offset.reserve(total);
    if (any_labels) out.gt_label.reserve(total);

    const std::int32_t center = static_cast<std::int32_t>(scans.size()) / 2;
    for (std::size_t k = 0; k < scans.size(); ++k) {
        const Scan &scan = scans[k];
        const Pose &pose = poses[k];
        const std::int32_t offset = static_cast<std::int32_t>(k) - center;
        for (std::size_t i = 0; i < scan.size(); ++i) {
            const Vec3 p = scan.points[i].cast<double>();
            out.points.push_back(pose.apply(p));
            out.range.push_back(p.norm());
            out.scan_index.push_back(static_cast<std::uint32_t>(scan.scan_index));
            out.time_offset.push_back(offset);
            if (any_labels) {
                out.gt_label.push_back(i < scan.labels.size() ? scan.labels[i] : kNoClass);
            }
        }
    }
    return out;
}

std::vector<FusedCloud> fuse_windows(std::span<const Scan> scans, std::span<const Pose> poses, int t) {
    if (t < 1) throw std::invalid_argument("fuse_windows: t must be >= 1");
    if (scans.size() != poses.size()) throw std::invalid_argument("fuse_windows: scan/pose count mismatch");
    std::vector<FusedCloud> out;
    for (std::size_t lo = 0; lo < scans.size(); lo += static_cast<std::size_t>(t)) {
        const std::size_t hi = std::min(scans.size(), lo + static_cast<std::size_t>(t));
        out.push_back(fuse_scans(scans.subspan(lo, hi - lo), poses.subspan(lo, hi - lo)));
    }
    return out;
}

namespace {

struct VoxelKey {
    std::int64_t x, y, z;
    bool operator==(const VoxelKey &) const = default;
};

struct VoxelKeyHash {
    std::size_t operator()(const VoxelKey &k) const {
        std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9e3779b97f4a7c15ULL;
        h ^= static_cast<std::uint64_t>(k.y) * 0xc2b2ae3d27d4eb4fULL;
        h ^= static_cast<std::uint64_t>(k.z) * 0x165667b19e3779f9ULL;
        h ^= h >> 29;
        return static_cast<std::size_t>(h);
    }
};

VoxelKey voxel_of(const Vec3 &p, const Vec3 &origin, double size) {
    return {static_cast<std::int64_t>(std::floor((p.x() - origin.x()) / size)),
            static_cast<std::int64_t>(std::floor((p.y() - origin.y()) / size)),
            static_cast<std::int64_t>(std::floor((p.z() - origin.z()) / size))};
}

std::size_t occupied_count(const FusedCloud &cloud, const Vec3 &origin, double size) {
    std::unordered_set<VoxelKey, VoxelKeyHash> seen;
    seen.reserve(cloud.size());
    for (const auto &p : cloud.points) seen.insert(voxel_of(p, origin, size));
    return seen.size();
}

} // namespace

VoxelDownsampleResult voxel_downsample(const FusedCloud &cloud, std::size_t target_count) {
    if (target_count < 1) throw std::invalid_argument("voxel_downsample: target_count must be >= 1");

    VoxelDownsampleResult result;
    if (cloud.size() <= target_count) {
        result.cloud = cloud;
        result.kept_ids.resize(cloud.size());
        for (std::uint32_t i = 0; i < cloud.size(); ++i) result.kept_ids[i] = i;
        return result;
    }

    Vec3 lo = cloud.points.front(), hi = cloud.points.front();
    for (const auto &p : cloud.points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double diameter = std::max((hi - lo).norm(), 1e-9);

    // Occupied-voxel count falls as the voxel grows; bisect the size until the
    // count lands in the ±5% band, keeping the closest size seen.
    double size_lo = diameter * 1e-7;  // everything distinct
    double size_hi = diameter * 2.0;   // single voxel
    double best_size = size_hi;
    std::size_t best_count = 1;
    const auto band_lo = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(target_count)));
    const auto band_hi = static_cast<std::size_t>(std::floor(1.05 * static_cast<double>(target_count)));

    for (int iter = 0; iter < 64; ++iter) {
        const double mid = 0.5 * (size_lo + size_hi);
        const std::size_t count = occupied_count(cloud, lo, mid);
        const auto dist = [&](std::size_t c) {
            return c > target_count ? c - target_count : target_count - c;
        };
        if (dist(count) < dist(best_count)) {
            best_count = count;
            best_size = mid;
        }
        if (count >= band_lo && count <= band_hi) {
            best_count = count;
            best_size = mid;
            break;
        }
        if (count > target_count) {
            size_lo = mid;
        } else {
            size_hi = mid;
        }
    }

    // Representative per voxel: lexicographically smallest point id.
    std::unordered_map<VoxelKey, std::uint32_t, VoxelKeyHash> rep;
    rep.reserve(best_count * 2);
    for (std::uint32_t i = 0; i < cloud.size(); ++i) {
        const VoxelKey key = voxel_of(cloud.points[i], lo, best_size);
        auto [it, inserted] = rep.try_emplace(key, i);
        if (!inserted && i < it->second) it->second = i;
    }
    result.kept_ids.reserve(rep.size());
    for (const auto &[key, id] : rep) result.kept_ids.push_back(id);
    std::sort(result.kept_ids.begin(), result.kept_ids.end());
    result.cloud = subset_cloud(cloud, result.kept_ids);
    result.voxel_size = best_size;
    return result;
}

FusedCloud subset_cloud(const FusedCloud &cloud, const std::vector<std::uint32_t> &ids) {
    FusedCloud out;
    out.points.reserve(ids.size());
    out.range.reserve(ids.size());
    out.scan_index.reserve(ids.size());
    out.time_offset.reserve(ids.size());
    if (cloud.has_gt()) out.gt_label.reserve(ids.size());
    for (const auto id : ids) {
        out.points.push_back(cloud.points[id]);
        out.range.push_back(cloud.range[id]);
        out.scan_index.push_back(cloud.scan_index[id]);
        out.time_offset.push_back(cloud.time_offset[id]);
        if (cloud.has_gt()) out.gt_label.push_back(cloud.gt_label[id]);
    }
    return out;
}

} // namespace lidarseg
