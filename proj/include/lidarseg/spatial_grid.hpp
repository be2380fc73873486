#pragma once

#include "lidarseg/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace lidarseg {

/// Uniform hash grid over a fixed point set. Queries enumerate exact results;
/// the grid only prunes candidates. Point ids refer to the construction span.
class SpatialGrid {
public:
    SpatialGrid(std::span<const Vec3> points, double cell_size)
        : points_(points), cell_(cell_size) {
        if (!(cell_size > 0.0)) throw std::invalid_argument("cell_size must be positive");
        cells_.reserve(points.size());
        for (std::size_t i = 0; i < points.size(); ++i)
            cells_[key_of(points[i])].push_back(static_cast<std::uint32_t>(i));
    }

    double cell_size() const { return cell_; }

    /// Visits every point with ‖p - q‖ <= radius (including q itself if it is
    /// in the set). Visit order follows cell iteration and is deterministic.
    template <class F>
    void for_each_in_ball(const Vec3 &q, double radius, F &&fn) const {
        const double r2 = radius * radius;
        const std::int64_t x0 = coord(q.x() - radius), x1 = coord(q.x() + radius);
        const std::int64_t y0 = coord(q.y() - radius), y1 = coord(q.y() + radius);
        const std::int64_t z0 = coord(q.z() - radius), z1 = coord(q.z() + radius);
        for (std::int64_t z = z0; z <= z1; ++z)
            for (std::int64_t y = y0; y <= y1; ++y)
                for (std::int64_t x = x0; x <= x1; ++x) {
                    auto it = cells_.find(pack(x, y, z));
                    if (it == cells_.end()) continue;
                    for (std::uint32_t id : it->second)
                        if ((points_[id] - q).squaredNorm() <= r2) fn(id);
                }
    }

    /// The k nearest points to q by Euclidean distance, closest first, point
    /// id as tie-break. Returns fewer than k when the set is smaller.
    std::vector<std::uint32_t> knn(const Vec3 &q, std::size_t k) const {
        std::vector<std::pair<double, std::uint32_t>> best;
        if (k == 0 || points_.empty()) return {};
        const std::int64_t cx = coord(q.x()), cy = coord(q.y()), cz = coord(q.z());
        for (std::int64_t ring = 0;; ++ring) {
            for (std::int64_t z = cz - ring; z <= cz + ring; ++z)
                for (std::int64_t y = cy - ring; y <= cy + ring; ++y)
                    for (std::int64_t x = cx - ring; x <= cx + ring; ++x) {
                        if (std::max({std::llabs(x - cx), std::llabs(y - cy), std::llabs(z - cz)}) != ring)
                            continue;
                        auto it = cells_.find(pack(x, y, z));
                        if (it == cells_.end()) continue;
                        for (std::uint32_t id : it->second)
                            best.emplace_back((points_[id] - q).squaredNorm(), id);
                    }
            std::sort(best.begin(), best.end());
            if (best.size() > k) best.resize(k);
            // Any point in a cell beyond this ring lies more than ring*cell
            // from q, so the current top-k is final once it beats that bound.
            const double safe = static_cast<double>(ring) * cell_;
            if (best.size() >= k && best[k - 1].first <= safe * safe) break;
            const bool exhausted = cx - ring <= min_[0] && cx + ring >= max_[0] &&
                                   cy - ring <= min_[1] && cy + ring >= max_[1] &&
                                   cz - ring <= min_[2] && cz + ring >= max_[2];
            if (exhausted) break;
        }
        std::vector<std::uint32_t> ids;
        ids.reserve(best.size());
        for (const auto &[d2, id] : best) ids.push_back(id);
        return ids;
    }

private:
    std::int64_t coord(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }

    static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) {
        // 21 bits per axis covers ±1e6 cells, far beyond any cloud we index.
        const std::uint64_t bias = 1u << 20;
        return ((static_cast<std::uint64_t>(x) + bias) & 0x1FFFFF) |
               (((static_cast<std::uint64_t>(y) + bias) & 0x1FFFFF) << 21) |
               (((static_cast<std::uint64_t>(z) + bias) & 0x1FFFFF) << 42);
    }

    std::uint64_t key_of(const Vec3 &p) {
        const std::int64_t c[3] = {coord(p.x()), coord(p.y()), coord(p.z())};
        for (int a = 0; a < 3; ++a) {
            min_[a] = std::min(min_[a], c[a]);
            max_[a] = std::max(max_[a], c[a]);
        }
        return pack(c[0], c[1], c[2]);
    }

    std::span<const Vec3> points_;
    double cell_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
    std::int64_t min_[3] = {0, 0, 0};
    std::int64_t max_[3] = {0, 0, 0};
};

} // namespace lidarseg
