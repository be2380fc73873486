#include "lidarseg/preseg.hpp"

#include "lidarseg/errors.hpp"
#include "lidarseg/parallel.hpp"
#include "lidarseg/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <unordered_map>

namespace lidarseg {

namespace {

constexpr double kGroundNormalMaxAngleDeg = 30.0;
constexpr int kMinGroundInliers = 3;

void canonicalize_sign(Plane &plane) {
    const Vec3 &n = plane.normal;
    bool flip = false;
    if (n.z() != 0.0) flip = n.z() < 0.0;
    else if (n.y() != 0.0) flip = n.y() < 0.0;
    else flip = n.x() < 0.0;
    if (flip) {
        plane.normal = -plane.normal;
        plane.offset = -plane.offset;
    }
}

Plane fit_plane_least_squares(std::span<const Vec3> points, std::span<const std::uint32_t> ids) {
    Vec3 centroid = Vec3::Zero();
    for (std::uint32_t id : ids) centroid += points[id];
    centroid /= static_cast<double>(ids.size());
    Mat3 cov = Mat3::Zero();
    for (std::uint32_t id : ids) {
        const Vec3 q = points[id] - centroid;
        cov += q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Plane plane;
    plane.normal = eig.eigenvectors().col(0).normalized();
    plane.offset = -plane.normal.dot(centroid);
    canonicalize_sign(plane);
    return plane;
}

struct UnionFind {
    std::vector<std::uint32_t> parent;

    explicit UnionFind(std::size_t n) : parent(n) {
        for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<std::uint32_t>(i);
    }
    std::uint32_t find(std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a > b) std::swap(a, b);  // lower root wins: canonical representatives
        parent[b] = a;
    }
};

std::vector<Component> order_by_smallest_id(std::vector<Component> components) {
    std::sort(components.begin(), components.end(), [](const Component &a, const Component &b) {
        return a.point_ids.front() < b.point_ids.front();
    });
    return components;
}

} // namespace

void PresegConfig::validate() const {
    if (!(cell_size > 0.0)) throw std::invalid_argument("cell_size must be positive");
    if (!(ransac_threshold > 0.0)) throw std::invalid_argument("ransac_threshold must be positive");
    if (ransac_iterations < 1) throw std::invalid_argument("ransac_iterations must be positive");
    if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument("d must be in (0, 1)");
    if (!(max_component_extent > 0.0))
        throw std::invalid_argument("max_component_extent must be positive");
    if (min_component_points < 0) throw std::invalid_argument("min_component_points must be >= 0");
}

RansacPlaneResult ransac_plane(std::span<const Vec3> points, double threshold, int iterations,
                               std::uint64_t seed) {
    const std::size_t n = points.size();
    if (n < 3) throw DegenerateGeometryError("ransac_plane needs at least 3 points");

    Rng rng(seed);
    bool have_candidate = false;
    std::size_t best_count = 0;
    double best_mean_residual = std::numeric_limits<double>::infinity();
    Plane best_plane;

    for (int iter = 0; iter < iterations; ++iter) {
        const std::vector<std::uint32_t> draw =
            sample_without_replacement(rng, static_cast<std::uint32_t>(n), 3);
        const Vec3 &a = points[draw[0]];
        const Vec3 u = points[draw[1]] - a;
        const Vec3 v = points[draw[2]] - a;
        const Vec3 cross = u.cross(v);
        const double cross_norm = cross.norm();
        if (cross_norm <= 1e-12 * u.norm() * v.norm() || cross_norm == 0.0) continue;

        Plane plane;
        plane.normal = cross / cross_norm;
        plane.offset = -plane.normal.dot(a);

        std::size_t count = 0;
        double residual_sum = 0.0;
        for (const Vec3 &p : points) {
            const double r = std::abs(plane.signed_distance(p));
            if (r <= threshold) {
                ++count;
                residual_sum += r;
            }
        }
        if (count == 0) continue;
        const double mean_residual = residual_sum / static_cast<double>(count);
        if (!have_candidate || count > best_count ||
            (count == best_count && mean_residual < best_mean_residual)) {
            have_candidate = true;
            best_count = count;
            best_mean_residual = mean_residual;
            best_plane = plane;
        }
    }
    if (!have_candidate)
        throw DegenerateGeometryError("ransac_plane: every sampled triple was collinear");

    std::vector<std::uint32_t> inliers;
    for (std::uint32_t i = 0; i < n; ++i)
        if (std::abs(best_plane.signed_distance(points[i])) <= threshold) inliers.push_back(i);

    const Plane refit = fit_plane_least_squares(points, inliers);
    std::vector<std::uint32_t> final_inliers;
    for (std::uint32_t i = 0; i < n; ++i)
        if (std::abs(refit.signed_distance(points[i])) <= threshold) final_inliers.push_back(i);
    if (final_inliers.empty()) {
        // The refit drifted outside the band; fall back to the sampled plane.
        canonicalize_sign(best_plane);
        return {best_plane, std::move(inliers)};
    }
    return {refit, std::move(final_inliers)};
}

GroundResult detect_ground(const FusedCloud &cloud, const PresegConfig &config) {
    config.validate();
    if (cloud.size() == 0) throw std::invalid_argument("detect_ground: empty cloud");

    std::map<std::pair<long, long>, std::vector<std::uint32_t>> cells;
    for (std::uint32_t i = 0; i < cloud.size(); ++i) {
        const long cx = static_cast<long>(std::floor(cloud.points[i].x() / config.cell_size));
        const long cy = static_cast<long>(std::floor(cloud.points[i].y() / config.cell_size));
        cells[{cx, cy}].push_back(i);
    }

    struct CellOutcome {
        bool accepted = false;
        Plane plane;
        std::vector<std::uint32_t> inlier_ids;  // cloud ids
    };
    std::vector<std::pair<long, long>> cell_keys;
    std::vector<const std::vector<std::uint32_t> *> cell_points;
    cell_keys.reserve(cells.size());
    for (const auto &[key, ids] : cells) {
        cell_keys.push_back(key);
        cell_points.push_back(&ids);
    }

    const double cos_gate = std::cos(kGroundNormalMaxAngleDeg * std::numbers::pi / 180.0);
    std::vector<CellOutcome> outcomes(cell_keys.size());
    parallel_for(cell_keys.size(), [&](std::size_t c) {
        std::vector<std::uint32_t> ids = *cell_points[c];
        if (ids.size() < 3) return;
        // Coordinate order, not input order, feeds the sampler: the fitted
        // plane then survives any permutation of the cloud.
        std::sort(ids.begin(), ids.end(), [&](std::uint32_t a, std::uint32_t b) {
            const Vec3 &pa = cloud.points[a], &pb = cloud.points[b];
            if (pa.x() != pb.x()) return pa.x() < pb.x();
            if (pa.y() != pb.y()) return pa.y() < pb.y();
            return pa.z() < pb.z();
        });
        std::vector<Vec3> local;
        local.reserve(ids.size());
        for (std::uint32_t id : ids) local.push_back(cloud.points[id]);
        const std::uint64_t cell_seed =
            mix_seed(config.rng_seed, static_cast<std::uint64_t>(cell_keys[c].first),
                     static_cast<std::uint64_t>(cell_keys[c].second));
        RansacPlaneResult fit;
        try {
            fit = ransac_plane(local, config.ransac_threshold, config.ransac_iterations, cell_seed);
        } catch (const DegenerateGeometryError &) {
            return;
        }
        if (std::abs(fit.plane.normal.z()) < cos_gate) return;
        if (fit.inliers.size() < static_cast<std::size_t>(kMinGroundInliers)) return;
        CellOutcome &out = outcomes[c];
        out.accepted = true;
        out.plane = fit.plane;
        out.inlier_ids.reserve(fit.inliers.size());
        for (std::uint32_t local_id : fit.inliers) out.inlier_ids.push_back(ids[local_id]);
    });

    GroundResult result;
    std::vector<bool> is_ground(cloud.size(), false);
    for (std::size_t c = 0; c < cell_keys.size(); ++c) {
        if (!outcomes[c].accepted) continue;
        Component comp;
        comp.kind = Component::Kind::Ground;
        comp.cell_x = cell_keys[c].first;
        comp.cell_y = cell_keys[c].second;
        comp.plane = outcomes[c].plane;
        comp.point_ids = std::move(outcomes[c].inlier_ids);
        std::sort(comp.point_ids.begin(), comp.point_ids.end());
        for (std::uint32_t id : comp.point_ids) is_ground[id] = true;
        result.ground.push_back(std::move(comp));
    }
    for (std::uint32_t i = 0; i < cloud.size(); ++i)
        if (!is_ground[i]) result.nonground_ids.push_back(i);
    return result;
}

std::vector<Component> connected_components(const FusedCloud &cloud,
                                            std::span<const std::uint32_t> active_ids,
                                            const PresegConfig &config) {
    config.validate();
    if (cloud.range.size() != cloud.points.size())
        throw std::invalid_argument("connected_components: cloud has no ranges");
    const std::size_t m = active_ids.size();
    if (m == 0) return {};

    double tau_max = 0.0;
    for (std::uint32_t id : active_ids) tau_max = std::max(tau_max, cloud.range[id] * config.d);

    // Cell pitch tau_max makes the 27-cell neighborhood a superset of every
    // candidate pair, so the per-pair check below stays exact.
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> grid;  // values: dense ids
    std::vector<std::array<std::int64_t, 3>> cell_of(m);
    const double pitch = tau_max > 0.0 ? tau_max : 1.0;
    auto cell_coord = [&](double v) { return static_cast<std::int64_t>(std::floor(v / pitch)); };
    auto pack = [](std::int64_t x, std::int64_t y, std::int64_t z) {
        const std::uint64_t bias = 1u << 20;
        return ((static_cast<std::uint64_t>(x) + bias) & 0x1FFFFF) |
               (((static_cast<std::uint64_t>(y) + bias) & 0x1FFFFF) << 21) |
               (((static_cast<std::uint64_t>(z) + bias) & 0x1FFFFF) << 42);
    };
    for (std::size_t k = 0; k < m; ++k) {
        const Vec3 &p = cloud.points[active_ids[k]];
        cell_of[k] = {cell_coord(p.x()), cell_coord(p.y()), cell_coord(p.z())};
        grid[pack(cell_of[k][0], cell_of[k][1], cell_of[k][2])].push_back(
            static_cast<std::uint32_t>(k));
    }

    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> edge_shards;
    {
        const std::size_t shard_count = std::max<std::size_t>(1, max_threads());
        edge_shards.resize(shard_count);
        const std::size_t chunk = (m + shard_count - 1) / shard_count;
        parallel_for(shard_count, [&](std::size_t s) {
            const std::size_t lo = s * chunk;
            const std::size_t hi = std::min(m, lo + chunk);
            auto &edges = edge_shards[s];
            for (std::size_t k = lo; k < hi; ++k) {
                const std::uint32_t u = active_ids[k];
                const Vec3 &pu = cloud.points[u];
                const double ru = cloud.range[u];
                for (std::int64_t dz = -1; dz <= 1; ++dz)
                    for (std::int64_t dy = -1; dy <= 1; ++dy)
                        for (std::int64_t dx = -1; dx <= 1; ++dx) {
                            auto it = grid.find(pack(cell_of[k][0] + dx, cell_of[k][1] + dy,
                                                     cell_of[k][2] + dz));
                            if (it == grid.end()) continue;
                            for (std::uint32_t j : it->second) {
                                if (j <= k) continue;  // each unordered pair once
                                const std::uint32_t v = active_ids[j];
                                const double tau =
                                    std::max(ru, cloud.range[v]) * config.d;
                                if ((pu - cloud.points[v]).norm() < tau)
                                    edges.emplace_back(static_cast<std::uint32_t>(k), j);
                            }
                        }
            }
        });
    }

    UnionFind uf(m);
    for (const auto &shard : edge_shards)
        for (const auto &[a, b] : shard) uf.unite(a, b);

    std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> groups;
    for (std::size_t k = 0; k < m; ++k)
        groups[uf.find(static_cast<std::uint32_t>(k))].push_back(active_ids[k]);

    std::vector<Component> components;
    components.reserve(groups.size());
    for (auto &[root, ids] : groups) {
        Component comp;
        comp.kind = Component::Kind::Object;
        std::sort(ids.begin(), ids.end());
        comp.point_ids = std::move(ids);
        components.push_back(std::move(comp));
    }
    return order_by_smallest_id(std::move(components));
}

std::vector<Component> subdivide_components(const FusedCloud &cloud,
                                            std::vector<Component> components,
                                            const PresegConfig &config) {
    config.validate();
    const double pitch = config.max_component_extent;
    std::vector<Component> out;
    for (Component &comp : components) {
        if (comp.kind == Component::Kind::Ground) {
            out.push_back(std::move(comp));
            continue;
        }
        double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
        double min_y = min_x, max_y = max_x;
        for (std::uint32_t id : comp.point_ids) {
            min_x = std::min(min_x, cloud.points[id].x());
            max_x = std::max(max_x, cloud.points[id].x());
            min_y = std::min(min_y, cloud.points[id].y());
            max_y = std::max(max_y, cloud.points[id].y());
        }
        if (max_x - min_x <= pitch && max_y - min_y <= pitch) {
            out.push_back(std::move(comp));
            continue;
        }
        std::map<std::pair<long, long>, std::vector<std::uint32_t>> pieces;
        for (std::uint32_t id : comp.point_ids) {
            const long gx = static_cast<long>(std::floor(cloud.points[id].x() / pitch));
            const long gy = static_cast<long>(std::floor(cloud.points[id].y() / pitch));
            pieces[{gx, gy}].push_back(id);
        }
        for (auto &[key, ids] : pieces) {
            Component piece;
            piece.kind = Component::Kind::Object;
            piece.point_ids = std::move(ids);  // already ascending: parent ids were
            out.push_back(std::move(piece));
        }
    }
    return order_by_smallest_id(std::move(out));
}

FilterResult filter_small(std::vector<Component> components, const PresegConfig &config) {
    config.validate();
    FilterResult result;
    for (Component &comp : components) {
        if (comp.point_ids.size() > static_cast<std::size_t>(config.min_component_points))
            result.kept.push_back(std::move(comp));
        else
            result.ignored_ids.insert(result.ignored_ids.end(), comp.point_ids.begin(),
                                      comp.point_ids.end());
    }
    std::sort(result.ignored_ids.begin(), result.ignored_ids.end());
    return result;
}

PresegResult presegment(const FusedCloud &cloud, const PresegConfig &config) {
    config.validate();
    GroundResult ground = detect_ground(cloud, config);
    std::vector<Component> components =
        connected_components(cloud, ground.nonground_ids, config);
    for (Component &g : ground.ground) components.push_back(std::move(g));
    components = subdivide_components(cloud, std::move(components), config);
    FilterResult filtered = filter_small(std::move(components), config);

    PresegResult result;
    result.config = config;
    result.components = order_by_smallest_id(std::move(filtered.kept));
    result.ignored_ids = std::move(filtered.ignored_ids);
    result.component_of.assign(cloud.size(), kNoComponent);
    for (std::uint32_t c = 0; c < result.components.size(); ++c)
        for (std::uint32_t id : result.components[c].point_ids) result.component_of[id] = c;
    return result;
}

void save_preseg(const std::filesystem::path &dir, const PresegResult &result,
                 const FusedCloud &cloud) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "components.bin", std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / "components.bin").string());
        out.write(reinterpret_cast<const char *>(result.component_of.data()),
                  static_cast<std::streamsize>(result.component_of.size() * sizeof(std::uint32_t)));
    }
    nlohmann::json j;
    to_json(j["config"], result.config);
    j["num_points"] = result.component_of.size();
    j["num_ignored"] = result.ignored_ids.size();
    nlohmann::json comps = nlohmann::json::array();
    for (const Component &comp : result.components) {
        Vec3 lo(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity());
        Vec3 hi = -lo;
        for (std::uint32_t id : comp.point_ids) {
            lo = lo.cwiseMin(cloud.points[id]);
            hi = hi.cwiseMax(cloud.points[id]);
        }
        nlohmann::json jc = {
            {"kind", comp.kind == Component::Kind::Ground ? "ground" : "object"},
            {"count", comp.point_ids.size()},
            {"bbox", {lo.x(), lo.y(), lo.z(), hi.x(), hi.y(), hi.z()}}};
        if (comp.kind == Component::Kind::Ground) {
            jc["cell"] = {comp.cell_x, comp.cell_y};
            jc["plane"] = {comp.plane.normal.x(), comp.plane.normal.y(), comp.plane.normal.z(),
                           comp.plane.offset};
        }
        comps.push_back(std::move(jc));
    }
    j["components"] = std::move(comps);
    std::ofstream out(dir / "manifest.json");
    if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
    out << j.dump(2) << "\n";
}

PresegResult load_preseg(const std::filesystem::path &dir) {
    nlohmann::json j;
    {
        std::ifstream in(dir / "manifest.json");
        if (!in) throw DataError("cannot read " + (dir / "manifest.json").string());
        in >> j;
    }
    PresegResult result;
    from_json(j.at("config"), result.config);
    const std::size_t n = j.at("num_points").get<std::size_t>();

    std::ifstream in(dir / "components.bin", std::ios::binary);
    if (!in) throw DataError("cannot read " + (dir / "components.bin").string());
    result.component_of.resize(n);
    in.read(reinterpret_cast<char *>(result.component_of.data()),
            static_cast<std::streamsize>(n * sizeof(std::uint32_t)));
    if (static_cast<std::size_t>(in.gcount()) != n * sizeof(std::uint32_t))
        throw FormatError((dir / "components.bin").string() + ": truncated at byte " +
                          std::to_string(in.gcount()));
    if (in.peek() != std::ifstream::traits_type::eof())
        throw FormatError((dir / "components.bin").string() + ": trailing bytes after point " +
                          std::to_string(n));

    const nlohmann::json &comps = j.at("components");
    result.components.resize(comps.size());
    for (std::size_t c = 0; c < comps.size(); ++c) {
        Component &comp = result.components[c];
        comp.kind = comps[c].at("kind").get<std::string>() == "ground" ? Component::Kind::Ground
                                                                       : Component::Kind::Object;
        if (comps[c].contains("cell")) {
            comp.cell_x = comps[c]["cell"][0].get<long>();
            comp.cell_y = comps[c]["cell"][1].get<long>();
        }
        if (comps[c].contains("plane")) {
            comp.plane.normal = Vec3(comps[c]["plane"][0].get<double>(),
                                     comps[c]["plane"][1].get<double>(),
                                     comps[c]["plane"][2].get<double>());
            comp.plane.offset = comps[c]["plane"][3].get<double>();
        }
    }
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t c = result.component_of[i];
        if (c == kNoComponent) {
            result.ignored_ids.push_back(i);
            continue;
        }
        if (c >= result.components.size())
            throw ConsistencyError("components.bin references component " + std::to_string(c) +
                                   " but the manifest lists " +
                                   std::to_string(result.components.size()));
        result.components[c].point_ids.push_back(i);
    }
    for (std::size_t c = 0; c < result.components.size(); ++c) {
        if (result.components[c].point_ids.empty())
            throw ConsistencyError("manifest component " + std::to_string(c) +
                                   " has no points in components.bin");
        if (result.components[c].point_ids.size() != comps[c].at("count").get<std::size_t>())
            throw ConsistencyError("component " + std::to_string(c) +
                                   " count mismatch between manifest and components.bin");
    }
    return result;
}

void to_json(nlohmann::json &j, const PresegConfig &config) {
    j = nlohmann::json{{"cell_size", config.cell_size},
                       {"ransac_threshold", config.ransac_threshold},
                       {"ransac_iterations", config.ransac_iterations},
                       {"d", config.d},
                       {"max_component_extent", config.max_component_extent},
                       {"min_component_points", config.min_component_points},
                       {"rng_seed", config.rng_seed}};
}

void from_json(const nlohmann::json &j, PresegConfig &config) {
    config = PresegConfig{};
    j.at("cell_size").get_to(config.cell_size);
    j.at("ransac_threshold").get_to(config.ransac_threshold);
    j.at("ransac_iterations").get_to(config.ransac_iterations);
    j.at("d").get_to(config.d);
    j.at("max_component_extent").get_to(config.max_component_extent);
    j.at("min_component_points").get_to(config.min_component_points);
    j.at("rng_seed").get_to(config.rng_seed);
}

void write_ply(const std::filesystem::path &path, const FusedCloud &cloud,
               std::span<const std::uint32_t> color_ids) {
    if (color_ids.size() != cloud.size())
        throw std::invalid_argument("write_ply: one color id per point required");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << cloud.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        << "end_header\n";
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const float xyz[3] = {static_cast<float>(cloud.points[i].x()),
                              static_cast<float>(cloud.points[i].y()),
                              static_cast<float>(cloud.points[i].z())};
        std::uint8_t rgb[3] = {128, 128, 128};
        if (color_ids[i] != kNoComponent) {
            // Golden-ratio hue walk gives distinguishable colors for small ids.
            const double hue = std::fmod(0.61803398875 * color_ids[i], 1.0) * 6.0;
            const int sextant = static_cast<int>(hue);
            const double f = hue - sextant;
            const double q = 1.0 - f;
            double r = 0, g = 0, b = 0;
            switch (sextant % 6) {
                case 0: r = 1; g = f; break;
                case 1: r = q; g = 1; break;
                case 2: g = 1; b = f; break;
                case 3: g = q; b = 1; break;
                case 4: r = f; b = 1; break;
                default: r = 1; b = q; break;
            }
            rgb[0] = static_cast<std::uint8_t>(55 + 200 * r);
            rgb[1] = static_cast<std::uint8_t>(55 + 200 * g);
            rgb[2] = static_cast<std::uint8_t>(55 + 200 * b);
        }
        out.write(reinterpret_cast<const char *>(xyz), sizeof(xyz));
        out.write(reinterpret_cast<const char *>(rgb), sizeof(rgb));
    }
}

} // namespace lidarseg
