#pragma once

#include "lidarseg/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace lidarseg {

struct PresegConfig {
    double cell_size = 5.0;            // xy grid pitch for per-cell ground fitting
    double ransac_threshold = 0.2;     // inlier band half-width in meters
    int ransac_iterations = 200;
    double d = 0.01;                   // adaptive radius coefficient: tau_i = d * range_i
    double max_component_extent = 2.0; // object components larger than this get split
    int min_component_points = 100;    // components must exceed this to survive
    std::uint64_t rng_seed = 0;

    void validate() const;
};

/// Plane n·x + c = 0 with unit normal. Sign is canonical: n.z > 0, ties
/// resolved by n.y then n.x.
struct Plane {
    Vec3 normal = Vec3::UnitZ();
    double offset = 0.0;

    double signed_distance(const Vec3 &p) const { return normal.dot(p) + offset; }
};

struct Component {
    enum class Kind { Ground, Object };
    Kind kind = Kind::Object;
    std::vector<std::uint32_t> point_ids;  // ascending
    // Ground components remember their grid cell and fitted plane.
    long cell_x = 0, cell_y = 0;
    Plane plane;
};

struct RansacPlaneResult {
    Plane plane;
    std::vector<std::uint32_t> inliers;  // indices into the input span, ascending
};

/// Fits a plane by repeated 3-point sampling. The winning iteration has the
/// most inliers; ties fall to lower mean absolute residual, then to the
/// earlier iteration. The winner is refit by least squares over its inliers
/// and the inlier set is recomputed against the refit plane, so the returned
/// inliers satisfy |n·x + c| <= threshold against the returned plane.
/// Throws DegenerateGeometryError when fewer than 3 points are given or
/// every sampled triple is collinear.
RansacPlaneResult ransac_plane(std::span<const Vec3> points, double threshold, int iterations,
                               std::uint64_t seed);

struct GroundResult {
    std::vector<Component> ground;            // one per accepted cell, in (cell_x, cell_y) order
    std::vector<std::uint32_t> nonground_ids; // ascending; disjoint from ground ids
};

/// Per-cell RANSAC ground detection on a uniform xy grid anchored at the
/// origin. A cell's plane is accepted only when its normal is within 30° of
/// vertical and it has at least 3 inliers; otherwise the whole cell is routed
/// to the object stage. Deterministic: each cell draws from a seed derived
/// from (rng_seed, cell_x, cell_y), so thread scheduling cannot change the
/// result.
GroundResult detect_ground(const FusedCloud &cloud, const PresegConfig &config);

/// Groups `active_ids` into connected components of the graph with an edge
/// between u and v iff ‖u−v‖ < max(range_u, range_v)·d (strict). Components
/// come back with ascending point ids, ordered by smallest id.
std::vector<Component> connected_components(const FusedCloud &cloud,
                                            std::span<const std::uint32_t> active_ids,
                                            const PresegConfig &config);

/// Splits object components whose xy bounding box exceeds
/// max_component_extent on either side by snapping points to a global xy grid
/// of that pitch. Components already within the bound pass through unchanged
/// even when they straddle a grid line. Ground components are never split.
std::vector<Component> subdivide_components(const FusedCloud &cloud,
                                            std::vector<Component> components,
                                            const PresegConfig &config);

struct FilterResult {
    std::vector<Component> kept;
    std::vector<std::uint32_t> ignored_ids;  // ascending
};

/// Keeps components with strictly more than min_component_points points; the
/// rest contribute their ids to the ignored set.
FilterResult filter_small(std::vector<Component> components, const PresegConfig &config);

struct PresegResult {
    std::vector<Component> components;        // kept, ordered by smallest point id
    std::vector<std::uint32_t> ignored_ids;   // ascending
    std::vector<std::uint32_t> component_of;  // per point; kNoComponent when ignored
    PresegConfig config;

    std::size_t num_points() const { return component_of.size(); }
};

/// Ground detection, object connected components, subdivision and small-
/// component filtering in sequence. Every point ends up in exactly one kept
/// component or in the ignored set.
PresegResult presegment(const FusedCloud &cloud, const PresegConfig &config);

/// components.bin (little-endian uint32 per point, 0xFFFFFFFF = ignored) plus
/// manifest.json with the config and per-component kind, count and bounds.
void save_preseg(const std::filesystem::path &dir, const PresegResult &result,
                 const FusedCloud &cloud);
PresegResult load_preseg(const std::filesystem::path &dir);

void to_json(nlohmann::json &j, const PresegConfig &config);
void from_json(const nlohmann::json &j, PresegConfig &config);

/// Binary PLY with one color id per point (stable palette, 0xFFFFFFFF gray).
void write_ply(const std::filesystem::path &path, const FusedCloud &cloud,
               std::span<const std::uint32_t> color_ids);

} // namespace lidarseg
