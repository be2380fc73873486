#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lidarseg/errors.hpp"
#include "lidarseg/preseg.hpp"
#include "lidarseg/rng.hpp"
#include "lidarseg/synthetic.hpp"
#include "lidarseg/fuse.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <vector>

using namespace lidarseg;

namespace {

FusedCloud cloud_from(std::vector<Vec3> points, std::vector<double> range = {}) {
    FusedCloud cloud;
    cloud.points = std::move(points);
    const std::size_t n = cloud.points.size();
    if (range.empty()) {
        cloud.range.resize(n);
        for (std::size_t i = 0; i < n; ++i) cloud.range[i] = cloud.points[i].norm();
    } else {
        cloud.range = std::move(range);
    }
    cloud.scan_index.assign(n, 0);
    cloud.time_offset.assign(n, 0);
    return cloud;
}

std::vector<std::uint32_t> all_ids(std::size_t n) {
    std::vector<std::uint32_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0u);
    return ids;
}

std::vector<std::vector<std::uint32_t>> canonical(const std::vector<Component> &comps) {
    std::vector<std::vector<std::uint32_t>> groups;
    for (const Component &c : comps) groups.push_back(c.point_ids);
    for (auto &g : groups) std::sort(g.begin(), g.end());
    std::sort(groups.begin(), groups.end(),
              [](const auto &a, const auto &b) { return a.front() < b.front(); });
    return groups;
}

struct Dsu {
    std::vector<std::uint32_t> parent;
    explicit Dsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
    std::uint32_t find(std::uint32_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::uint32_t a, std::uint32_t b) { parent[find(a)] = find(b); }
};

} // namespace

TEST_CASE("ransac recovers a clean plane exactly") {
    Rng rng(21);
    const Vec3 n = Vec3(0.3, 0.1, 1.0).normalized();
    const double c = -2.0;
    std::vector<Vec3> pts;
    for (int i = 0; i < 60; ++i) {
        Vec3 p(uniform_double(rng, -5, 5), uniform_double(rng, -5, 5), 0.0);
        p.z() = (-c - n.x() * p.x() - n.y() * p.y()) / n.z();
        pts.push_back(p);
    }
    const RansacPlaneResult r = ransac_plane(pts, 0.05, 100, 7);
    CHECK(r.inliers.size() == pts.size());
    CHECK(std::abs(r.plane.normal.dot(n)) > 1.0 - 1e-9);
    for (const Vec3 &p : pts) CHECK(std::abs(r.plane.signed_distance(p)) < 1e-9);
    CHECK(r.plane.normal.z() > 0.0);  // canonical orientation
}

TEST_CASE("ransac shrugs off 30 percent outliers") {
    Rng rng(22);
    std::vector<Vec3> pts;
    for (int i = 0; i < 70; ++i)
        pts.push_back(Vec3(uniform_double(rng, -5, 5), uniform_double(rng, -5, 5),
                           uniform_double(rng, -0.01, 0.01)));
    for (int i = 0; i < 30; ++i)
        pts.push_back(Vec3(uniform_double(rng, -5, 5), uniform_double(rng, -5, 5),
                           uniform_double(rng, 1.0, 6.0)));
    const RansacPlaneResult r = ransac_plane(pts, 0.05, 200, 7);
    CHECK(r.inliers.size() == 70);
    for (const std::uint32_t id : r.inliers) CHECK(id < 70);
    CHECK(std::abs(r.plane.normal.z()) > 0.999);
    CHECK(std::is_sorted(r.inliers.begin(), r.inliers.end()));
}

TEST_CASE("ransac is deterministic in its seed") {
    Rng rng(23);
    std::vector<Vec3> pts;
    for (int i = 0; i < 50; ++i)
        pts.push_back(Vec3(uniform_double(rng, -5, 5), uniform_double(rng, -5, 5),
                           uniform_double(rng, -0.5, 0.5)));
    const RansacPlaneResult a = ransac_plane(pts, 0.1, 50, 13);
    const RansacPlaneResult b = ransac_plane(pts, 0.1, 50, 13);
    CHECK(a.inliers == b.inliers);
    CHECK(a.plane.normal == b.plane.normal);
    CHECK(a.plane.offset == b.plane.offset);
}

TEST_CASE("degenerate inputs raise DegenerateGeometryError") {
    const std::vector<Vec3> two = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
    CHECK_THROWS_AS(ransac_plane(two, 0.1, 10, 1), DegenerateGeometryError);
    std::vector<Vec3> line;
    for (int i = 0; i < 20; ++i) line.push_back(Vec3(i * 0.1, 2 * i * 0.1, 3 * i * 0.1));
    CHECK_THROWS_AS(ransac_plane(line, 0.1, 50, 1), DegenerateGeometryError);
}

TEST_CASE("connection threshold uses the larger range, strictly") {
    // Stored ranges are deliberately decoupled from the coordinates: the
    // radius rule must read the range channel, not recompute norms.
    PresegConfig cfg;
    cfg.d = 0.01;
    {
        FusedCloud cloud =
            cloud_from({Vec3(0, 0, 0), Vec3(0.15, 0, 0)}, {10.0, 20.0});  // tau = 0.2
        const auto comps = connected_components(cloud, all_ids(2), cfg);
        CHECK(comps.size() == 1);
    }
    {
        FusedCloud cloud = cloud_from({Vec3(0, 0, 0), Vec3(0.25, 0, 0)}, {10.0, 20.0});
        const auto comps = connected_components(cloud, all_ids(2), cfg);
        CHECK(comps.size() == 2);
    }
    {
        // exactly at the threshold: strict comparison keeps them apart
        FusedCloud cloud = cloud_from({Vec3(0, 0, 0), Vec3(0.2, 0, 0)}, {10.0, 20.0});
        const auto comps = connected_components(cloud, all_ids(2), cfg);
        CHECK(comps.size() == 2);
    }
}

TEST_CASE("components match a brute-force union-find") {
    Rng rng(25);
    PresegConfig cfg;
    for (int t = 0; t < 25; ++t) {
        const std::size_t n = 20 + uniform_index(rng, 180);
        cfg.d = uniform_double(rng, 0.01, 0.06);
        std::vector<Vec3> pts;
        for (std::size_t i = 0; i < n; ++i)
            pts.push_back(Vec3(uniform_double(rng, -15, 15), uniform_double(rng, -15, 15),
                               uniform_double(rng, -2, 2)));
        FusedCloud cloud = cloud_from(std::move(pts));
        const auto comps = connected_components(cloud, all_ids(n), cfg);

        Dsu dsu(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double tau = std::max(cloud.range[i], cloud.range[j]) * cfg.d;
                if ((cloud.points[i] - cloud.points[j]).norm() < tau)
                    dsu.unite(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
            }
        std::map<std::uint32_t, std::vector<std::uint32_t>> by_root;
        for (std::uint32_t i = 0; i < n; ++i) by_root[dsu.find(i)].push_back(i);
        std::vector<std::vector<std::uint32_t>> expect;
        for (auto &[root, ids] : by_root) expect.push_back(std::move(ids));
        std::sort(expect.begin(), expect.end(),
                  [](const auto &a, const auto &b) { return a.front() < b.front(); });

        CHECK(canonical(comps) == expect);

        // active-id order must not matter
        std::vector<std::uint32_t> shuffled = all_ids(n);
        shuffle(shuffled, rng);
        std::sort(shuffled.begin(), shuffled.end());  // contract: ascending input
        const auto again = connected_components(cloud, shuffled, cfg);
        CHECK(canonical(again) == expect);
    }
}

TEST_CASE("components come back ordered with ascending ids") {
    FusedCloud cloud = cloud_from({Vec3(10, 0, 0), Vec3(0, 10, 0), Vec3(10.05, 0, 0)});
    PresegConfig cfg;
    cfg.d = 0.02;  // tau about 0.2 at range 10
    const auto comps = connected_components(cloud, all_ids(3), cfg);
    REQUIRE(comps.size() == 2);
    CHECK(comps[0].point_ids == std::vector<std::uint32_t>{0, 2});
    CHECK(comps[1].point_ids == std::vector<std::uint32_t>{1});
    for (const Component &c : comps) CHECK(c.kind == Component::Kind::Object);
}

TEST_CASE("oversized object components split on the snap grid") {
    // A 5 m line of points: subdivision snaps to 2 m cells [0,2) [2,4) [4,6).
    std::vector<Vec3> pts;
    for (int i = 0; i < 50; ++i) pts.push_back(Vec3(0.05 + i * 0.1, 0.0, 1.0));
    FusedCloud cloud = cloud_from(std::move(pts), std::vector<double>(50, 30.0));

    Component comp;
    comp.kind = Component::Kind::Object;
    comp.point_ids = all_ids(50);
    PresegConfig cfg;

    const auto split = subdivide_components(cloud, {comp}, cfg);
    REQUIRE(split.size() == 3);
    for (const Component &c : split) {
        double lo = 1e9, hi = -1e9;
        for (const std::uint32_t id : c.point_ids) {
            lo = std::min(lo, cloud.points[id].x());
            hi = std::max(hi, cloud.points[id].x());
        }
        CHECK(hi - lo <= cfg.max_component_extent);
        CHECK(std::floor(lo / 2.0) == std::floor((hi - 1e-12) / 2.0));  // one cell
        CHECK(std::is_sorted(c.point_ids.begin(), c.point_ids.end()));
    }

    // Ground components are left alone no matter their size.
    Component ground = comp;
    ground.kind = Component::Kind::Ground;
    const auto kept = subdivide_components(cloud, {ground}, cfg);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].point_ids.size() == 50);
}

TEST_CASE("compact components pass subdivision even across a grid line") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 20; ++i) pts.push_back(Vec3(1.6 + i * 0.04, 0.0, 1.0));  // 1.6..2.36
    FusedCloud cloud = cloud_from(std::move(pts), std::vector<double>(20, 30.0));
    Component comp;
    comp.kind = Component::Kind::Object;
    comp.point_ids = all_ids(20);
    const auto out = subdivide_components(cloud, {comp}, PresegConfig{});
    REQUIRE(out.size() == 1);
    CHECK(out[0].point_ids.size() == 20);
}

TEST_CASE("small-component filter keeps strictly more than the minimum") {
    PresegConfig cfg;  // min_component_points = 100
    std::vector<Vec3> pts(201, Vec3::Zero());
    FusedCloud cloud = cloud_from(std::move(pts), std::vector<double>(201, 1.0));

    Component exactly, plus_one;
    exactly.point_ids = all_ids(100);
    for (std::uint32_t i = 100; i < 201; ++i) plus_one.point_ids.push_back(i);

    const FilterResult r = filter_small({exactly, plus_one}, cfg);
    REQUIRE(r.kept.size() == 1);
    CHECK(r.kept[0].point_ids.size() == 101);
    CHECK(r.ignored_ids.size() == 100);
    CHECK(std::is_sorted(r.ignored_ids.begin(), r.ignored_ids.end()));
    CHECK(r.ignored_ids.front() == 0);
    CHECK(r.ignored_ids.back() == 99);
}

TEST_CASE("ground detection accepts flat cells and routes slopes to objects") {
    Rng rng(26);
    std::vector<Vec3> pts;
    // flat patch centered in cell (0,0)
    for (int i = 0; i < 150; ++i)
        pts.push_back(Vec3(uniform_double(rng, 0.5, 4.5), uniform_double(rng, 0.5, 4.5),
                           uniform_double(rng, -0.02, 0.02)));
    // near-vertical wall in cell (1,0): normal far from vertical
    for (int i = 0; i < 150; ++i)
        pts.push_back(Vec3(7.0 + uniform_double(rng, -0.02, 0.02), uniform_double(rng, 0.5, 4.5),
                           uniform_double(rng, 0.0, 4.0)));
    FusedCloud cloud = cloud_from(std::move(pts));

    PresegConfig cfg;
    const GroundResult g = detect_ground(cloud, cfg);
    REQUIRE(g.ground.size() == 1);
    CHECK(g.ground[0].kind == Component::Kind::Ground);
    CHECK(g.ground[0].cell_x == 0);
    CHECK(g.ground[0].cell_y == 0);
    CHECK(g.ground[0].point_ids.size() > 100);
    for (const std::uint32_t id : g.ground[0].point_ids) CHECK(id < 150);
    for (const std::uint32_t id : g.nonground_ids) CHECK(id >= 150);

    std::set<std::uint32_t> seen(g.nonground_ids.begin(), g.nonground_ids.end());
    for (const std::uint32_t id : g.ground[0].point_ids) seen.insert(id);
    CHECK(seen.size() == cloud.size());
}

TEST_CASE("presegment partitions every point exactly once") {
    SyntheticSceneSpec spec = default_scene_spec();
    spec.beam.ring_count = 16;
    spec.beam.azimuth_step_deg = 1.2;
    spec.seed = 5;
    const SyntheticSequence seq = generate_synthetic(spec);
    const FusedCloud cloud = fuse_scans(seq.scans, seq.poses);

    PresegConfig cfg;
    cfg.rng_seed = 12;
    const PresegResult r = presegment(cloud, cfg);

    REQUIRE(r.num_points() == cloud.size());
    std::vector<int> seen(cloud.size(), 0);
    for (std::size_t ci = 0; ci < r.components.size(); ++ci) {
        CHECK(r.components[ci].point_ids.size() > static_cast<std::size_t>(cfg.min_component_points));
        for (const std::uint32_t id : r.components[ci].point_ids) {
            ++seen[id];
            CHECK(r.component_of[id] == ci);
        }
    }
    for (const std::uint32_t id : r.ignored_ids) {
        ++seen[id];
        CHECK(r.component_of[id] == kNoComponent);
    }
    for (const int s : seen) CHECK(s == 1);

    // object components respect the extent bound in x and y
    for (const Component &c : r.components) {
        if (c.kind != Component::Kind::Object) continue;
        double lx = 1e18, hx = -1e18, ly = 1e18, hy = -1e18;
        for (const std::uint32_t id : c.point_ids) {
            lx = std::min(lx, cloud.points[id].x());
            hx = std::max(hx, cloud.points[id].x());
            ly = std::min(ly, cloud.points[id].y());
            hy = std::max(hy, cloud.points[id].y());
        }
        CHECK(hx - lx <= cfg.max_component_extent + 1e-9);
        CHECK(hy - ly <= cfg.max_component_extent + 1e-9);
    }

    const PresegResult again = presegment(cloud, cfg);
    CHECK(again.component_of == r.component_of);
    CHECK(again.ignored_ids == r.ignored_ids);
}

TEST_CASE("preseg results round trip through disk") {
    SyntheticSceneSpec spec = default_scene_spec();
    spec.beam.ring_count = 8;
    spec.beam.azimuth_step_deg = 2.4;
    spec.seed = 6;
    const SyntheticSequence seq = generate_synthetic(spec);
    const FusedCloud cloud = fuse_scans(seq.scans, seq.poses);
    const PresegResult r = presegment(cloud, PresegConfig{});

    const std::filesystem::path dir = std::filesystem::temp_directory_path() / "lidarseg_test_preseg";
    std::filesystem::remove_all(dir);
    save_preseg(dir, r, cloud);
    const PresegResult back = load_preseg(dir);
    CHECK(back.component_of == r.component_of);
    CHECK(back.ignored_ids == r.ignored_ids);
    REQUIRE(back.components.size() == r.components.size());
    for (std::size_t i = 0; i < r.components.size(); ++i) {
        CHECK(back.components[i].point_ids == r.components[i].point_ids);
        CHECK(back.components[i].kind == r.components[i].kind);
    }
}
