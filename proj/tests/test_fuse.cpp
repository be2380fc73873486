#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lidarseg/fuse.hpp"
#include "lidarseg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace lidarseg;

namespace {

Scan make_scan(std::uint64_t seed, std::size_t n, int scan_index) {
    Rng rng(seed);
    Scan scan;
    scan.scan_index = scan_index;
    scan.points.resize(n);
    scan.intensity.assign(n, 0.5f);
    scan.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        scan.points[i] = Eigen::Vector3f(static_cast<float>(uniform_double(rng, -20, 20)),
                                         static_cast<float>(uniform_double(rng, -20, 20)),
                                         static_cast<float>(uniform_double(rng, -2, 2)));
        scan.labels[i] = static_cast<std::uint16_t>(uniform_index(rng, 6));
    }
    return scan;
}

Pose translation_pose(double x, double y) {
    Pose p;
    p.translation = Vec3(x, y, 0.0);
    return p;
}

} // namespace

TEST_CASE("ranges are sensor-frame distances, not world distances") {
    Scan scan;
    scan.scan_index = 0;
    scan.points = {Eigen::Vector3f(3, 4, 0)};  // 5 m from its own sensor
    scan.intensity = {0.f};
    const Pose pose = translation_pose(100.0, 0.0);
    const FusedCloud fused = fuse_scans(std::span(&scan, 1), std::span(&pose, 1));
    CHECK(fused.range[0] == doctest::Approx(5.0));
    CHECK(fused.points[0].x() == doctest::Approx(103.0));
    CHECK(fused.points[0].norm() > 100.0);
}

TEST_CASE("poses rotate before translating") {
    Scan scan;
    scan.scan_index = 0;
    scan.points = {Eigen::Vector3f(1, 0, 0)};
    scan.intensity = {0.f};
    Pose pose;
    pose.rotation << 0, -1, 0, 1, 0, 0, 0, 0, 1;  // +90 degrees about z
    pose.translation = Vec3(10, 0, 0);
    const FusedCloud fused = fuse_scans(std::span(&scan, 1), std::span(&pose, 1));
    CHECK((fused.points[0] - Vec3(10, 1, 0)).norm() < 1e-12);
}

TEST_CASE("five scans get window-centered time offsets") {
    std::vector<Scan> scans;
    std::vector<Pose> poses;
    for (int k = 0; k < 5; ++k) {
        scans.push_back(make_scan(100 + static_cast<std::uint64_t>(k), 3, k));
        poses.push_back(translation_pose(k * 0.8, 0.0));
    }
    const FusedCloud fused = fuse_scans(scans, poses);
    REQUIRE(fused.size() == 15);
    for (std::size_t i = 0; i < fused.size(); ++i) {
        CHECK(fused.time_offset[i] == static_cast<std::int32_t>(i / 3) - 2);
        CHECK(fused.scan_index[i] == i / 3);
    }
    CHECK(fused.has_gt());
    CHECK(fused.gt_label.size() == fused.size());
}

TEST_CASE("windows cover every scan and keep a short tail") {
    std::vector<Scan> scans;
    std::vector<Pose> poses;
    for (int k = 0; k < 7; ++k) {
        scans.push_back(make_scan(200 + static_cast<std::uint64_t>(k), 4, k));
        poses.push_back(translation_pose(k * 1.0, 0.0));
    }
    const std::vector<FusedCloud> windows = fuse_windows(scans, poses, 3);
    REQUIRE(windows.size() == 3);
    CHECK(windows[0].size() == 12);
    CHECK(windows[1].size() == 12);
    CHECK(windows[2].size() == 4);  // trailing single scan
    CHECK(windows[2].time_offset[0] == 0);
    std::size_t total = 0;
    for (const auto &w : windows) total += w.size();
    CHECK(total == 28);
}

TEST_CASE("bad fuse inputs throw") {
    std::vector<Scan> scans = {make_scan(1, 3, 0)};
    std::vector<Pose> poses(2);
    CHECK_THROWS_AS(fuse_scans(std::span<const Scan>{}, std::span<const Pose>{}),
                    std::invalid_argument);
    CHECK_THROWS_AS(fuse_scans(scans, poses), std::invalid_argument);
    CHECK_THROWS_AS(fuse_windows(scans, std::span(poses).subspan(0, 1), 0),
                    std::invalid_argument);
}

TEST_CASE("downsampling a 100x100 grid to 2500 lands within 5 percent") {
    FusedCloud cloud;
    for (int x = 0; x < 100; ++x)
        for (int y = 0; y < 100; ++y) cloud.points.push_back(Vec3(x * 0.1, y * 0.1, 0.0));
    const std::size_t n = cloud.points.size();
    cloud.range.assign(n, 1.0);
    cloud.scan_index.assign(n, 0);
    cloud.time_offset.assign(n, 0);

    const VoxelDownsampleResult r = voxel_downsample(cloud, 2500);
    CHECK(r.cloud.size() >= 2375);
    CHECK(r.cloud.size() <= 2625);
    CHECK(r.kept_ids.size() == r.cloud.size());
    CHECK(std::is_sorted(r.kept_ids.begin(), r.kept_ids.end()));
    for (std::size_t i = 0; i < r.kept_ids.size(); ++i)
        CHECK((r.cloud.points[i] - cloud.points[r.kept_ids[i]]).norm() == 0.0);
}

TEST_CASE("downsampling 300k random points to 120k lands within 5 percent") {
    Rng rng(33);
    FusedCloud cloud;
    const std::size_t n = 300000;
    cloud.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        cloud.points.push_back(Vec3(uniform_double(rng, -60, 60), uniform_double(rng, -60, 60),
                                    uniform_double(rng, -3, 3)));
    cloud.range.assign(n, 1.0);
    cloud.scan_index.assign(n, 0);
    cloud.time_offset.assign(n, 0);

    const VoxelDownsampleResult r = voxel_downsample(cloud, 120000);
    CHECK(r.cloud.size() >= 114000);
    CHECK(r.cloud.size() <= 126000);
}

TEST_CASE("clouds at or below the target pass through unchanged") {
    FusedCloud cloud;
    for (int i = 0; i < 50; ++i) cloud.points.push_back(Vec3(i, 0, 0));
    cloud.range.assign(50, 1.0);
    cloud.scan_index.assign(50, 0);
    cloud.time_offset.assign(50, 0);
    const VoxelDownsampleResult r = voxel_downsample(cloud, 50);
    CHECK(r.cloud.size() == 50);
    std::vector<std::uint32_t> identity(50);
    std::iota(identity.begin(), identity.end(), 0u);
    CHECK(r.kept_ids == identity);
}

TEST_CASE("subset keeps every channel aligned") {
    std::vector<Scan> scans = {make_scan(300, 20, 0), make_scan(301, 20, 1)};
    std::vector<Pose> poses = {translation_pose(0, 0), translation_pose(1, 0)};
    const FusedCloud fused = fuse_scans(scans, poses);
    const std::vector<std::uint32_t> ids = {1, 5, 21, 39};
    const FusedCloud sub = subset_cloud(fused, ids);
    REQUIRE(sub.size() == ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        CHECK(sub.points[i] == fused.points[ids[i]]);
        CHECK(sub.range[i] == fused.range[ids[i]]);
        CHECK(sub.scan_index[i] == fused.scan_index[ids[i]]);
        CHECK(sub.time_offset[i] == fused.time_offset[ids[i]]);
        CHECK(sub.gt_label[i] == fused.gt_label[ids[i]]);
    }
}
