#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lidarseg/errors.hpp"
#include "lidarseg/fuse.hpp"
#include "lidarseg/kitti_io.hpp"
#include "lidarseg/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <vector>

namespace fs = std::filesystem;
using namespace lidarseg;

namespace {

SyntheticSceneSpec small_spec() {
    SyntheticSceneSpec spec;
    spec.beam.ring_count = 12;
    spec.beam.azimuth_step_deg = 2.0;
    spec.scan_count = 3;
    spec.seed = 99;
    return spec;
}

} // namespace

TEST_CASE("a scene without objects emits only ground classes") {
    SyntheticSceneSpec spec = small_spec();
    const SyntheticSequence seq = generate_synthetic(spec);
    REQUIRE(seq.scans.size() == 3);
    REQUIRE(seq.poses.size() == 3);
    std::size_t points = 0;
    for (const Scan &scan : seq.scans) {
        REQUIRE(scan.labels.size() == scan.size());
        for (const std::uint16_t y : scan.labels)
            CHECK((y == 0 || y == 1 || y == 2));
        points += scan.size();
    }
    CHECK(points > 500);  // the beam pattern must actually hit the ground
}

TEST_CASE("object labels appear only for placed templates") {
    SyntheticSceneSpec spec = small_spec();
    ObjectTemplate box;
    box.shape = ObjectTemplate::Shape::Box;
    box.class_id = 5;
    box.count = 3;
    box.size_min = Vec3(2, 2, 2);
    box.size_max = Vec3(3, 3, 3);
    box.place_radius_min = 6;
    box.place_radius_max = 15;
    spec.objects = {box};

    const SyntheticSequence seq = generate_synthetic(spec);
    std::set<std::uint16_t> seen;
    for (const Scan &scan : seq.scans)
        for (const std::uint16_t y : scan.labels) seen.insert(y);
    for (const std::uint16_t y : seen) CHECK((y <= 2 || y == 5));
    CHECK(seen.count(5) == 1);  // boxes in 6..15 m must catch some rays
}

TEST_CASE("the sensor drives along +x at speed times period") {
    SyntheticSceneSpec spec = small_spec();
    // Flat terrain so the sensor height is exactly the configured offset.
    spec.tile_height_amplitude = 0.0;
    spec.tile_slope_max_deg = 0.0;
    const SyntheticSequence seq = generate_synthetic(spec);
    for (std::size_t k = 0; k + 1 < seq.poses.size(); ++k) {
        const Vec3 step = seq.poses[k + 1].translation - seq.poses[k].translation;
        CHECK(step.x() == doctest::Approx(spec.sensor_speed * spec.scan_period));
        CHECK(step.y() == doctest::Approx(0.0));
    }
    CHECK(seq.poses[0].translation.z() == doctest::Approx(spec.sensor_height));
}

TEST_CASE("generation is deterministic in the seed") {
    const SyntheticSequence a = generate_synthetic(small_spec());
    const SyntheticSequence b = generate_synthetic(small_spec());
    REQUIRE(a.scans.size() == b.scans.size());
    for (std::size_t k = 0; k < a.scans.size(); ++k) {
        REQUIRE(a.scans[k].size() == b.scans[k].size());
        for (std::size_t i = 0; i < a.scans[k].size(); ++i) {
            CHECK(a.scans[k].points[i] == b.scans[k].points[i]);
            CHECK(a.scans[k].labels[i] == b.scans[k].labels[i]);
        }
    }

    SyntheticSceneSpec other = small_spec();
    other.seed = 100;
    const SyntheticSequence c = generate_synthetic(other);
    bool all_equal = a.scans[0].size() == c.scans[0].size();
    if (all_equal)
        for (std::size_t i = 0; i < a.scans[0].size(); ++i)
            all_equal = all_equal && a.scans[0].points[i] == c.scans[0].points[i];
    CHECK_FALSE(all_equal);
}

TEST_CASE("impossible placements raise GenerationError") {
    SyntheticSceneSpec spec = small_spec();
    ObjectTemplate huge;
    huge.shape = ObjectTemplate::Shape::Box;
    huge.class_id = 4;
    huge.count = 60;
    huge.size_min = Vec3(12, 12, 3);
    huge.size_max = Vec3(14, 14, 4);
    huge.place_radius_min = 5;
    huge.place_radius_max = 16;
    spec.objects = {huge};
    spec.min_gap = 8.0;
    spec.max_placement_retries = 50;
    CHECK_THROWS_AS(generate_synthetic(spec), GenerationError);
}

TEST_CASE("default scene covers all eight classes") {
    SyntheticSceneSpec spec = default_scene_spec();
    spec.seed = 3;
    const SyntheticSequence seq = generate_synthetic(spec);
    std::set<std::uint16_t> seen;
    for (const Scan &scan : seq.scans)
        for (const std::uint16_t y : scan.labels) seen.insert(y);
    CHECK(static_cast<int>(seen.size()) == default_scene_num_classes());
    CHECK(*seen.rbegin() == default_scene_num_classes() - 1);
}

TEST_CASE("written sequences load back through the kitti reader") {
    const fs::path dir = fs::temp_directory_path() / "lidarseg_test_synth";
    fs::remove_all(dir);
    const SyntheticSceneSpec spec = small_spec();
    const SyntheticSequence seq = generate_synthetic(spec);
    write_sequence(dir, seq, &spec);

    CHECK(fs::exists(dir / "poses.txt"));
    CHECK(fs::exists(dir / "calib.txt"));
    CHECK(fs::exists(dir / "manifest.json"));

    auto [scans, poses] = load_sequence(dir);
    REQUIRE(scans.size() == seq.scans.size());
    REQUIRE(poses.size() == seq.poses.size());
    for (std::size_t k = 0; k < scans.size(); ++k) {
        REQUIRE(scans[k].size() == seq.scans[k].size());
        for (std::size_t i = 0; i < scans[k].size(); ++i) {
            CHECK(scans[k].points[i] == seq.scans[k].points[i]);
            CHECK(scans[k].labels[i] == seq.scans[k].labels[i]);
        }
    }
    // Whatever calib conjugation happened, fusing must reproduce the same
    // world-frame cloud as the in-memory sequence.
    const FusedCloud direct = fuse_scans(seq.scans, seq.poses);
    const FusedCloud loaded = fuse_scans(scans, poses);
    REQUIRE(direct.size() == loaded.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < direct.size(); ++i)
        worst = std::max(worst, (direct.points[i] - loaded.points[i]).norm());
    CHECK(worst < 1e-9);
}
