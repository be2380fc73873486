#pragma once

#include "lidarseg/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lidarseg {

/// Placement and sizing for one class of scene objects. Boxes get a random
/// yaw; cylinders are vertical (size ranges are radius/_/height).
struct ObjectTemplate {
    enum class Shape { Box, Cylinder };
    Shape shape = Shape::Box;
    std::uint16_t class_id = 0;
    int count = 0;
    Vec3 size_min = Vec3::Zero();
    Vec3 size_max = Vec3::Zero();
    double place_radius_min = 5.0;   // distance from the sensor path
    double place_radius_max = 30.0;
};

/// Concentric-ring LiDAR model: `ring_count` elevation angles swept at a
/// fixed azimuth step. Ground hits thin out with range like a real spinning
/// sensor.
struct BeamModel {
    int ring_count = 32;
    double azimuth_step_deg = 0.6;
    double elevation_min_deg = -28.0;
    double elevation_max_deg = -3.0;
    double max_range = 120.0;
};

struct SyntheticSceneSpec {
    double extent = 40.0;               // scene covers [-extent, extent]² in xy
    double tile_size = 10.0;            // ground tile pitch, origin-anchored
    double tile_height_amplitude = 0.15;
    double tile_slope_max_deg = 3.0;
    std::vector<std::uint16_t> ground_classes = {0, 1, 2};  // banded by |y|
    std::vector<ObjectTemplate> objects;
    double min_gap = 1.0;               // clear space between object footprints
    double object_clearance = 0.0;      // vertical gap between object base and ground
    double sensor_height = 1.8;
    double sensor_speed = 8.0;          // m/s along +x
    double scan_period = 0.1;           // s
    int scan_count = 5;
    BeamModel beam;
    std::uint64_t seed = 0;
    int max_placement_retries = 200;
};

struct SyntheticSequence {
    std::vector<Scan> scans;
    std::vector<Pose> poses;
};

/// Ray-casts the scene described by the spec. Deterministic under the spec's
/// seed; every emitted point carries a ground-truth class. Throws
/// GenerationError when object placement cannot satisfy min_gap within the
/// retry budget.
SyntheticSequence generate_synthetic(const SyntheticSceneSpec &spec);

/// Writes a sequence in the KITTI layout (velodyne/, labels/, poses.txt,
/// calib.txt) plus manifest.json carrying the spec and seed.
void write_sequence(const std::filesystem::path &dir, const SyntheticSequence &seq,
                    const SyntheticSceneSpec *spec = nullptr);

void to_json(nlohmann::json &j, const SyntheticSceneSpec &spec);
void from_json(const nlohmann::json &j, SyntheticSceneSpec &spec);

/// A driving-flavored default population (buildings, cars, poles,
/// pedestrians, bicycles) over road/sidewalk/terrain bands; 8 classes total.
SyntheticSceneSpec default_scene_spec();
int default_scene_num_classes();

} // namespace lidarseg
