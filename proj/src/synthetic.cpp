#include "lidarseg/synthetic.hpp"

#include "lidarseg/errors.hpp"
#include "lidarseg/kitti_io.hpp"
#include "lidarseg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>

namespace lidarseg {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kMinHitDistance = 0.5;  // rays ignore geometry closer than this

/// One ground tile: z = base + gx*(x - cx) + gy*(y - cy) over an axis-aligned
/// square footprint.
struct Tile {
    double x0, y0, x1, y1;
    double cx, cy;
    double base;
    double gx, gy;
    std::uint16_t class_id;

    double height_at(double x, double y) const {
        return base + gx * (x - cx) + gy * (y - cy);
    }
};

struct PlacedObject {
    ObjectTemplate::Shape shape;
    std::uint16_t class_id;
    Vec3 center;      // footprint center at base height
    Vec3 half_size;   // box: half extents; cylinder: (radius, radius, height/2)
    double yaw = 0.0;
    double footprint_radius = 0.0;
};

struct Hit {
    double t;
    std::uint16_t class_id;
};

std::uint16_t band_class(const std::vector<std::uint16_t> &classes, long tile_y, double tile_size) {
    // Bands by distance of the tile's center line from y = 0: the sensor
    // drives on classes[0], flanked by classes[1], then classes.back() beyond.
    double center_abs = std::abs((static_cast<double>(tile_y) + 0.5) * tile_size);
    std::size_t band = static_cast<std::size_t>(center_abs / tile_size);
    if (band >= classes.size()) band = classes.size() - 1;
    return classes[band];
}

std::vector<Tile> build_tiles(const SyntheticSceneSpec &spec, Rng &rng) {
    const double t = spec.tile_size;
    const long lo = static_cast<long>(std::floor(-spec.extent / t));
    const long hi = static_cast<long>(std::ceil(spec.extent / t));
    const double max_grad = std::tan(spec.tile_slope_max_deg * kDegToRad);
    std::vector<Tile> tiles;
    for (long iy = lo; iy < hi; ++iy) {
        for (long ix = lo; ix < hi; ++ix) {
            Tile tile;
            tile.x0 = ix * t;
            tile.y0 = iy * t;
            tile.x1 = tile.x0 + t;
            tile.y1 = tile.y0 + t;
            tile.cx = tile.x0 + 0.5 * t;
            tile.cy = tile.y0 + 0.5 * t;
            tile.base = uniform_double(rng, -spec.tile_height_amplitude, spec.tile_height_amplitude);
            const double angle = uniform_double(rng, 0.0, 2.0 * std::numbers::pi);
            const double grad = uniform_double(rng, 0.0, max_grad);
            tile.gx = grad * std::cos(angle);
            tile.gy = grad * std::sin(angle);
            tile.class_id = band_class(spec.ground_classes, iy, t);
            tiles.push_back(tile);
        }
    }
    return tiles;
}

const Tile *tile_at(const std::vector<Tile> &tiles, double tile_size, long tiles_per_side,
                    long lo, double x, double y) {
    const long jx = static_cast<long>(std::floor(x / tile_size)) - lo;
    const long jy = static_cast<long>(std::floor(y / tile_size)) - lo;
    if (jx < 0 || jy < 0 || jx >= tiles_per_side || jy >= tiles_per_side) return nullptr;
    return &tiles[static_cast<std::size_t>(jy * tiles_per_side + jx)];
}

double segment_distance_xy(const Vec3 &p, const Vec3 &a, const Vec3 &b) {
    const double abx = b.x() - a.x(), aby = b.y() - a.y();
    const double apx = p.x() - a.x(), apy = p.y() - a.y();
    const double len2 = abx * abx + aby * aby;
    double u = len2 > 0.0 ? (apx * abx + apy * aby) / len2 : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    const double dx = apx - u * abx, dy = apy - u * aby;
    return std::sqrt(dx * dx + dy * dy);
}

std::vector<PlacedObject> place_objects(const SyntheticSceneSpec &spec,
                                        const std::vector<Tile> &tiles, long tiles_per_side,
                                        long tile_lo, const Vec3 &path_a, const Vec3 &path_b,
                                        Rng &rng) {
    std::vector<PlacedObject> placed;
    for (const ObjectTemplate &tmpl : spec.objects) {
        for (int k = 0; k < tmpl.count; ++k) {
            bool ok = false;
            for (int attempt = 0; attempt < spec.max_placement_retries && !ok; ++attempt) {
                PlacedObject obj;
                obj.shape = tmpl.shape;
                obj.class_id = tmpl.class_id;
                for (int a = 0; a < 3; ++a)
                    obj.half_size[a] = 0.5 * uniform_double(rng, tmpl.size_min[a], tmpl.size_max[a]);
                if (tmpl.shape == ObjectTemplate::Shape::Cylinder) {
                    // size_min/max.x is the radius range, .z the height range.
                    obj.half_size[0] *= 2.0;  // undo the halving: store radius directly
                    obj.half_size[1] = obj.half_size[0];
                }
                obj.yaw = tmpl.shape == ObjectTemplate::Shape::Box
                              ? uniform_double(rng, 0.0, 2.0 * std::numbers::pi)
                              : 0.0;
                obj.footprint_radius = tmpl.shape == ObjectTemplate::Shape::Box
                                           ? std::hypot(obj.half_size.x(), obj.half_size.y())
                                           : obj.half_size.x();

                const double radius = uniform_double(rng, tmpl.place_radius_min, tmpl.place_radius_max);
                const double angle = uniform_double(rng, 0.0, 2.0 * std::numbers::pi);
                // Offset from a uniformly chosen point on the sensor path so the
                // annulus follows the trajectory.
                const double s = uniform_double(rng);
                const Vec3 anchor = path_a + s * (path_b - path_a);
                double x = anchor.x() + radius * std::cos(angle);
                double y = anchor.y() + radius * std::sin(angle);

                const double margin = obj.footprint_radius + 0.5;
                if (x - margin < -spec.extent || x + margin > spec.extent ||
                    y - margin < -spec.extent || y + margin > spec.extent)
                    continue;
                const Vec3 at(x, y, 0.0);
                if (segment_distance_xy(at, path_a, path_b) < obj.footprint_radius + 2.0)
                    continue;
                bool collides = false;
                for (const PlacedObject &other : placed) {
                    const double dx = x - other.center.x(), dy = y - other.center.y();
                    const double need = obj.footprint_radius + other.footprint_radius + spec.min_gap;
                    if (dx * dx + dy * dy < need * need) { collides = true; break; }
                }
                if (collides) continue;

                const Tile *tile = tile_at(tiles, spec.tile_size, tiles_per_side, tile_lo, x, y);
                if (!tile) continue;
                obj.center = Vec3(x, y, tile->height_at(x, y) + spec.object_clearance);
                placed.push_back(obj);
                ok = true;
            }
            if (!ok)
                throw GenerationError("object placement failed for class " +
                                      std::to_string(tmpl.class_id) + " after " +
                                      std::to_string(spec.max_placement_retries) + " attempts");
        }
    }
    return placed;
}

std::optional<Hit> intersect_tiles(const Vec3 &origin, const Vec3 &dir,
                                   const std::vector<Tile> &tiles, double max_range) {
    std::optional<Hit> best;
    for (const Tile &tile : tiles) {
        // Solve origin.z + t*dir.z = base + gx*(x-cx) + gy*(y-cy) with
        // x = origin.x + t*dir.x, y likewise.
        const double denom = dir.z() - tile.gx * dir.x() - tile.gy * dir.y();
        const double num = tile.base + tile.gx * (origin.x() - tile.cx) +
                           tile.gy * (origin.y() - tile.cy) - origin.z();
        if (std::abs(denom) < 1e-12) continue;
        const double t = num / denom;
        if (t < kMinHitDistance || t > max_range) continue;
        if (best && t >= best->t) continue;
        const double x = origin.x() + t * dir.x();
        const double y = origin.y() + t * dir.y();
        if (x < tile.x0 || x >= tile.x1 || y < tile.y0 || y >= tile.y1) continue;
        best = Hit{t, tile.class_id};
    }
    return best;
}

std::optional<double> intersect_box(const Vec3 &origin, const Vec3 &dir, const PlacedObject &obj,
                                    double max_range) {
    // Slab test in the box frame; the box sits on its base (z spans
    // [center.z, center.z + 2*half.z]).
    const double c = std::cos(-obj.yaw), s = std::sin(-obj.yaw);
    const Vec3 rel = origin - Vec3(obj.center.x(), obj.center.y(), obj.center.z() + obj.half_size.z());
    const Vec3 o(c * rel.x() - s * rel.y(), s * rel.x() + c * rel.y(), rel.z());
    const Vec3 d(c * dir.x() - s * dir.y(), s * dir.x() + c * dir.y(), dir.z());
    double t0 = kMinHitDistance, t1 = max_range;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-12) {
            if (std::abs(o[a]) > obj.half_size[a]) return std::nullopt;
            continue;
        }
        double ta = (-obj.half_size[a] - o[a]) / d[a];
        double tb = (obj.half_size[a] - o[a]) / d[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return std::nullopt;
    }
    return t0;
}

std::optional<double> intersect_cylinder(const Vec3 &origin, const Vec3 &dir,
                                         const PlacedObject &obj, double max_range) {
    const double r = obj.half_size.x();
    const double z_lo = obj.center.z();
    const double z_hi = obj.center.z() + 2.0 * obj.half_size.z();
    const double ox = origin.x() - obj.center.x();
    const double oy = origin.y() - obj.center.y();
    double best = std::numeric_limits<double>::infinity();

    const double a = dir.x() * dir.x() + dir.y() * dir.y();
    if (a > 1e-12) {
        const double b = 2.0 * (ox * dir.x() + oy * dir.y());
        const double cq = ox * ox + oy * oy - r * r;
        const double disc = b * b - 4.0 * a * cq;
        if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
                if (t < kMinHitDistance || t > max_range) continue;
                const double z = origin.z() + t * dir.z();
                if (z < z_lo || z > z_hi) continue;
                best = std::min(best, t);
            }
        }
    }
    if (std::abs(dir.z()) > 1e-12) {
        const double t = (z_hi - origin.z()) / dir.z();  // top cap only
        if (t >= kMinHitDistance && t <= max_range) {
            const double x = ox + t * dir.x();
            const double y = oy + t * dir.y();
            if (x * x + y * y <= r * r) best = std::min(best, t);
        }
    }
    if (!std::isfinite(best)) return std::nullopt;
    return best;
}

} // namespace

SyntheticSequence generate_synthetic(const SyntheticSceneSpec &spec) {
    if (spec.scan_count < 1) throw std::invalid_argument("scan_count must be >= 1");
    if (spec.tile_size <= 0.0) throw std::invalid_argument("tile_size must be positive");
    if (spec.ground_classes.empty()) throw std::invalid_argument("ground_classes must not be empty");
    if (spec.beam.ring_count < 1 || spec.beam.azimuth_step_deg <= 0.0)
        throw std::invalid_argument("beam model must have rings and a positive azimuth step");

    Rng layout_rng(mix_seed(spec.seed, 0x1a70u));
    const std::vector<Tile> tiles = build_tiles(spec, layout_rng);
    const long tile_lo = static_cast<long>(std::floor(-spec.extent / spec.tile_size));
    const long tile_hi = static_cast<long>(std::ceil(spec.extent / spec.tile_size));
    const long tiles_per_side = tile_hi - tile_lo;

    const double path_len = spec.sensor_speed * spec.scan_period * (spec.scan_count - 1);
    const Vec3 path_a(-0.5 * path_len, 0.0, 0.0);
    const Vec3 path_b(0.5 * path_len, 0.0, 0.0);

    Rng place_rng(mix_seed(spec.seed, 0x0b1cu));
    const std::vector<PlacedObject> objects =
        place_objects(spec, tiles, tiles_per_side, tile_lo, path_a, path_b, place_rng);

    const int azimuth_steps = static_cast<int>(std::round(360.0 / spec.beam.azimuth_step_deg));
    SyntheticSequence seq;
    seq.scans.resize(static_cast<std::size_t>(spec.scan_count));
    seq.poses.resize(static_cast<std::size_t>(spec.scan_count));

    for (int k = 0; k < spec.scan_count; ++k) {
        const double sx = path_a.x() + spec.sensor_speed * spec.scan_period * k;
        const Tile *under = tile_at(tiles, spec.tile_size, tiles_per_side, tile_lo, sx, 0.0);
        const double ground_z = under ? under->height_at(sx, 0.0) : 0.0;
        const Vec3 origin(sx, 0.0, ground_z + spec.sensor_height);

        Pose &pose = seq.poses[static_cast<std::size_t>(k)];
        pose.rotation = Mat3::Identity();
        pose.translation = origin;

        Scan &scan = seq.scans[static_cast<std::size_t>(k)];
        scan.scan_index = k;
        scan.timestamp = spec.scan_period * k;
        Rng noise_rng(mix_seed(spec.seed, 0x5ca4u, static_cast<std::uint64_t>(k)));

        for (int ring = 0; ring < spec.beam.ring_count; ++ring) {
            const double f = spec.beam.ring_count == 1
                                 ? 0.0
                                 : static_cast<double>(ring) / (spec.beam.ring_count - 1);
            const double elev = (spec.beam.elevation_min_deg +
                                 f * (spec.beam.elevation_max_deg - spec.beam.elevation_min_deg)) *
                                kDegToRad;
            const double ce = std::cos(elev), se = std::sin(elev);
            for (int step = 0; step < azimuth_steps; ++step) {
                const double az = step * spec.beam.azimuth_step_deg * kDegToRad;
                const Vec3 dir(ce * std::cos(az), ce * std::sin(az), se);

                std::optional<Hit> hit = intersect_tiles(origin, dir, tiles, spec.beam.max_range);
                for (const PlacedObject &obj : objects) {
                    std::optional<double> t =
                        obj.shape == ObjectTemplate::Shape::Box
                            ? intersect_box(origin, dir, obj, spec.beam.max_range)
                            : intersect_cylinder(origin, dir, obj, spec.beam.max_range);
                    if (t && (!hit || *t < hit->t)) hit = Hit{*t, obj.class_id};
                }
                if (!hit) continue;
                const Vec3 world = origin + hit->t * dir;
                if (std::abs(world.x()) > spec.extent || std::abs(world.y()) > spec.extent) continue;
                const Vec3 local = world - origin;  // sensor axes stay world-aligned
                scan.points.emplace_back(static_cast<float>(local.x()),
                                         static_cast<float>(local.y()),
                                         static_cast<float>(local.z()));
                scan.intensity.push_back(static_cast<float>(uniform_double(noise_rng, 0.1, 0.9)));
                scan.labels.push_back(hit->class_id);
            }
        }
    }
    return seq;
}

void write_sequence(const std::filesystem::path &dir, const SyntheticSequence &seq,
                    const SyntheticSceneSpec *spec) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "velodyne");
    fs::create_directories(dir / "labels");
    for (std::size_t i = 0; i < seq.scans.size(); ++i) {
        const std::string stem = scan_stem(static_cast<int>(i));
        write_velodyne_bin(dir / "velodyne" / (stem + ".bin"), seq.scans[i]);
        if (!seq.scans[i].labels.empty())
            write_labels(dir / "labels" / (stem + ".label"), seq.scans[i].labels);
    }
    // Identity calibration keeps the stored poses equal to the sensor poses.
    Calibration calib;
    calib.has_tr = true;
    write_calib(dir / "calib.txt", calib);
    write_poses(dir / "poses.txt", seq.poses);
    if (spec) {
        nlohmann::json j;
        to_json(j, *spec);
        std::ofstream out(dir / "manifest.json");
        out << j.dump(2) << "\n";
    }
}

void to_json(nlohmann::json &j, const SyntheticSceneSpec &spec) {
    nlohmann::json objs = nlohmann::json::array();
    for (const ObjectTemplate &o : spec.objects) {
        objs.push_back({{"shape", o.shape == ObjectTemplate::Shape::Box ? "box" : "cylinder"},
                        {"class_id", o.class_id},
                        {"count", o.count},
                        {"size_min", {o.size_min.x(), o.size_min.y(), o.size_min.z()}},
                        {"size_max", {o.size_max.x(), o.size_max.y(), o.size_max.z()}},
                        {"place_radius_min", o.place_radius_min},
                        {"place_radius_max", o.place_radius_max}});
    }
    j = nlohmann::json{{"extent", spec.extent},
                       {"tile_size", spec.tile_size},
                       {"tile_height_amplitude", spec.tile_height_amplitude},
                       {"tile_slope_max_deg", spec.tile_slope_max_deg},
                       {"ground_classes", spec.ground_classes},
                       {"objects", objs},
                       {"min_gap", spec.min_gap},
                       {"object_clearance", spec.object_clearance},
                       {"sensor_height", spec.sensor_height},
                       {"sensor_speed", spec.sensor_speed},
                       {"scan_period", spec.scan_period},
                       {"scan_count", spec.scan_count},
                       {"beam",
                        {{"ring_count", spec.beam.ring_count},
                         {"azimuth_step_deg", spec.beam.azimuth_step_deg},
                         {"elevation_min_deg", spec.beam.elevation_min_deg},
                         {"elevation_max_deg", spec.beam.elevation_max_deg},
                         {"max_range", spec.beam.max_range}}},
                       {"seed", spec.seed},
                       {"max_placement_retries", spec.max_placement_retries}};
}

void from_json(const nlohmann::json &j, SyntheticSceneSpec &spec) {
    spec = SyntheticSceneSpec{};
    j.at("extent").get_to(spec.extent);
    j.at("tile_size").get_to(spec.tile_size);
    j.at("tile_height_amplitude").get_to(spec.tile_height_amplitude);
    j.at("tile_slope_max_deg").get_to(spec.tile_slope_max_deg);
    j.at("ground_classes").get_to(spec.ground_classes);
    spec.objects.clear();
    for (const nlohmann::json &jo : j.at("objects")) {
        ObjectTemplate o;
        const std::string shape = jo.at("shape").get<std::string>();
        if (shape == "box") o.shape = ObjectTemplate::Shape::Box;
        else if (shape == "cylinder") o.shape = ObjectTemplate::Shape::Cylinder;
        else throw std::invalid_argument("unknown object shape: " + shape);
        jo.at("class_id").get_to(o.class_id);
        jo.at("count").get_to(o.count);
        for (int a = 0; a < 3; ++a) {
            o.size_min[a] = jo.at("size_min").at(a).get<double>();
            o.size_max[a] = jo.at("size_max").at(a).get<double>();
        }
        jo.at("place_radius_min").get_to(o.place_radius_min);
        jo.at("place_radius_max").get_to(o.place_radius_max);
        spec.objects.push_back(o);
    }
    j.at("min_gap").get_to(spec.min_gap);
    j.at("object_clearance").get_to(spec.object_clearance);
    j.at("sensor_height").get_to(spec.sensor_height);
    j.at("sensor_speed").get_to(spec.sensor_speed);
    j.at("scan_period").get_to(spec.scan_period);
    j.at("scan_count").get_to(spec.scan_count);
    const nlohmann::json &jb = j.at("beam");
    jb.at("ring_count").get_to(spec.beam.ring_count);
    jb.at("azimuth_step_deg").get_to(spec.beam.azimuth_step_deg);
    jb.at("elevation_min_deg").get_to(spec.beam.elevation_min_deg);
    jb.at("elevation_max_deg").get_to(spec.beam.elevation_max_deg);
    jb.at("max_range").get_to(spec.beam.max_range);
    j.at("seed").get_to(spec.seed);
    j.at("max_placement_retries").get_to(spec.max_placement_retries);
}

SyntheticSceneSpec default_scene_spec() {
    SyntheticSceneSpec spec;
    spec.extent = 40.0;
    spec.tile_size = 10.0;
    spec.tile_height_amplitude = 0.15;
    spec.tile_slope_max_deg = 3.0;
    spec.ground_classes = {0, 1, 2};  // road, sidewalk, terrain
    spec.min_gap = 1.0;
    spec.object_clearance = 0.0;
    spec.sensor_height = 1.8;
    spec.sensor_speed = 8.0;
    spec.scan_period = 0.1;
    spec.scan_count = 5;
    spec.beam.ring_count = 32;
    spec.beam.azimuth_step_deg = 0.6;
    spec.beam.elevation_min_deg = -28.0;
    spec.beam.elevation_max_deg = -3.0;
    spec.beam.max_range = 120.0;

    ObjectTemplate building;
    building.shape = ObjectTemplate::Shape::Box;
    building.class_id = 3;
    building.count = 4;
    building.size_min = Vec3(6.0, 4.0, 3.0);
    building.size_max = Vec3(10.0, 8.0, 6.0);
    building.place_radius_min = 16.0;
    building.place_radius_max = 32.0;

    ObjectTemplate car;
    car.shape = ObjectTemplate::Shape::Box;
    car.class_id = 4;
    car.count = 6;
    car.size_min = Vec3(3.8, 1.7, 1.4);
    car.size_max = Vec3(4.8, 2.0, 1.7);
    car.place_radius_min = 5.0;
    car.place_radius_max = 25.0;

    ObjectTemplate pole;
    pole.shape = ObjectTemplate::Shape::Cylinder;
    pole.class_id = 5;
    pole.count = 6;
    pole.size_min = Vec3(0.08, 0.0, 2.5);
    pole.size_max = Vec3(0.15, 0.0, 5.0);
    pole.place_radius_min = 4.0;
    pole.place_radius_max = 22.0;

    ObjectTemplate pedestrian;
    pedestrian.shape = ObjectTemplate::Shape::Cylinder;
    pedestrian.class_id = 6;
    pedestrian.count = 5;
    pedestrian.size_min = Vec3(0.25, 0.0, 1.5);
    pedestrian.size_max = Vec3(0.35, 0.0, 1.9);
    pedestrian.place_radius_min = 4.0;
    pedestrian.place_radius_max = 18.0;

    ObjectTemplate bicycle;
    bicycle.shape = ObjectTemplate::Shape::Box;
    bicycle.class_id = 7;
    bicycle.count = 3;
    bicycle.size_min = Vec3(1.6, 0.4, 0.9);
    bicycle.size_max = Vec3(1.9, 0.6, 1.2);
    bicycle.place_radius_min = 4.0;
    bicycle.place_radius_max = 16.0;

    spec.objects = {building, car, pole, pedestrian, bicycle};
    return spec;
}

int default_scene_num_classes() { return 8; }

} // namespace lidarseg
