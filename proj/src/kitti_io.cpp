#include "lidarseg/kitti_io.hpp"

#include "lidarseg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace lidarseg {

namespace {

std::vector<char> read_all(const fs::path &path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FormatError("cannot open " + path.string());
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<char> data(size);
    if (size > 0 && !in.read(data.data(), static_cast<std::streamsize>(size))) {
        throw FormatError("short read on " + path.string());
    }
    return data;
}

} // namespace

std::string scan_stem(int scan_id) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", scan_id);
    return buf;
}

Scan read_velodyne_bin(const fs::path &path) {
    const auto data = read_all(path);
    constexpr std::size_t kRecord = 16;  // 4 × float32
    if (data.size() % kRecord != 0) {
        throw FormatError(path.string() + ": truncated record at byte offset " +
                          std::to_string(data.size() - data.size() % kRecord) + " (file size " +
                          std::to_string(data.size()) + " is not a multiple of 16)");
    }
    const std::size_t n = data.size() / kRecord;
    Scan scan;
    scan.points.resize(n);
    scan.intensity.resize(n);
    float max_intensity = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        float rec[4];
        std::memcpy(rec, data.data() + i * kRecord, kRecord);
        if (!std::isfinite(rec[0]) || !std::isfinite(rec[1]) || !std::isfinite(rec[2])) {
            throw ConsistencyError(path.string() + ": non-finite coordinate in record " + std::to_string(i));
        }
        scan.points[i] = Vec3f(rec[0], rec[1], rec[2]);
        scan.intensity[i] = rec[3];
        max_intensity = std::max(max_intensity, rec[3]);
    }
    if (max_intensity > 1.0f) {  // byte-scaled reflectance
        for (auto &v : scan.intensity) v /= 255.0f;
    }
    return scan;
}

void write_velodyne_bin(const fs::path &path, const Scan &scan) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    for (std::size_t i = 0; i < scan.size(); ++i) {
        const float rec[4] = {scan.points[i].x(), scan.points[i].y(), scan.points[i].z(),
                              i < scan.intensity.size() ? scan.intensity[i] : 0.0f};
        out.write(reinterpret_cast<const char *>(rec), sizeof(rec));
    }
    if (!out) throw FormatError("write failed on " + path.string());
}

std::vector<std::uint16_t> read_labels(const fs::path &path) {
    const auto data = read_all(path);
    if (data.size() % 4 != 0) {
        throw FormatError(path.string() + ": truncated label at byte offset " +
                          std::to_string(data.size() - data.size() % 4));
    }
    const std::size_t n = data.size() / 4;
    std::vector<std::uint16_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t v;
        std::memcpy(&v, data.data() + i * 4, 4);
        labels[i] = static_cast<std::uint16_t>(v & 0xFFFFu);
    }
    return labels;
}

void write_labels(const fs::path &path, const std::vector<std::uint16_t> &labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    for (const auto l : labels) {
        const std::uint32_t v = l;
        out.write(reinterpret_cast<const char *>(&v), 4);
    }
    if (!out) throw FormatError("write failed on " + path.string());
}

std::vector<Pose> read_poses(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<Pose> poses;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream iss(line);
        double m[12];
        for (int i = 0; i < 12; ++i) {
            if (!(iss >> m[i])) {
                throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                                  " has fewer than 12 values");
            }
        }
        Pose pose;
        pose.rotation << m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10];
        pose.translation = Vec3(m[3], m[7], m[11]);
        poses.push_back(pose);
    }
    return poses;
}

void write_poses(const fs::path &path, const std::vector<Pose> &poses) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    char buf[32];
    for (const auto &p : poses) {
        const double m[12] = {p.rotation(0, 0), p.rotation(0, 1), p.rotation(0, 2), p.translation.x(),
                              p.rotation(1, 0), p.rotation(1, 1), p.rotation(1, 2), p.translation.y(),
                              p.rotation(2, 0), p.rotation(2, 1), p.rotation(2, 2), p.translation.z()};
        for (int i = 0; i < 12; ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", m[i]);
            out << buf << (i == 11 ? "" : " ");
        }
        out << "\n";
    }
}

Calibration read_calib(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    Calibration calib;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream iss(line);
        std::string key;
        if (!(iss >> key)) continue;
        if (key == "Tr:" || key == "Tr_velo_to_cam:") {
            double m[12];
            for (int i = 0; i < 12; ++i) {
                if (!(iss >> m[i])) throw FormatError(path.string() + ": Tr line has fewer than 12 values");
            }
            calib.tr.rotation << m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10];
            calib.tr.translation = Vec3(m[3], m[7], m[11]);
            calib.has_tr = true;
        }
    }
    return calib;
}

void write_calib(const fs::path &path, const Calibration &calib) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    if (calib.has_tr) {
        const auto &p = calib.tr;
        char buf[32];
        out << "Tr:";
        const double m[12] = {p.rotation(0, 0), p.rotation(0, 1), p.rotation(0, 2), p.translation.x(),
                              p.rotation(1, 0), p.rotation(1, 1), p.rotation(1, 2), p.translation.y(),
                              p.rotation(2, 0), p.rotation(2, 1), p.rotation(2, 2), p.translation.z()};
        for (const double v : m) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << " " << buf;
        }
        out << "\n";
    }
}

std::pair<std::vector<Scan>, std::vector<Pose>> load_sequence(const fs::path &dir,
                                                              const std::vector<int> &scan_ids) {
    const fs::path velodyne_dir = dir / "velodyne";
    if (!fs::is_directory(velodyne_dir)) {
        throw FormatError("no velodyne/ directory under " + dir.string());
    }

    std::vector<int> ids = scan_ids;
    if (ids.empty()) {
        for (const auto &entry : fs::directory_iterator(velodyne_dir)) {
            if (entry.path().extension() == ".bin") {
                ids.push_back(std::stoi(entry.path().stem().string()));
            }
        }
        std::sort(ids.begin(), ids.end());
    }

    std::vector<Pose> all_poses;
    const fs::path poses_path = dir / "poses.txt";
    if (fs::exists(poses_path)) all_poses = read_poses(poses_path);

    Calibration calib;
    const fs::path calib_path = dir / "calib.txt";
    if (fs::exists(calib_path)) calib = read_calib(calib_path);

    // SemanticKITTI convention: poses.txt holds camera poses; conjugating by
    // the calibration puts the sequence in a sensor-anchored world frame so
    // that pose translations are sensor centers.
    Eigen::Isometry3d tr = Eigen::Isometry3d::Identity();
    if (calib.has_tr) {
        tr.linear() = calib.tr.rotation;
        tr.translation() = calib.tr.translation;
    }
    const Eigen::Isometry3d tr_inv = tr.inverse();

    std::vector<Scan> scans;
    std::vector<Pose> poses;
    scans.reserve(ids.size());
    poses.reserve(ids.size());
    const fs::path labels_dir = dir / "labels";

    for (const int id : ids) {
        Scan scan = read_velodyne_bin(velodyne_dir / (scan_stem(id) + ".bin"));
        scan.scan_index = id;
        scan.timestamp = 0.1 * id;  // KITTI captures at 10 Hz

        const fs::path label_path = labels_dir / (scan_stem(id) + ".label");
        if (fs::exists(label_path)) {
            scan.labels = read_labels(label_path);
            if (scan.labels.size() != scan.size()) {
                throw ConsistencyError(label_path.string() + ": " + std::to_string(scan.labels.size()) +
                                       " labels for " + std::to_string(scan.size()) + " points");
            }
        }

        Pose pose;
        if (static_cast<std::size_t>(id) < all_poses.size()) {
            Eigen::Isometry3d cam = Eigen::Isometry3d::Identity();
            cam.linear() = all_poses[id].rotation;
            cam.translation() = all_poses[id].translation;
            const Eigen::Isometry3d world = tr_inv * cam * tr;
            pose.rotation = world.rotation();
            pose.translation = world.translation();
        }
        if (!pose.is_rigid()) {
            throw ConsistencyError(dir.string() + ": pose for scan " + std::to_string(id) +
                                   " is not a rigid transform");
        }
        scans.push_back(std::move(scan));
        poses.push_back(pose);
    }
    return {std::move(scans), std::move(poses)};
}

} // namespace lidarseg
