#pragma once

#include "lidarseg/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lidarseg {

/// Parsed odometry-style calibration. Only Tr (sensor → camera0) matters here.
struct Calibration {
    Pose tr;  // velodyne frame → camera frame
    bool has_tr = false;
};

/// Reads packed 16-byte records (little-endian float32 x, y, z, intensity).
/// Throws FormatError naming the byte offset on a truncated file and
/// ConsistencyError on non-finite coordinates. Intensities above 1 are
/// assumed byte-scaled and divided by 255.
Scan read_velodyne_bin(const std::filesystem::path &path);

/// Writes the scan back in the same record layout.
void write_velodyne_bin(const std::filesystem::path &path, const Scan &scan);

/// Reads per-point uint32 labels; semantic class = value & 0xFFFF.
std::vector<std::uint16_t> read_labels(const std::filesystem::path &path);

/// Writes labels with a zero instance half.
void write_labels(const std::filesystem::path &path, const std::vector<std::uint16_t> &labels);

/// Reads poses.txt: one row-major 3×4 matrix (12 floats) per line.
std::vector<Pose> read_poses(const std::filesystem::path &path);
void write_poses(const std::filesystem::path &path, const std::vector<Pose> &poses);

/// Reads calib.txt, looking for a "Tr:" or "Tr_velo_to_cam:" line.
Calibration read_calib(const std::filesystem::path &path);
void write_calib(const std::filesystem::path &path, const Calibration &calib);

/// Loads selected scans of a KITTI-style sequence directory
/// (velodyne/NNNNNN.bin, optional labels/NNNNNN.label, poses.txt, calib.txt).
/// Returned poses map sensor-frame points into a common world frame: when a
/// calibration Tr is present each camera pose P is conjugated to
/// Tr⁻¹ · P · Tr so that the pose translation is the sensor center.
/// An empty scan_ids selects every scan with a velodyne file.
std::pair<std::vector<Scan>, std::vector<Pose>> load_sequence(const std::filesystem::path &dir,
                                                              const std::vector<int> &scan_ids = {});

/// 6-digit zero-padded stem, e.g. 42 → "000042".
std::string scan_stem(int scan_id);

} // namespace lidarseg
