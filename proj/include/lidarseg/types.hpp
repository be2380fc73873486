#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <limits>
#include <vector>

namespace lidarseg {

using Vec3 = Eigen::Vector3d;
using Vec3f = Eigen::Vector3f;
using Mat3 = Eigen::Matrix3d;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

/// Sentinel for "no class" in per-point uint16 label arrays.
inline constexpr std::uint16_t kNoClass = 0xFFFF;
/// Sentinel for "no component" in per-point uint32 component-id arrays.
inline constexpr std::uint32_t kNoComponent = 0xFFFFFFFF;

/// One LiDAR revolution in the sensor frame. Coordinates are float32 to match
/// the on-disk record layout bit-for-bit.
struct Scan {
    std::vector<Vec3f> points;
    std::vector<float> intensity;       // in [0,1] after normalization
    std::vector<std::uint16_t> labels;  // semantic class per point; empty if unknown
    int scan_index = 0;
    double timestamp = 0.0;  // seconds

    std::size_t size() const { return points.size(); }
};

/// Rigid transform taking sensor-frame coordinates into the world frame.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3 &p) const { return rotation * p + translation; }

    /// RᵀR = I and det(R) = +1, both within tol.
    bool is_rigid(double tol = 1e-6) const {
        const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
        return err.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
    }
};

/// Temporally fused points in a single world-anchored frame.
/// `range` is the distance from each point to the sensor center of the scan it
/// came from, i.e. the norm of the point in its source sensor frame.
struct FusedCloud {
    std::vector<Vec3> points;
    std::vector<double> range;
    std::vector<std::uint32_t> scan_index;   // ordinal of the source scan
    std::vector<std::int32_t> time_offset;   // window-centered time index i
    std::vector<std::uint16_t> gt_label;     // empty if unavailable

    std::size_t size() const { return points.size(); }
    bool has_gt() const { return !gt_label.empty(); }
};

} // namespace lidarseg
