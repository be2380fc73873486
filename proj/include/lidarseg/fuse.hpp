#pragma once

#include "lidarseg/types.hpp"

#include <span>
#include <vector>

namespace lidarseg {

/// Fuses consecutive scans into one world-frame cloud. Ranges are computed in
/// each scan's own sensor frame before the rigid transform is applied; the
/// time_offset channel is the scan's window-centered position, so a 5-scan
/// window yields offsets -2..2. Throws std::invalid_argument on an empty span
/// or a length mismatch.
FusedCloud fuse_scans(std::span<const Scan> scans, std::span<const Pose> poses);

/// Splits a sequence into consecutive windows of t scans and fuses each.
/// A shorter trailing window is kept so every scan is covered.
std::vector<FusedCloud> fuse_windows(std::span<const Scan> scans, std::span<const Pose> poses, int t);

struct VoxelDownsampleResult {
    FusedCloud cloud;
    std::vector<std::uint32_t> kept_ids;  // indices into the input cloud
    double voxel_size = 0.0;
};

/// Reduces the cloud to roughly target_count points by keeping one
/// representative (the smallest point id) per occupied voxel. The voxel size
/// is found by bisection over the occupied-voxel count; the result lands
/// within ±5% of min(target_count, input count) for non-adversarial inputs.
/// Inputs already at or below the target pass through unchanged.
VoxelDownsampleResult voxel_downsample(const FusedCloud &cloud, std::size_t target_count);

/// Restricts a fused cloud to the given point ids (ascending order kept).
FusedCloud subset_cloud(const FusedCloud &cloud, const std::vector<std::uint32_t> &ids);

} // namespace lidarseg
