#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "bimslam/se3.hpp"

namespace bimslam {

using Point = Eigen::Vector3f;

/// Points in meters. Stored as float32, the precision of the on-disk format.
struct PointCloud {
    std::vector<Point> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool operator==(const PointCloud&) const = default;
};

PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose);
void append(PointCloud& dst, const PointCloud& src);
std::vector<Eigen::Vector3d> to_double(const PointCloud& cloud);

/// Centroid per occupied voxel, emitted in sorted voxel-key order.
PointCloud voxel_downsample(const PointCloud& cloud, double leaf);

/// Binary cloud file: magic "PCXYZ001", u32 LE count, count x 3 float32 LE.
void save_cloud(const PointCloud& cloud, const std::filesystem::path& file);
PointCloud load_cloud(const std::filesystem::path& file);

}  // namespace bimslam
