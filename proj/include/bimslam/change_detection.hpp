#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bimslam/mesh.hpp"
#include "bimslam/point_cloud.hpp"

namespace bimslam {

/// Unsigned distance from p to the closest model triangle. Throws
/// PreconditionViolation on an empty model.
double point_mesh_distance(const Eigen::Vector3d& p, const MeshIndex& model);
double point_mesh_distance(const Eigen::Vector3d& p, const BuildingModel& model);

struct Classification {
    PointCloud confirmed;  // distance <= threshold
    PointCloud positive;   // distance > threshold
};

/// Throws PreconditionViolation unless threshold > 0.
Classification classify(const PointCloud& map, const MeshIndex& model, double threshold = 0.15);
Classification classify(const PointCloud& map, const BuildingModel& model, double threshold = 0.15);

struct Clustering {
    std::vector<std::vector<std::size_t>> clusters;  // ascending indices; ordered by first index
    std::vector<std::size_t> noise;
};

/// Core points have at least `min_pts` points (themselves included) within
/// `eps`. Clusters are connected components of core points; a border point
/// joins the cluster of its nearest core point, ties broken by the smaller
/// core coordinates, so the partition does not depend on input order.
Clustering dbscan(const PointCloud& points, double eps = 0.3, std::size_t min_pts = 10);

/// Boundary of the union of occupied voxels: two triangles per exposed cube
/// face, outward oriented, corners shared between faces.
TriangleMesh voxel_mesh(const PointCloud& cluster, double voxel = 0.1);

struct ChangeParams {
    double threshold = 0.15;
    double eps = 0.3;
    std::size_t min_pts = 10;
    double voxel = 0.1;
    /// Only positive points with z in [first, second] are clustered.
    std::optional<std::pair<double, double>> crop_z;
};

struct ChangeSet {
    PointCloud confirmed;
    PointCloud positive;
    /// Indices into `positive`.
    std::vector<std::vector<std::size_t>> clusters;
    std::vector<std::size_t> noise;
    std::vector<TriangleMesh> meshes;
    ChangeParams params;
};

ChangeSet detect_changes(const PointCloud& map, const BuildingModel& model, const ChangeParams& params = {});

PointCloud cluster_points(const ChangeSet& changes, std::size_t cluster);

/// Counts and per-cluster bounding boxes.
std::string change_report(const ChangeSet& changes);

/// Writes cluster_%03d.obj, changes.obj, confirmed.pc, positive.pc and report.txt into dir.
void export_changes(const ChangeSet& changes, const std::filesystem::path& dir);

}  // namespace bimslam
