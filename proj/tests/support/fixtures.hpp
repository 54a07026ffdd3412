#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bimslam/change_detection.hpp"
#include "bimslam/mesh.hpp"
#include "bimslam/point_cloud.hpp"
#include "bimslam/se3.hpp"
#include "bimslam/session.hpp"
#include "bimslam/simulator.hpp"

namespace fixtures {

struct Box {
    Eigen::Vector3d lo;
    Eigen::Vector3d hi;
};

/// Twelve outward-facing triangles.
void add_box(bimslam::TriangleMesh& mesh, const Box& box);
bimslam::TriangleMesh box_mesh(const Box& box);
/// The box without its bottom face, the part a floor-mounted sensor can observe.
bimslam::TriangleMesh visible_box_mesh(const Box& box);

/// 20 x 15 x 3 m shell split by a wall at x = 12 with a door, plus a column
/// and a partial wall in the right room.
bimslam::BuildingModel two_room_model();
Eigen::Vector2d two_room_seed();

/// Two 0.6 x 0.4 x 0.8 m obstacles present in the world but not in the model.
std::vector<Box> obstacle_boxes();
bimslam::BuildingModel two_room_world_with_obstacles();

/// Scripted tour through both rooms, about 64 m long.
std::vector<bimslam::Waypoint> tour_goals(const Eigen::Vector2d& offset = Eigen::Vector2d::Zero());

/// Axis-aligned room shell (floor, ceiling, four walls) with an off-centre pillar.
bimslam::BuildingModel box_room(double sx = 8.0, double sy = 6.0, double sz = 3.0);

/// Uniform point samples on the surface of a mesh, area weighted.
bimslam::PointCloud sample_surface(const bimslam::TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

Eigen::Vector3d random_unit(std::mt19937_64& rng);
bimslam::Pose random_pose(std::mt19937_64& rng, double max_t, double max_angle_rad);

/// Symmetric Hausdorff distance between two finite point sets.
double hausdorff(const std::vector<Eigen::Vector3d>& a, const std::vector<Eigen::Vector3d>& b);

}  // namespace fixtures

namespace fixtures {

/// Small deterministic session: three nodes, odometry chain, one loop edge
/// 0 -> 2, a handful of points per keyframe.
bimslam::Session golden_session();

}  // namespace fixtures

namespace fixtures {

/// O(n^2) DBSCAN with the same core and border rules as the library.
struct ReferenceClustering {
    std::set<std::set<std::size_t>> clusters;
    std::set<std::size_t> noise;
};
ReferenceClustering reference_dbscan(const bimslam::PointCloud& points, double eps, std::size_t min_pts);

/// Library output in the same set-of-sets form.
ReferenceClustering as_sets(const bimslam::Clustering& c);

/// Mixture of blobs, lattice patches and scattered points; at most `max_points`.
bimslam::PointCloud random_cluster_scene(std::mt19937_64& rng, std::size_t max_points);

}  // namespace fixtures

namespace fixtures {

/// Two-sided surface Hausdorff estimate: area samples plus vertices of each
/// mesh, measured exactly against the other surface.
double surface_hausdorff(const bimslam::TriangleMesh& a, const bimslam::TriangleMesh& b, std::size_t samples = 20000);

}  // namespace fixtures
