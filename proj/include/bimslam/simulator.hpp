#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "bimslam/mesh.hpp"
#include "bimslam/session.hpp"

namespace bimslam {

enum class CellState : std::uint8_t { Unknown, Free, Occupied };

struct GridCell {
    int x = 0;
    int y = 0;
    bool operator==(const GridCell&) const = default;
};

struct OccupancyGrid {
    double resolution = 0.1;
    Eigen::Vector2d origin = Eigen::Vector2d::Zero();  // world xy of cell (0,0)'s lower corner
    int width = 0;
    int height = 0;
    std::vector<CellState> cells;  // row-major, y * width + x

    bool contains(GridCell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
    CellState at(GridCell c) const { return cells[static_cast<std::size_t>(c.y) * width + c.x]; }
    CellState& at(GridCell c) { return cells[static_cast<std::size_t>(c.y) * width + c.x]; }
    GridCell cell_of(const Eigen::Vector2d& world) const;
    Eigen::Vector2d center_of(GridCell c) const;
    std::size_t count(CellState s) const;
};

struct Waypoint {
    double x = 0.0;
    double y = 0.0;
    double yaw = 0.0;
};

struct RasterizeParams {
    double resolution = 0.1;
    double slice_z_min = 0.2;
    double slice_z_max = 1.5;
};

/// Occupied: a triangle crosses the cell's prism inside the slice band.
/// Free: 4-connected to the interior seed without leaving the grid.
/// Throws NoInterior when the seed is occupied, outside, or not enclosed.
OccupancyGrid rasterize(const BuildingModel& model, const Eigen::Vector2d& interior_seed,
                        const RasterizeParams& params = {});

/// Free cells whose centers are farther than `clearance` from every non-free cell.
std::vector<GridCell> eroded_free_cells(const OccupancyGrid& grid, double clearance);

/// Wavefront coverage: BFS distance from start over eroded free cells, then a
/// walk that always steps to the unvisited neighbour with the lowest wavefront
/// value (scanline tie-break), bridging dead ends through the shortest path to
/// the nearest unvisited cell. Consecutive cells are 4-adjacent.
std::vector<GridCell> coverage_path(const OccupancyGrid& grid, GridCell start, double clearance);

/// Cell centers with heading toward the successor.
std::vector<Waypoint> to_waypoints(const OccupancyGrid& grid, const std::vector<GridCell>& cells);

/// Keeps indices 0, stride, 2*stride, ... and the final waypoint; headings
/// are recomputed toward the next kept goal.
std::vector<Waypoint> subsample_goals(const std::vector<Waypoint>& waypoints, std::size_t stride = 20);

/// Inserts the intermediate waypoints of `path` between consecutive goals
/// whose straight connection crosses a non-free cell.
std::vector<Waypoint> route_goals(const OccupancyGrid& grid, const std::vector<Waypoint>& path, std::size_t stride);

void save_goals(const std::vector<Waypoint>& goals, const std::filesystem::path& file);
std::vector<Waypoint> load_goals(const std::filesystem::path& file);

/// One ray per (channel, horizontal step); nearest hit within max_range,
/// returned in the sensor frame with Gaussian range noise. Misses are dropped.
PointCloud raycast_scan(const MeshIndex& model, const Pose& sensor_pose, const LidarSpec& spec, std::uint64_t seed);
PointCloud raycast_scan(const BuildingModel& model, const Pose& sensor_pose, const LidarSpec& spec,
                        std::uint64_t seed);

struct SimulationParams {
    double speed = 0.5;         // m/s
    double scan_period = 0.1;   // s between scans; step length = speed * scan_period
    double keyframe_spacing = 1.0;
    double sensor_height = 0.5;
    std::uint64_t seed = 1;
    ScanContextParams scan_context;
};

/// Sensor poses along the straight segments between goals, one per step.
std::vector<Pose> interpolate_trajectory(const std::vector<Waypoint>& goals, double step, double sensor_height);

/// Ground-truth session: interpolated trajectory, keyframe sampling, and a
/// ray-cast scan at every kept pose. Node poses are exact.
Session simulate_session(const BuildingModel& model, const std::vector<Waypoint>& goals, const LidarSpec& spec,
                         const SimulationParams& params = {});

struct DriftModel {
    double trans_drift_per_m = 0.0;  // scale error per meter travelled
    double yaw_drift_per_m = 0.0;    // rad per meter travelled
    double trans_noise_sigma = 0.0;  // m, per edge
    double rot_noise_sigma = 0.0;    // rad, per edge
    std::uint64_t seed = 1;
};

/// Perturbs odometry edges and re-chains node poses from node 0. Keyframe
/// payloads are untouched.
Session inject_drift(const Session& gt, const DriftModel& drift);

/// Expresses the session in a different local frame: every node is left-composed with `offset`.
Session reframe(const Session& session, const Pose& offset);

}  // namespace bimslam
