#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bimslam/point_cloud.hpp"
#include "bimslam/scan_context.hpp"
#include "bimslam/se3.hpp"

namespace bimslam {

struct LidarSpec {
    int channels = 16;
    double vertical_fov_min_deg = -15.0;
    double vertical_fov_max_deg = 15.0;
    int horizontal_steps = 900;
    double max_range = 30.0;
    double noise_sigma = 0.01;

    bool operator==(const LidarSpec&) const = default;
};

void validate(const LidarSpec& spec);

struct GraphEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    Pose relative;
    Matrix6d information = Matrix6d::Identity();
};

/// Nodes are dense 0..n-1. Odometry edges join i -> i+1; loop edges are any
/// other intra-session constraint.
struct PoseGraph {
    std::vector<Pose> nodes;
    std::vector<GraphEdge> odometry_edges;
    std::vector<GraphEdge> loop_edges;
};

struct Keyframe {
    PointCloud cloud;
    Descriptor descriptor;
};

/// One mapping run: pose graph plus the scan and descriptor of every node.
struct Session {
    PoseGraph graph;
    std::vector<Keyframe> keyframes;
    double spacing = 1.0;
    LidarSpec lidar;
    std::string frame_label = "local";

    std::size_t size() const { return keyframes.size(); }
};

/// Throws PreconditionViolation when a structural invariant is broken.
void validate(const PoseGraph& graph);
void validate(const Session& session);

/// Directory layout: poses.graph, keyframes/%06d.pc, descriptors/%06d.dsc, meta.txt.
void save_session(const Session& session, const std::filesystem::path& dir);
Session load_session(const std::filesystem::path& dir);

/// g2o-style text: VERTEX_SE3:QUAT and EDGE_SE3:QUAT lines with 21
/// upper-triangular information entries. Edges joining i -> i+1 are read as
/// odometry, every other edge as an intra-session loop.
void write_graph(const PoseGraph& graph, std::ostream& os);
PoseGraph read_graph(std::istream& is, const std::string& name = "poses.graph");

/// Keeps the first pose and every pose whose accumulated path length since
/// the last kept pose reaches `spacing`. Odometry edges get identity information.
Session sample_keyframes(const std::vector<std::pair<Pose, PointCloud>>& trajectory, double spacing,
                         const ScanContextParams& sc = {});

/// Same selection rule over bare poses; returns the kept indices.
std::vector<std::size_t> select_keyframes(const std::vector<Pose>& poses, double spacing);

/// Builds odometry edges (identity information) between consecutive nodes.
std::vector<GraphEdge> chain_edges(const std::vector<Pose>& nodes);

/// TUM-style trajectory text: `index x y z qx qy qz qw` per line.
void save_trajectory(const std::vector<Pose>& poses, const std::filesystem::path& file);
std::vector<Pose> load_trajectory(const std::filesystem::path& file);

}  // namespace bimslam
