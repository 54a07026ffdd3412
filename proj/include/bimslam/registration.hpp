#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "bimslam/kdtree.hpp"
#include "bimslam/point_cloud.hpp"
#include "bimslam/session.hpp"

namespace bimslam {

struct IcpParams {
    double max_corr_dist = 1.0;      // m
    int max_iterations = 50;
    double convergence_eps = 1e-5;   // norm of the per-iteration twist
    double fitness_threshold = 0.04; // m^2
};

/// Per-iteration record. `matched_mse` and `aligned_mse` are evaluated on the
/// same correspondence set before and after the closed-form update;
/// `retained_mse` re-matches the previous iteration's inliers after the update.
struct IcpIteration {
    double retained_mse = 0.0;
    double matched_mse = 0.0;
    double aligned_mse = 0.0;
    std::size_t inliers = 0;
};

struct IcpResult {
    Pose transform;          // maps source coordinates into the target frame
    double fitness = 0.0;    // mean squared distance of the final inliers
    double overlap = 0.0;    // final inlier fraction of the source
    int iterations = 0;
    bool converged = false;
    std::vector<IcpIteration> history;
};

/// Point-to-point ICP with gated nearest-neighbour correspondences and an
/// SVD update. Throws TooFewPoints (< 10 points) or NoCorrespondences.
IcpResult icp(const PointCloud& source, const PointCloud& target, const Pose& init, const IcpParams& params);
IcpResult icp(const std::vector<Eigen::Vector3d>& source, const KdTree& target, const Pose& init,
              const IcpParams& params);

/// Rigid transform minimizing sum |R p + t - q|^2 (Kabsch, reflection-safe).
Pose kabsch(const std::vector<Eigen::Vector3d>& p, const std::vector<Eigen::Vector3d>& q);

/// max(fitness, floor) * diag(1, 1, 1, 4, 4, 4).
Matrix6d adaptive_covariance(double fitness, double floor = 1e-4);

/// Measured pose of query keyframe j in the frame of GT keyframe i.
struct Encounter {
    std::size_t gt_index = 0;
    std::size_t query_index = 0;
    Pose relative;
    Matrix6d covariance = Matrix6d::Identity();
    double fitness = 0.0;
};

struct LoopCandidate {
    std::size_t gt_index = 0;
    std::size_t query_index = 0;
    Pose init;                       // guess of the encounter relative pose
    bool from_descriptor = false;
    std::optional<Pose> proximity_init;  // set when the pair was also found by radius search
};

struct CandidateParams {
    double sc_threshold = 0.6;
    std::size_t sc_top_k = 5;
    double radius = 10.0;
    /// Closest GT keyframes kept per query keyframe by the radius search (0 = all).
    std::size_t max_proximity_per_query = 3;
};

/// Union of descriptor matches (yaw from the best column shift) and pairs
/// whose anchored positions lie within `radius`. Duplicates keep the
/// descriptor guess. Sorted by (gt_index, query_index).
std::vector<LoopCandidate> detect_candidates(const Session& gt, const Session& query, const Pose& anchor_guess,
                                             const CandidateParams& params = {});

struct EncounterParams {
    CandidateParams candidates;
    IcpParams icp;
    double source_leaf = 0.25;  // voxel leaf for the query scan, m
    double target_leaf = 0.1;   // voxel leaf for the GT submap, m
    std::size_t submap_neighbors = 1;
    double min_overlap = 0.3;
    /// Coarse-to-fine gate multipliers applied to icp.max_corr_dist.
    std::vector<double> gate_schedule{4.0, 2.0, 1.0, 0.5, 0.25};
    /// Iteration cap for every stage but the last (0 = icp.max_iterations).
    int coarse_max_iterations = 10;
    /// When positive, reject results deviating from the anchored prediction.
    double max_prediction_error_m = 0.0;
    double max_prediction_error_deg = 0.0;
};

/// Runs icp once per gate_schedule stage, each starting from the previous result.
/// The returned history and iteration count span all stages.
IcpResult icp_coarse_to_fine(const std::vector<Eigen::Vector3d>& source, const KdTree& target, const Pose& init,
                             const EncounterParams& params);

struct EncounterReport {
    std::vector<Encounter> encounters;
    std::size_t candidates = 0;
    std::size_t rejected = 0;
};

/// Query scans are registered against a merged GT submap around keyframe i
/// (i and its neighbours, expressed in i's frame).
PointCloud gt_submap(const Session& gt, std::size_t i, std::size_t neighbors);

/// Registers query scans against GT submaps, caching the downsampled sources
/// and target trees across calls. Gates: fitness, overlap, and ICP failure.
class PairRegistrar {
public:
    PairRegistrar(const Session& gt, const Session& query, const EncounterParams& params);

    std::optional<Encounter> register_pair(std::size_t gt_index, std::size_t query_index, const Pose& init);

private:
    const KdTree& target(std::size_t i);
    const std::vector<Eigen::Vector3d>& source(std::size_t j);

    const Session& gt_;
    const Session& query_;
    EncounterParams params_;
    std::map<std::size_t, KdTree> targets_;
    std::map<std::size_t, std::vector<Eigen::Vector3d>> sources_;
};

/// True when `measured` deviates from the anchored prediction by no more than the gates (0 disables a gate).
bool consistent_with_prediction(const Pose& gt_pose, const Pose& query_world, const Pose& measured, double max_m,
                                double max_deg);

EncounterReport register_candidates(const Session& gt, const Session& query, const Pose& anchor_guess,
                                    const std::vector<LoopCandidate>& candidates, const EncounterParams& params);

EncounterReport build_encounters(const Session& gt, const Session& query, const Pose& anchor_guess,
                                 const EncounterParams& params = {});

/// Debug dump: `i j x y z qx qy qz qw fitness` per line.
void save_encounters(const std::vector<Encounter>& encounters, const std::filesystem::path& file);

}  // namespace bimslam
