#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "bimslam/point_cloud.hpp"
#include "bimslam/registration.hpp"
#include "bimslam/se3.hpp"
#include "bimslam/session.hpp"

namespace bimslam {

enum class SessionRole { GroundTruth, Query };

enum class FactorType { Prior, Between, AnchorLoop };

/// Residual conventions (all 6-vectors, translation first):
///   Prior:      log(between(measured, x))
///   Between:    log(between(measured, between(xa, xb)))
///   AnchorLoop: log(between(c, between(dGT ⊕ xi, dQ ⊕ xj)))
struct Factor {
    FactorType type = FactorType::Prior;
    std::array<std::size_t, 4> vars{};  // Prior: [x]; Between: [a, b]; AnchorLoop: [xi, xj, dGT, dQ]
    Pose measured;
    Matrix6d information = Matrix6d::Identity();

    std::size_t arity() const { return type == FactorType::Prior ? 1 : type == FactorType::Between ? 2 : 4; }
};

/// Variables: GT poses [0, n_gt), query poses [n_gt, n_gt + n_query), then
/// the GT anchor and the query anchor.
struct FactorGraph {
    std::size_t n_gt = 0;
    std::size_t n_query = 0;
    std::vector<Factor> factors;

    std::size_t gt_pose(std::size_t i) const { return i; }
    std::size_t query_pose(std::size_t j) const { return n_gt + j; }
    std::size_t gt_anchor() const { return n_gt + n_query; }
    std::size_t query_anchor() const { return n_gt + n_query + 1; }
    std::size_t variable_count() const { return n_gt + n_query + 2; }
    std::size_t count(FactorType t) const;
};

using Values = std::vector<Pose>;

struct GraphParams {
    /// Stand-in for a vanishing prior variance; keeps the normal equations conditioned.
    double pinned_var = 1e-12;
    /// Variance of the query anchor prior.
    double loose_var = 1e4;
    Pose anchor_guess;
    /// Also pin query node 0 at its stored local value, fixing the gauge
    /// shared by the query anchor and the query trajectory.
    bool pin_query_origin = true;
};

/// Inverse of a covariance after clamping its eigenvalues to [min_var, 1/min_var].
Matrix6d information_from_covariance(const Matrix6d& covariance, double min_var = 1e-12);

/// Priors pin every GT pose and the GT anchor; the query anchor gets a loose
/// prior at the guess; stored edges of both sessions become Between factors;
/// each encounter becomes an AnchorLoop factor. Throws IndexError on bad indices.
FactorGraph build_graph(const Session& gt, const Session& query, const std::vector<Encounter>& encounters,
                        const GraphParams& params = {});

/// Stored node poses, identity GT anchor, query anchor at `anchor_guess`.
Values initial_values(const Session& gt, const Session& query, const Pose& anchor_guess);

Vector6d anchor_residual(const Pose& xi, const Pose& xj, const Pose& d_gt, const Pose& d_q, const Pose& c);
Vector6d factor_residual(const Factor& f, const Values& values);
/// Sum over factors of r' * information * r.
double total_error(const FactorGraph& graph, const Values& values);

struct LmParams {
    int max_iterations = 100;
    double relative_tolerance = 1e-9;
    double step_tolerance = 1e-10;
    double initial_lambda = 1e-4;
    double max_lambda = 1e10;
    double fd_step = 1e-6;
};

struct Solution {
    Values values;
    double initial_error = 0.0;
    double final_error = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Accepted-step error sequence, starting with the initial error.
    std::vector<double> error_history;
    /// Largest movement of any GT pose away from its pinned prior value.
    double gt_max_shift_m = 0.0;
    double gt_max_shift_deg = 0.0;
};

/// Levenberg-Marquardt on the SE(3) manifold (x <- x ⊕ exp(delta)) with
/// central-difference Jacobians. Throws SingularSystem when damping cannot
/// make the normal equations positive definite.
Solution optimize(const FactorGraph& graph, const Values& init, const LmParams& params = {});

/// Each pose of the chosen session left-composed with its optimized anchor.
std::vector<Pose> to_global(const FactorGraph& graph, const Solution& solution, SessionRole role);
/// The session's local (un-anchored) optimized poses.
std::vector<Pose> local_poses(const FactorGraph& graph, const Solution& solution, SessionRole role);

/// Union of keyframe clouds placed at the given world poses. Throws LengthMismatch.
PointCloud assemble_map(const Session& session, const std::vector<Pose>& world_trajectory);

}  // namespace bimslam
