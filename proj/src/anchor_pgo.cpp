#include "bimslam/anchor_pgo.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "bimslam/error.hpp"

namespace bimslam {

std::size_t FactorGraph::count(FactorType t) const {
    return static_cast<std::size_t>(
        std::count_if(factors.begin(), factors.end(), [t](const Factor& f) { return f.type == t; }));
}

Matrix6d information_from_covariance(const Matrix6d& covariance, double min_var) {
    const Matrix6d sym = 0.5 * (covariance + covariance.transpose());
    const Eigen::SelfAdjointEigenSolver<Matrix6d> eig(sym);
    Vector6d inv = eig.eigenvalues();
    for (int k = 0; k < 6; ++k) inv[k] = 1.0 / std::clamp(inv[k], min_var, 1.0 / min_var);
    const Matrix6d info = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    return 0.5 * (info + info.transpose());
}

namespace {

Matrix6d pinned_information(double var) { return Matrix6d::Identity() / var; }

void add_edges(FactorGraph& g, const PoseGraph& pg, std::size_t offset) {
    auto add = [&](const GraphEdge& e) {
        Factor f;
        f.type = FactorType::Between;
        f.vars[0] = offset + e.from;
        f.vars[1] = offset + e.to;
        f.measured = e.relative;
        f.information = e.information;
        g.factors.push_back(f);
    };
    for (const auto& e : pg.odometry_edges) add(e);
    for (const auto& e : pg.loop_edges) add(e);
}

Pose value_of(const Factor& f, const Values& v, std::size_t slot) { return v[f.vars[slot]]; }

}  // namespace

FactorGraph build_graph(const Session& gt, const Session& query, const std::vector<Encounter>& encounters,
                        const GraphParams& params) {
    FactorGraph g;
    g.n_gt = gt.graph.nodes.size();
    g.n_query = query.graph.nodes.size();

    for (const Encounter& e : encounters) {
        if (e.gt_index >= g.n_gt || e.query_index >= g.n_query) {
            throw IndexError("encounter (" + std::to_string(e.gt_index) + ", " + std::to_string(e.query_index) +
                             ") is out of range for sessions of size " + std::to_string(g.n_gt) + " and " +
                             std::to_string(g.n_query));
        }
    }

    const Matrix6d pinned = pinned_information(params.pinned_var);
    for (std::size_t i = 0; i < g.n_gt; ++i) {
        g.factors.push_back({FactorType::Prior, {g.gt_pose(i)}, gt.graph.nodes[i], pinned});
    }
    g.factors.push_back({FactorType::Prior, {g.gt_anchor()}, Pose::identity(), pinned});
    g.factors.push_back(
        {FactorType::Prior, {g.query_anchor()}, params.anchor_guess, Matrix6d::Identity() / params.loose_var});
    if (params.pin_query_origin && g.n_query > 0) {
        g.factors.push_back({FactorType::Prior, {g.query_pose(0)}, query.graph.nodes[0], pinned});
    }

    add_edges(g, gt.graph, 0);
    add_edges(g, query.graph, g.n_gt);

    for (const Encounter& e : encounters) {
        Factor f;
        f.type = FactorType::AnchorLoop;
        f.vars = {g.gt_pose(e.gt_index), g.query_pose(e.query_index), g.gt_anchor(), g.query_anchor()};
        f.measured = e.relative;
        f.information = information_from_covariance(e.covariance, params.pinned_var);
        g.factors.push_back(f);
    }
    return g;
}

Values initial_values(const Session& gt, const Session& query, const Pose& anchor_guess) {
    Values v;
    v.reserve(gt.graph.nodes.size() + query.graph.nodes.size() + 2);
    v.insert(v.end(), gt.graph.nodes.begin(), gt.graph.nodes.end());
    v.insert(v.end(), query.graph.nodes.begin(), query.graph.nodes.end());
    v.push_back(Pose::identity());
    v.push_back(anchor_guess);
    return v;
}

Vector6d anchor_residual(const Pose& xi, const Pose& xj, const Pose& d_gt, const Pose& d_q, const Pose& c) {
    const Pose predicted = between(compose(d_gt, xi), compose(d_q, xj));
    return log(between(c, predicted)).vector();
}

Vector6d factor_residual(const Factor& f, const Values& values) {
    switch (f.type) {
        case FactorType::Prior:
            return log(between(f.measured, value_of(f, values, 0))).vector();
        case FactorType::Between:
            return log(between(f.measured, between(value_of(f, values, 0), value_of(f, values, 1)))).vector();
        case FactorType::AnchorLoop:
            return anchor_residual(value_of(f, values, 0), value_of(f, values, 1), value_of(f, values, 2),
                                   value_of(f, values, 3), f.measured);
    }
    return Vector6d::Zero();
}

double total_error(const FactorGraph& graph, const Values& values) {
    double sum = 0.0;
    for (const Factor& f : graph.factors) {
        const Vector6d r = factor_residual(f, values);
        sum += r.dot(f.information * r);
    }
    return sum;
}

namespace {

struct PinShift {
    double m = 0.0;
    double deg = 0.0;
};

PinShift gt_pin_shift(const FactorGraph& graph, const Values& values) {
    PinShift s;
    for (const Factor& f : graph.factors) {
        if (f.type != FactorType::Prior) continue;
        const std::size_t v = f.vars[0];
        if (v >= graph.n_gt && v != graph.gt_anchor()) continue;
        s.m = std::max(s.m, translation_error_m(f.measured, values[v]));
        s.deg = std::max(s.deg, rotation_error_deg(f.measured, values[v]));
    }
    return s;
}

struct Linearization {
    Eigen::SparseMatrix<double> hessian;
    Eigen::VectorXd gradient;
};

Linearization linearize(const FactorGraph& graph, const Values& values, double h) {
    const std::size_t dim = 6 * graph.variable_count();
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    Values work = values;
    for (const Factor& f : graph.factors) {
        const std::size_t n = f.arity();
        const Vector6d r = factor_residual(f, values);
        std::array<Matrix6d, 4> jac;
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t var = f.vars[s];
            for (int k = 0; k < 6; ++k) {
                Vector6d d = Vector6d::Zero();
                d[k] = h;
                work[var] = retract(values[var], d);
                const Vector6d rp = factor_residual(f, work);
                work[var] = retract(values[var], -d);
                const Vector6d rm = factor_residual(f, work);
                jac[s].col(k) = (rp - rm) / (2.0 * h);
            }
            work[var] = values[var];
        }
        for (std::size_t a = 0; a < n; ++a) {
            const Eigen::Index ra = static_cast<Eigen::Index>(6 * f.vars[a]);
            const Eigen::Matrix<double, 6, 6> jt_info = jac[a].transpose() * f.information;
            grad.segment<6>(ra) += jt_info * r;
            for (std::size_t b = 0; b < n; ++b) {
                const Eigen::Index rb = static_cast<Eigen::Index>(6 * f.vars[b]);
                const Matrix6d block = jt_info * jac[b];
                for (int i = 0; i < 6; ++i) {
                    for (int j = 0; j < 6; ++j) {
                        if (block(i, j) != 0.0) triplets.emplace_back(ra + i, rb + j, block(i, j));
                    }
                }
            }
        }
    }
    Linearization lin;
    lin.hessian.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    lin.hessian.setFromTriplets(triplets.begin(), triplets.end());
    lin.gradient = std::move(grad);
    return lin;
}

}  // namespace

Solution optimize(const FactorGraph& graph, const Values& init, const LmParams& params) {
    if (init.size() != graph.variable_count()) {
        throw PreconditionViolation("initial values cover " + std::to_string(init.size()) + " of " +
                                    std::to_string(graph.variable_count()) + " variables");
    }
    Solution sol;
    sol.values = init;
    double error = total_error(graph, sol.values);
    sol.initial_error = error;
    sol.error_history.push_back(error);
    double lambda = params.initial_lambda;

    if (error <= 0.0) {
        sol.converged = true;
    }
    while (!sol.converged && sol.iterations < params.max_iterations) {
        ++sol.iterations;
        const Linearization lin = linearize(graph, sol.values, params.fd_step);
        const Eigen::VectorXd diag = lin.hessian.diagonal();

        bool accepted = false;
        while (!accepted) {
            Eigen::SparseMatrix<double> damped = lin.hessian;
            for (Eigen::Index k = 0; k < diag.size(); ++k) damped.coeffRef(k, k) += lambda * diag[k];
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(damped);
            Eigen::VectorXd delta;
            bool ok = solver.info() == Eigen::Success && solver.vectorD().minCoeff() > 0.0;
            if (ok) {
                delta = solver.solve(-lin.gradient);
                ok = solver.info() == Eigen::Success && delta.allFinite();
            }
            if (!ok) {
                lambda *= 10.0;
                if (lambda > params.max_lambda) {
                    throw SingularSystem("normal equations are rank deficient beyond damping repair");
                }
                continue;
            }

            Values trial = sol.values;
            for (std::size_t v = 0; v < graph.variable_count(); ++v) {
                trial[v] = retract(sol.values[v], delta.segment<6>(static_cast<Eigen::Index>(6 * v)));
            }
            double trial_error = 0.0;
            try {
                trial_error = total_error(graph, trial);
            } catch (const GimbalBoundary&) {
                trial_error = std::numeric_limits<double>::infinity();
            }

            if (trial_error < error) {
                const double decrease = (error - trial_error) / std::max(error, 1e-300);
                sol.values = std::move(trial);
                error = trial_error;
                sol.error_history.push_back(error);
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (decrease < params.relative_tolerance || delta.norm() < params.step_tolerance || error <= 0.0) {
                    sol.converged = true;
                }
            } else {
                if (delta.norm() < params.step_tolerance) {
                    sol.converged = true;
                    break;
                }
                lambda *= 10.0;
                if (lambda > params.max_lambda) {
                    // No descent direction left at this damping: a stationary point.
                    sol.converged = true;
                    break;
                }
            }
        }
    }
    sol.final_error = error;
    const PinShift shift = gt_pin_shift(graph, sol.values);
    sol.gt_max_shift_m = shift.m;
    sol.gt_max_shift_deg = shift.deg;
    return sol;
}

std::vector<Pose> local_poses(const FactorGraph& graph, const Solution& solution, SessionRole role) {
    const std::size_t begin = role == SessionRole::GroundTruth ? 0 : graph.n_gt;
    const std::size_t n = role == SessionRole::GroundTruth ? graph.n_gt : graph.n_query;
    return {solution.values.begin() + static_cast<std::ptrdiff_t>(begin),
            solution.values.begin() + static_cast<std::ptrdiff_t>(begin + n)};
}

std::vector<Pose> to_global(const FactorGraph& graph, const Solution& solution, SessionRole role) {
    const Pose& anchor =
        solution.values[role == SessionRole::GroundTruth ? graph.gt_anchor() : graph.query_anchor()];
    std::vector<Pose> out = local_poses(graph, solution, role);
    for (Pose& p : out) p = compose(anchor, p);
    return out;
}

PointCloud assemble_map(const Session& session, const std::vector<Pose>& world_trajectory) {
    if (world_trajectory.size() != session.keyframes.size()) {
        throw LengthMismatch("trajectory has " + std::to_string(world_trajectory.size()) + " poses for " +
                             std::to_string(session.keyframes.size()) + " keyframes");
    }
    PointCloud map;
    for (std::size_t i = 0; i < world_trajectory.size(); ++i) {
        append(map, transform_cloud(session.keyframes[i].cloud, world_trajectory[i]));
    }
    return map;
}

}  // namespace bimslam
