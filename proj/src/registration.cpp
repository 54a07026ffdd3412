#include "bimslam/registration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <tuple>

#include <Eigen/SVD>

#include "bimslam/error.hpp"

namespace bimslam {

Pose kabsch(const std::vector<Eigen::Vector3d>& p, const std::vector<Eigen::Vector3d>& q) {
    const double n = static_cast<double>(p.size());
    Eigen::Vector3d pm = Eigen::Vector3d::Zero();
    Eigen::Vector3d qm = Eigen::Vector3d::Zero();
    for (std::size_t k = 0; k < p.size(); ++k) {
        pm += p[k];
        qm += q[k];
    }
    pm /= n;
    qm /= n;
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (std::size_t k = 0; k < p.size(); ++k) h += (p[k] - pm) * (q[k] - qm).transpose();
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    const Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();
    return {qm - r * pm, Eigen::Quaterniond(r)};
}

IcpResult icp(const std::vector<Eigen::Vector3d>& source, const KdTree& target, const Pose& init,
              const IcpParams& params) {
    if (source.size() < 10 || target.size() < 10) {
        throw TooFewPoints("icp needs at least 10 points per cloud (source " + std::to_string(source.size()) +
                           ", target " + std::to_string(target.size()) + ")");
    }
    const double gate2 = params.max_corr_dist * params.max_corr_dist;
    IcpResult result;
    result.transform = init;

    std::vector<Eigen::Vector3d> moved(source.size());
    std::vector<std::size_t> prev_inliers;
    std::vector<std::size_t> inliers;
    std::vector<Eigen::Vector3d> src_pts, dst_pts;

    auto apply = [&](const Pose& t) {
        const Eigen::Matrix3d r = t.rotation_matrix();
        for (std::size_t k = 0; k < source.size(); ++k) moved[k] = r * source[k] + t.translation();
    };

    apply(result.transform);
    for (int it = 0; it < params.max_iterations; ++it) {
        IcpIteration rec;
        inliers.clear();
        src_pts.clear();
        dst_pts.clear();
        std::vector<KdTree::Neighbor> nn(source.size());
        for (std::size_t k = 0; k < source.size(); ++k) nn[k] = target.nearest(moved[k]);
        if (!prev_inliers.empty()) {
            double sum = 0.0;
            for (std::size_t k : prev_inliers) sum += nn[k].sq_dist;
            rec.retained_mse = sum / static_cast<double>(prev_inliers.size());
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < source.size(); ++k) {
            if (nn[k].sq_dist > gate2) continue;
            inliers.push_back(k);
            src_pts.push_back(moved[k]);
            dst_pts.push_back(target.point(nn[k].index));
            sum += nn[k].sq_dist;
        }
        if (inliers.size() < 3) throw NoCorrespondences("no correspondences within the gate");
        rec.matched_mse = sum / static_cast<double>(inliers.size());
        rec.inliers = inliers.size();

        const Pose delta = kabsch(src_pts, dst_pts);
        result.transform = compose(delta, result.transform);
        apply(result.transform);
        double after = 0.0;
        for (std::size_t m = 0; m < inliers.size(); ++m) after += (moved[inliers[m]] - dst_pts[m]).squaredNorm();
        rec.aligned_mse = after / static_cast<double>(inliers.size());
        result.history.push_back(rec);
        result.iterations = it + 1;
        prev_inliers = inliers;

        const double step = delta.translation().norm() + rotation_angle(delta.rotation());
        if (step < params.convergence_eps) {
            result.converged = true;
            break;
        }
    }

    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < source.size(); ++k) {
        const auto nb = target.nearest(moved[k]);
        if (nb.sq_dist > gate2) continue;
        sum += nb.sq_dist;
        ++count;
    }
    if (count == 0) throw NoCorrespondences("no correspondences within the gate after alignment");
    result.fitness = sum / static_cast<double>(count);
    result.overlap = static_cast<double>(count) / static_cast<double>(source.size());
    return result;
}

IcpResult icp(const PointCloud& source, const PointCloud& target, const Pose& init, const IcpParams& params) {
    if (source.size() < 10 || target.size() < 10) {
        throw TooFewPoints("icp needs at least 10 points per cloud");
    }
    return icp(to_double(source), KdTree(to_double(target)), init, params);
}

Matrix6d adaptive_covariance(double fitness, double floor) {
    if (fitness < 0.0) throw PreconditionViolation("fitness must be >= 0");
    const double s = std::max(fitness, floor);
    Vector6d d;
    d << s, s, s, 4.0 * s, 4.0 * s, 4.0 * s;
    return d.asDiagonal();
}

std::vector<LoopCandidate> detect_candidates(const Session& gt, const Session& query, const Pose& anchor_guess,
                                             const CandidateParams& params) {
    std::map<std::pair<std::size_t, std::size_t>, LoopCandidate> merged;

    std::vector<Descriptor> db;
    db.reserve(gt.size());
    for (const auto& kf : gt.keyframes) db.push_back(kf.descriptor);
    if (!db.empty()) {
        QueryParams qp;
        qp.sim_threshold = params.sc_threshold;
        qp.top_k = params.sc_top_k;
        for (std::size_t j = 0; j < query.size(); ++j) {
            for (const Candidate& c : bimslam::query(db, query.keyframes[j].descriptor, qp)) {
                LoopCandidate lc;
                lc.gt_index = c.index;
                lc.query_index = j;
                lc.init = Pose::from_xyz_yaw(0.0, 0.0, 0.0, shift_to_yaw(c.shift, db[c.index].sectors()));
                lc.from_descriptor = true;
                merged.emplace(std::make_pair(c.index, j), lc);
            }
        }
    }

    for (std::size_t j = 0; j < query.graph.nodes.size(); ++j) {
        const Pose qw = compose(anchor_guess, query.graph.nodes[j]);
        std::vector<std::pair<double, std::size_t>> near;
        for (std::size_t i = 0; i < gt.graph.nodes.size(); ++i) {
            const double d = translation_error_m(gt.graph.nodes[i], qw);
            if (d <= params.radius) near.emplace_back(d, i);
        }
        std::sort(near.begin(), near.end());
        if (params.max_proximity_per_query > 0 && near.size() > params.max_proximity_per_query) {
            near.resize(params.max_proximity_per_query);
        }
        for (const auto& [d, i] : near) {
            const Pose guess = between(gt.graph.nodes[i], qw);
            auto [it, inserted] = merged.try_emplace(std::make_pair(i, j));
            if (inserted) {
                it->second.gt_index = i;
                it->second.query_index = j;
                it->second.init = guess;
            }
            it->second.proximity_init = guess;
        }
    }

    std::vector<LoopCandidate> out;
    out.reserve(merged.size());
    for (auto& [key, c] : merged) out.push_back(c);
    return out;
}

PointCloud gt_submap(const Session& gt, std::size_t i, std::size_t neighbors) {
    PointCloud merged;
    const std::size_t lo = i >= neighbors ? i - neighbors : 0;
    const std::size_t hi = std::min(gt.size() - 1, i + neighbors);
    for (std::size_t k = lo; k <= hi; ++k) {
        if (k == i) {
            append(merged, gt.keyframes[k].cloud);
        } else {
            append(merged, transform_cloud(gt.keyframes[k].cloud, between(gt.graph.nodes[i], gt.graph.nodes[k])));
        }
    }
    return merged;
}

IcpResult icp_coarse_to_fine(const std::vector<Eigen::Vector3d>& source, const KdTree& target, const Pose& init,
                             const EncounterParams& params) {
    if (params.gate_schedule.empty()) return icp(source, target, init, params.icp);
    IcpResult res;
    Pose current = init;
    std::vector<IcpIteration> history;
    int iterations = 0;
    for (std::size_t k = 0; k < params.gate_schedule.size(); ++k) {
        IcpParams stage = params.icp;
        stage.max_corr_dist = params.icp.max_corr_dist * params.gate_schedule[k];
        if (k + 1 < params.gate_schedule.size() && params.coarse_max_iterations > 0) {
            stage.max_iterations = std::min(stage.max_iterations, params.coarse_max_iterations);
        }
        res = icp(source, target, current, stage);
        current = res.transform;
        history.insert(history.end(), res.history.begin(), res.history.end());
        iterations += res.iterations;
    }
    res.history = std::move(history);
    res.iterations = iterations;
    return res;
}

PairRegistrar::PairRegistrar(const Session& gt, const Session& query, const EncounterParams& params)
    : gt_(gt), query_(query), params_(params) {}

const KdTree& PairRegistrar::target(std::size_t i) {
    auto it = targets_.find(i);
    if (it == targets_.end()) {
        PointCloud sub = voxel_downsample(gt_submap(gt_, i, params_.submap_neighbors), params_.target_leaf);
        it = targets_.emplace(i, KdTree(to_double(sub))).first;
    }
    return it->second;
}

const std::vector<Eigen::Vector3d>& PairRegistrar::source(std::size_t j) {
    auto it = sources_.find(j);
    if (it == sources_.end()) {
        it = sources_.emplace(j, to_double(voxel_downsample(query_.keyframes[j].cloud, params_.source_leaf))).first;
    }
    return it->second;
}

std::optional<Encounter> PairRegistrar::register_pair(std::size_t gt_index, std::size_t query_index,
                                                      const Pose& init) {
    if (gt_index >= gt_.size() || query_index >= query_.size()) {
        throw IndexError("loop candidate (" + std::to_string(gt_index) + ", " + std::to_string(query_index) +
                         ") references a missing keyframe");
    }
    const auto& src = source(query_index);
    const KdTree& dst = target(gt_index);
    if (src.size() < 10 || dst.size() < 10) return std::nullopt;
    IcpResult res;
    try {
        res = icp_coarse_to_fine(src, dst, init, params_);
    } catch (const NoCorrespondences&) {
        return std::nullopt;
    }
    if (res.fitness > params_.icp.fitness_threshold || res.overlap < params_.min_overlap) return std::nullopt;
    return Encounter{gt_index, query_index, res.transform, adaptive_covariance(res.fitness), res.fitness};
}

bool consistent_with_prediction(const Pose& gt_pose, const Pose& query_world, const Pose& measured, double max_m,
                                double max_deg) {
    const Pose predicted = between(gt_pose, query_world);
    if (max_m > 0.0 && translation_error_m(predicted, measured) > max_m) return false;
    if (max_deg > 0.0 && rotation_error_deg(predicted, measured) > max_deg) return false;
    return true;
}

EncounterReport register_candidates(const Session& gt, const Session& query, const Pose& anchor_guess,
                                    const std::vector<LoopCandidate>& candidates, const EncounterParams& params) {
    EncounterReport report;
    report.candidates = candidates.size();
    PairRegistrar registrar(gt, query, params);

    auto attempt = [&](const LoopCandidate& c, const Pose& init) -> std::optional<Encounter> {
        std::optional<Encounter> e = registrar.register_pair(c.gt_index, c.query_index, init);
        if (e && !consistent_with_prediction(gt.graph.nodes[c.gt_index],
                                             compose(anchor_guess, query.graph.nodes[c.query_index]), e->relative,
                                             params.max_prediction_error_m, params.max_prediction_error_deg)) {
            return std::nullopt;
        }
        return e;
    };

    for (const LoopCandidate& c : candidates) {
        std::optional<Encounter> e = attempt(c, c.init);
        if (!e && c.from_descriptor && c.proximity_init) e = attempt(c, *c.proximity_init);
        if (e) {
            report.encounters.push_back(*e);
        } else {
            ++report.rejected;
        }
    }
    std::sort(report.encounters.begin(), report.encounters.end(), [](const Encounter& a, const Encounter& b) {
        return std::tie(a.gt_index, a.query_index) < std::tie(b.gt_index, b.query_index);
    });
    return report;
}

EncounterReport build_encounters(const Session& gt, const Session& query, const Pose& anchor_guess,
                                 const EncounterParams& params) {
    if (gt.size() == 0 || query.size() == 0) return {};
    return register_candidates(gt, query, anchor_guess, detect_candidates(gt, query, anchor_guess, params.candidates),
                               params);
}

void save_encounters(const std::vector<Encounter>& encounters, const std::filesystem::path& file) {
    std::ofstream os(file, std::ios::trunc);
    if (!os) throw Error("cannot write " + file.string());
    char buf[64];
    for (const auto& e : encounters) {
        std::snprintf(buf, sizeof(buf), "%.9g", e.fitness);
        os << e.gt_index << ' ' << e.query_index << ' ' << format_pose(e.relative) << ' ' << buf << '\n';
    }
}

}  // namespace bimslam
