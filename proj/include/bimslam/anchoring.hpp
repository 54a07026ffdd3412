#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "bimslam/anchor_pgo.hpp"
#include "bimslam/registration.hpp"
#include "bimslam/session.hpp"

namespace bimslam {

struct AnchoringParams {
    EncounterParams encounters;
    GraphParams graph;
    LmParams lm;
    /// Known query-to-world transform; when absent it is voted from descriptor matches.
    std::optional<Pose> initial_anchor;
    /// Descriptor matches registered per query keyframe during voting.
    std::size_t vote_top_k = 2;
    /// Agreement radius between anchor hypotheses during voting.
    double vote_tolerance_m = 1.0;
    double vote_tolerance_deg = 10.0;
    /// Accepted deviation of an encounter from the current anchored prediction.
    double consistency_m = 1.5;
    double consistency_deg = 10.0;
    /// Encounters whose solved residual exceeds these bounds are dropped.
    double prune_m = 0.3;
    double prune_deg = 3.0;
    int max_rounds = 12;
};

struct AnchoringResult {
    FactorGraph graph;
    Solution solution;
    std::vector<Encounter> encounters;
    Pose initial_anchor;
    bool anchor_from_vote = false;
    std::size_t votes = 0;
    int rounds = 0;
    std::size_t candidates = 0;
    /// Largest GT pose displacement over every solve performed.
    double gt_max_shift_m = 0.0;
    double gt_max_shift_deg = 0.0;

    std::vector<Pose> gt_world() const { return to_global(graph, solution, SessionRole::GroundTruth); }
    std::vector<Pose> query_world() const { return to_global(graph, solution, SessionRole::Query); }
    std::vector<Pose> query_local() const { return local_poses(graph, solution, SessionRole::Query); }
};

/// Query anchor hypotheses from descriptor matches: each registered match
/// implies gt_i ⊕ c ⊕ q_j⁻¹. Returns the hypothesis with the most agreeing
/// peers (ties: lowest fitness) and its support, or nullopt without matches.
std::optional<std::pair<Pose, std::size_t>> vote_anchor(const Session& gt, const Session& query,
                                                         PairRegistrar& registrar, const AnchoringParams& params);

/// Full anchoring: initial anchor, then rounds of candidate detection around
/// the current solution, registration, solve and residual pruning until the
/// encounter set stops changing.
AnchoringResult anchor_sessions(const Session& gt, const Session& query, const AnchoringParams& params = {});

}  // namespace bimslam
