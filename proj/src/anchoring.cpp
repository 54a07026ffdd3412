#include "bimslam/anchoring.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

namespace bimslam {

namespace {

using PairKey = std::pair<std::size_t, std::size_t>;

struct Attempt {
    Pose init;
    std::optional<Encounter> result;
};

class CachedRegistrar {
public:
    explicit CachedRegistrar(PairRegistrar& inner) : inner_(inner) {}

    std::optional<Encounter> get(std::size_t i, std::size_t j, const Pose& init) {
        auto& attempts = cache_[{i, j}];
        for (const Attempt& a : attempts) {
            if (translation_error_m(a.init, init) < 0.25 && rotation_error_deg(a.init, init) < 3.0) return a.result;
        }
        attempts.push_back({init, inner_.register_pair(i, j, init)});
        return attempts.back().result;
    }

private:
    PairRegistrar& inner_;
    std::map<PairKey, std::vector<Attempt>> cache_;
};

void track_shift(AnchoringResult& r, const Solution& s) {
    r.gt_max_shift_m = std::max(r.gt_max_shift_m, s.gt_max_shift_m);
    r.gt_max_shift_deg = std::max(r.gt_max_shift_deg, s.gt_max_shift_deg);
}

bool residual_within(const Encounter& e, const FactorGraph& g, const Values& v, double max_m, double max_deg) {
    const Pose predicted = between(compose(v[g.gt_anchor()], v[g.gt_pose(e.gt_index)]),
                                   compose(v[g.query_anchor()], v[g.query_pose(e.query_index)]));
    return translation_error_m(e.relative, predicted) <= max_m && rotation_error_deg(e.relative, predicted) <= max_deg;
}

std::set<PairKey> keys_of(const std::vector<Encounter>& es) {
    std::set<PairKey> out;
    for (const auto& e : es) out.emplace(e.gt_index, e.query_index);
    return out;
}

}  // namespace

std::optional<std::pair<Pose, std::size_t>> vote_anchor(const Session& gt, const Session& query,
                                                         PairRegistrar& registrar, const AnchoringParams& params) {
    struct Hypothesis {
        Pose anchor;
        double fitness;
    };
    std::vector<Hypothesis> hyps;
    std::vector<Descriptor> db;
    for (const auto& kf : gt.keyframes) db.push_back(kf.descriptor);
    QueryParams qp;
    qp.sim_threshold = params.encounters.candidates.sc_threshold;
    qp.top_k = params.vote_top_k;
    for (std::size_t j = 0; j < query.size(); ++j) {
        for (const Candidate& c : bimslam::query(db, query.keyframes[j].descriptor, qp)) {
            const Pose init = Pose::from_xyz_yaw(0.0, 0.0, 0.0, shift_to_yaw(c.shift, db[c.index].sectors()));
            const auto e = registrar.register_pair(c.index, j, init);
            if (!e) continue;
            const Pose anchor =
                compose(compose(gt.graph.nodes[c.index], e->relative), inverse(query.graph.nodes[j]));
            hyps.push_back({anchor, e->fitness});
        }
    }
    if (hyps.empty()) return std::nullopt;

    std::size_t best = 0;
    std::size_t best_support = 0;
    for (std::size_t a = 0; a < hyps.size(); ++a) {
        std::size_t support = 0;
        for (const auto& h : hyps) {
            if (translation_error_m(hyps[a].anchor, h.anchor) <= params.vote_tolerance_m &&
                rotation_error_deg(hyps[a].anchor, h.anchor) <= params.vote_tolerance_deg) {
                ++support;
            }
        }
        if (support > best_support || (support == best_support && hyps[a].fitness < hyps[best].fitness)) {
            best = a;
            best_support = support;
        }
    }
    return std::make_pair(hyps[best].anchor, best_support);
}

AnchoringResult anchor_sessions(const Session& gt, const Session& query, const AnchoringParams& params) {
    AnchoringResult result;
    PairRegistrar registrar(gt, query, params.encounters);
    CachedRegistrar cached(registrar);

    if (params.initial_anchor) {
        result.initial_anchor = *params.initial_anchor;
    } else if (auto voted = vote_anchor(gt, query, registrar, params)) {
        result.initial_anchor = voted->first;
        result.anchor_from_vote = true;
        result.votes = voted->second;
    }

    GraphParams gp = params.graph;
    gp.anchor_guess = result.initial_anchor;

    // Working copy of the query whose nodes follow the current solution.
    Session current = query;
    Pose anchor = result.initial_anchor;
    std::set<PairKey> previous;
    bool solved = false;

    for (int round = 0; round < std::max(1, params.max_rounds); ++round) {
        result.rounds = round + 1;
        const auto candidates = detect_candidates(gt, current, anchor, params.encounters.candidates);
        result.candidates = std::max(result.candidates, candidates.size());

        std::vector<Encounter> encounters;
        for (const LoopCandidate& c : candidates) {
            const Pose& gi = gt.graph.nodes[c.gt_index];
            const Pose qw = compose(anchor, current.graph.nodes[c.query_index]);
            auto accept = [&](const Pose& init) -> std::optional<Encounter> {
                auto e = cached.get(c.gt_index, c.query_index, init);
                if (e && !consistent_with_prediction(gi, qw, e->relative, params.consistency_m,
                                                     params.consistency_deg)) {
                    return std::nullopt;
                }
                return e;
            };
            std::optional<Encounter> e = accept(c.init);
            if (!e && c.from_descriptor && c.proximity_init) e = accept(*c.proximity_init);
            if (e) encounters.push_back(*e);
        }

        FactorGraph graph = build_graph(gt, query, encounters, gp);
        Values init = initial_values(gt, query, anchor);
        for (std::size_t j = 0; j < query.size(); ++j) init[graph.query_pose(j)] = current.graph.nodes[j];
        Solution sol = optimize(graph, init, params.lm);
        track_shift(result, sol);

        std::vector<Encounter> kept;
        for (const auto& e : encounters) {
            if (residual_within(e, graph, sol.values, params.prune_m, params.prune_deg)) kept.push_back(e);
        }
        if (kept.size() != encounters.size()) {
            encounters = std::move(kept);
            graph = build_graph(gt, query, encounters, gp);
            sol = optimize(graph, init, params.lm);
            track_shift(result, sol);
        }

        anchor = sol.values[graph.query_anchor()];
        for (std::size_t j = 0; j < query.size(); ++j) current.graph.nodes[j] = sol.values[graph.query_pose(j)];

        result.graph = std::move(graph);
        result.solution = std::move(sol);
        result.encounters = encounters;
        solved = true;

        const auto keys = keys_of(encounters);
        if (keys == previous) break;
        previous = keys;
    }
    if (!solved) {
        result.graph = build_graph(gt, query, {}, gp);
        result.solution = optimize(result.graph, initial_values(gt, query, anchor), params.lm);
        track_shift(result, result.solution);
    }
    return result;
}

}  // namespace bimslam
