// Command line front end: simulate, drift, anchor, diff, eval.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bimslam/anchoring.hpp"
#include "bimslam/change_detection.hpp"
#include "bimslam/error.hpp"
#include "bimslam/evaluation.hpp"
#include "bimslam/simulator.hpp"

namespace fs = std::filesystem;
using namespace bimslam;

namespace {

std::vector<double> parse_list(const std::string& text, std::size_t expected, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error(flag + ": cannot parse '" + text + "'");
        }
    }
    if (out.size() != expected) {
        throw Error(flag + ": expected " + std::to_string(expected) + " comma-separated values, got '" + text + "'");
    }
    return out;
}

void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw Error("file not found: " + p.string());
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream os(file, std::ios::trunc);
    if (!os) throw Error("cannot write " + file.string());
    os << text;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

struct SimulateOptions {
    std::string model, out, goals, extra, interior;
    double resolution = 0.1;
    double plan_resolution = 0.5;
    double clearance = 0.0;
    std::size_t stride = 4;
    double spacing = 1.0;
    double speed = 0.5;
    double scan_period = 0.1;
    std::uint64_t seed = 1;
};

int run_simulate(const SimulateOptions& o) {
    require_file(o.model);
    const BuildingModel model = load_obj(o.model);
    validate_model(model);

    std::vector<Waypoint> goals;
    if (!o.goals.empty()) {
        require_file(o.goals);
        goals = load_goals(o.goals);
    } else {
        Eigen::Vector2d seed;
        if (!o.interior.empty()) {
            const auto v = parse_list(o.interior, 2, "--interior");
            seed = {v[0], v[1]};
        } else {
            Eigen::Vector2d lo = model.vertices.front().head<2>(), hi = lo;
            for (const auto& v : model.vertices) {
                lo = lo.cwiseMin(v.head<2>());
                hi = hi.cwiseMax(v.head<2>());
            }
            seed = 0.5 * (lo + hi);
        }
        const OccupancyGrid fine = rasterize(model, seed, {o.resolution, 0.2, 1.5});
        const OccupancyGrid plan = rasterize(model, seed, {o.plan_resolution, 0.2, 1.5});
        const auto cells = coverage_path(plan, plan.cell_of(seed), o.clearance);
        goals = route_goals(fine, to_waypoints(plan, cells), o.stride);
    }

    BuildingModel world = model;
    if (!o.extra.empty()) {
        require_file(o.extra);
        world.merge(load_obj(o.extra));
    }

    SimulationParams sp;
    sp.speed = o.speed;
    sp.scan_period = o.scan_period;
    sp.keyframe_spacing = o.spacing;
    sp.seed = o.seed;
    const Session s = simulate_session(world, goals, LidarSpec{}, sp);
    save_session(s, o.out);
    save_goals(goals, fs::path(o.out) / "goals.txt");
    save_trajectory(s.graph.nodes, fs::path(o.out) / "trajectory.txt");
    std::cout << "simulated " << s.size() << " keyframes from " << goals.size() << " goals into " << o.out << '\n';
    return 0;
}

struct DriftOptions {
    std::string in, out, offset;
    double trans_drift = 0.005;
    double yaw_drift = 0.002;
    double trans_noise = 0.0;
    double rot_noise = 0.0;
    std::uint64_t seed = 1;
};

int run_drift(const DriftOptions& o) {
    const Session gt = load_session(o.in);
    DriftModel dm;
    dm.trans_drift_per_m = o.trans_drift;
    dm.yaw_drift_per_m = o.yaw_drift;
    dm.trans_noise_sigma = o.trans_noise;
    dm.rot_noise_sigma = o.rot_noise;
    dm.seed = o.seed;
    Session q = inject_drift(gt, dm);
    if (!o.offset.empty()) {
        const auto v = parse_list(o.offset, 4, "--offset");
        q = reframe(q, Pose::from_xyz_yaw(v[0], v[1], v[2], v[3]));
    }
    q.frame_label = "local";
    save_session(q, o.out);
    save_trajectory(q.graph.nodes, fs::path(o.out) / "trajectory.txt");
    std::cout << "drifted session with " << q.size() << " keyframes written to " << o.out << '\n';
    return 0;
}

struct AnchorOptions {
    std::string ref, query, out, initial;
    double sc_threshold = 0.6;
    double sc_radius = 10.0;
    double fitness_threshold = 0.04;
    int rounds = 12;
};

int run_anchor(const AnchorOptions& o) {
    const Session gt = load_session(o.ref);
    const Session q = load_session(o.query);
    AnchoringParams ap;
    ap.encounters.candidates.sc_threshold = o.sc_threshold;
    ap.encounters.candidates.radius = o.sc_radius;
    ap.encounters.icp.fitness_threshold = o.fitness_threshold;
    ap.max_rounds = o.rounds;
    if (!o.initial.empty()) {
        const auto v = parse_list(o.initial, 4, "--initial");
        ap.initial_anchor = Pose::from_xyz_yaw(v[0], v[1], v[2], v[3]);
    }
    const AnchoringResult r = anchor_sessions(gt, q, ap);

    const fs::path out(o.out);
    fs::create_directories(out);
    const auto query_world = r.query_world();
    save_trajectory(r.gt_world(), out / "gt.txt");
    save_trajectory(r.query_local(), out / "query_local.txt");
    save_trajectory(query_world, out / "query_world.txt");
    save_encounters(r.encounters, out / "encounters.txt");
    save_cloud(assemble_map(q, query_world), out / "map.pc");

    const Pose& anchor = r.solution.values[r.graph.query_anchor()];
    std::ostringstream rep;
    rep << "gt_keyframes=" << gt.size() << '\n'
        << "query_keyframes=" << q.size() << '\n'
        << "initial_anchor=" << format_pose(r.initial_anchor) << '\n'
        << "initial_anchor_source=" << (ap.initial_anchor ? "flag" : r.anchor_from_vote ? "vote" : "identity") << '\n'
        << "votes=" << r.votes << '\n'
        << "rounds=" << r.rounds << '\n'
        << "candidates=" << r.candidates << '\n'
        << "encounters=" << r.encounters.size() << '\n'
        << "query_anchor=" << format_pose(anchor) << '\n'
        << "iterations=" << r.solution.iterations << '\n'
        << "converged=" << (r.solution.converged ? 1 : 0) << '\n'
        << "initial_error=" << fmt("%.9g", r.solution.initial_error) << '\n'
        << "final_error=" << fmt("%.9g", r.solution.final_error) << '\n'
        << "gt_max_shift_m=" << fmt("%.3g", r.gt_max_shift_m) << '\n'
        << "gt_max_shift_deg=" << fmt("%.3g", r.gt_max_shift_deg) << '\n';
    write_text(out / "report.txt", rep.str());
    std::cout << rep.str();
    return 0;
}

struct DiffOptions {
    std::string model, map, out, crop_z;
    double threshold = 0.15;
    double eps = 0.3;
    std::size_t min_pts = 10;
    double voxel = 0.1;
};

int run_diff(const DiffOptions& o) {
    require_file(o.model);
    require_file(o.map);
    const BuildingModel model = load_obj(o.model);
    const PointCloud map = load_cloud(o.map);
    ChangeParams cp;
    cp.threshold = o.threshold;
    cp.eps = o.eps;
    cp.min_pts = o.min_pts;
    cp.voxel = o.voxel;
    if (!o.crop_z.empty()) {
        const auto v = parse_list(o.crop_z, 2, "--crop-z");
        cp.crop_z = std::make_pair(v[0], v[1]);
    }
    const ChangeSet changes = detect_changes(map, model, cp);
    export_changes(changes, o.out);
    std::cout << change_report(changes);
    return 0;
}

struct EvalOptions {
    std::string est, gt, out;
};

int run_eval(const EvalOptions& o) {
    require_file(o.est);
    require_file(o.gt);
    const AteReport r = ate(load_trajectory(o.est), load_trajectory(o.gt));
    const std::string text = format_report(r);
    if (!o.out.empty()) write_text(o.out, text);
    std::cout << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Anchor a drifting lidar session to a building model and report its differences"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    SimulateOptions sim;
    auto* s = app.add_subcommand("simulate", "Simulate a ground-truth session inside a building model");
    s->add_option("--model", sim.model, "Building model (OBJ)")->required();
    s->add_option("--out", sim.out, "Output session directory")->required();
    s->add_option("--resolution", sim.resolution, "Occupancy grid resolution (m)");
    s->add_option("--spacing", sim.spacing, "Keyframe spacing (m)");
    s->add_option("--seed", sim.seed, "Random seed for range noise");
    s->add_option("--goals", sim.goals, "Goal file (x y yaw per line); skips coverage planning");
    s->add_option("--extra", sim.extra, "Objects present in the world but not in the model (OBJ)");
    s->add_option("--interior", sim.interior, "Interior seed x,y (default: footprint centre)");
    s->add_option("--plan-resolution", sim.plan_resolution, "Coverage planning cell size (m)");
    s->add_option("--clearance", sim.clearance, "Minimum distance of planned cells from obstacles (m)");
    s->add_option("--stride", sim.stride, "Coverage waypoints per goal");
    s->add_option("--speed", sim.speed, "Sensor speed (m/s)");
    s->add_option("--scan-period", sim.scan_period, "Time between scans (s)");

    DriftOptions dr;
    auto* d = app.add_subcommand("drift", "Derive a drifting query session from a ground-truth session");
    d->add_option("--in", dr.in, "Input session directory")->required();
    d->add_option("--out", dr.out, "Output session directory")->required();
    d->add_option("--trans-drift", dr.trans_drift, "Translation scale error per metre");
    d->add_option("--yaw-drift", dr.yaw_drift, "Yaw error per metre (rad)");
    d->add_option("--trans-noise", dr.trans_noise, "Per-edge translation noise sigma (m)");
    d->add_option("--rot-noise", dr.rot_noise, "Per-edge rotation noise sigma (rad)");
    d->add_option("--offset", dr.offset, "Re-express the session in a local frame x,y,z,yaw");
    d->add_option("--seed", dr.seed, "Random seed for edge noise");

    AnchorOptions an;
    auto* a = app.add_subcommand("anchor", "Anchor a query session to a ground-truth session");
    a->add_option("--ref", an.ref, "Ground-truth session directory")->required();
    a->add_option("--query", an.query, "Query session directory")->required();
    a->add_option("--out", an.out, "Output directory")->required();
    a->add_option("--sc-threshold", an.sc_threshold, "Scan context similarity threshold");
    a->add_option("--sc-radius", an.sc_radius, "Proximity search radius (m)");
    a->add_option("--fitness-threshold", an.fitness_threshold, "Maximum ICP fitness (m^2)");
    a->add_option("--initial", an.initial, "Initial query anchor x,y,z,yaw (default: voted)");
    a->add_option("--rounds", an.rounds, "Maximum detection and solve rounds");

    DiffOptions df;
    auto* f = app.add_subcommand("diff", "Detect positive differences between a map and a model");
    f->add_option("--model", df.model, "Building model (OBJ)")->required();
    f->add_option("--map", df.map, "Aligned map cloud (.pc)")->required();
    f->add_option("--out", df.out, "Output directory")->required();
    f->add_option("--threshold", df.threshold, "Model distance threshold (m)");
    f->add_option("--eps", df.eps, "DBSCAN radius (m)");
    f->add_option("--min-pts", df.min_pts, "DBSCAN core point count");
    f->add_option("--voxel", df.voxel, "Cube mesh voxel size (m)");
    f->add_option("--crop-z", df.crop_z, "Cluster only points with z in a,b");

    EvalOptions ev;
    auto* e = app.add_subcommand("eval", "Absolute trajectory error without alignment");
    e->add_option("--est", ev.est, "Estimated trajectory")->required();
    e->add_option("--gt", ev.gt, "Reference trajectory")->required();
    e->add_option("--out", ev.out, "Also write the report to this file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*s) return run_simulate(sim);
        if (*d) return run_drift(dr);
        if (*a) return run_anchor(an);
        if (*f) return run_diff(df);
        if (*e) return run_eval(ev);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 1;
}
