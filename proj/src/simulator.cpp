#include "bimslam/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <tuple>

#include "bimslam/error.hpp"

namespace bimslam {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr int kDx[4] = {0, -1, 1, 0};
constexpr int kDy[4] = {-1, 0, 0, 1};  // scanline order: up-row, left, right, down-row

std::size_t flat(const OccupancyGrid& g, GridCell c) { return static_cast<std::size_t>(c.y) * g.width + c.x; }

}  // namespace

GridCell OccupancyGrid::cell_of(const Eigen::Vector2d& world) const {
    const Eigen::Vector2d rel = (world - origin) / resolution;
    return {static_cast<int>(std::floor(rel.x())), static_cast<int>(std::floor(rel.y()))};
}

Eigen::Vector2d OccupancyGrid::center_of(GridCell c) const {
    return origin + resolution * Eigen::Vector2d(c.x + 0.5, c.y + 0.5);
}

std::size_t OccupancyGrid::count(CellState s) const { return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), s)); }

OccupancyGrid rasterize(const BuildingModel& model, const Eigen::Vector2d& interior_seed, const RasterizeParams& params) {
    if (!(params.resolution > 0.0)) throw PreconditionViolation("grid resolution must be > 0");
    if (!(params.slice_z_min < params.slice_z_max)) throw PreconditionViolation("slice band min must be < max");
    if (model.empty()) throw NoInterior("model is empty: no enclosed interior");

    Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector2d hi = -lo;
    for (const auto& v : model.vertices) {
        lo = lo.cwiseMin(v.head<2>());
        hi = hi.cwiseMax(v.head<2>());
    }
    OccupancyGrid g;
    g.resolution = params.resolution;
    g.origin = lo - Eigen::Vector2d::Constant(params.resolution);
    g.width = static_cast<int>(std::ceil((hi.x() - g.origin.x()) / params.resolution)) + 1;
    g.height = static_cast<int>(std::ceil((hi.y() - g.origin.y()) / params.resolution)) + 1;
    g.cells.assign(static_cast<std::size_t>(g.width) * g.height, CellState::Unknown);

    for (std::size_t i = 0; i < model.triangle_count(); ++i) {
        const Triangle t = model.triangle(i);
        const double zmin = std::min({t.a.z(), t.b.z(), t.c.z()});
        const double zmax = std::max({t.a.z(), t.b.z(), t.c.z()});
        if (zmax < params.slice_z_min || zmin > params.slice_z_max) continue;
        const Eigen::Vector2d tlo = t.a.head<2>().cwiseMin(t.b.head<2>()).cwiseMin(t.c.head<2>());
        const Eigen::Vector2d thi = t.a.head<2>().cwiseMax(t.b.head<2>()).cwiseMax(t.c.head<2>());
        const GridCell c0 = g.cell_of(tlo);
        const GridCell c1 = g.cell_of(thi);
        for (int y = std::max(0, c0.y - 1); y <= std::min(g.height - 1, c1.y + 1); ++y) {
            for (int x = std::max(0, c0.x - 1); x <= std::min(g.width - 1, c1.x + 1); ++x) {
                const Eigen::Vector2d cmin = g.origin + params.resolution * Eigen::Vector2d(x, y);
                const Eigen::Vector3d bmin(cmin.x(), cmin.y(), params.slice_z_min);
                const Eigen::Vector3d bmax(cmin.x() + params.resolution, cmin.y() + params.resolution,
                                           params.slice_z_max);
                if (triangle_box_overlap(t, bmin, bmax)) g.at({x, y}) = CellState::Occupied;
            }
        }
    }

    const GridCell seed = g.cell_of(interior_seed);
    if (!g.contains(seed)) throw NoInterior("interior seed lies outside the model footprint");
    if (g.at(seed) == CellState::Occupied) throw NoInterior("interior seed lies in an occupied cell");

    std::deque<GridCell> queue{seed};
    g.at(seed) = CellState::Free;
    while (!queue.empty()) {
        const GridCell c = queue.front();
        queue.pop_front();
        if (c.x == 0 || c.y == 0 || c.x == g.width - 1 || c.y == g.height - 1) {
            throw NoInterior("free space around the seed is not enclosed");
        }
        for (int k = 0; k < 4; ++k) {
            const GridCell n{c.x + kDx[k], c.y + kDy[k]};
            if (g.at(n) == CellState::Unknown) {
                g.at(n) = CellState::Free;
                queue.push_back(n);
            }
        }
    }
    return g;
}

std::vector<GridCell> eroded_free_cells(const OccupancyGrid& grid, double clearance) {
    std::vector<GridCell> out;
    const int r = clearance > 0.0 ? static_cast<int>(std::ceil(clearance / grid.resolution)) : 0;
    const double limit2 = clearance * clearance;
    for (int y = 0; y < grid.height; ++y) {
        for (int x = 0; x < grid.width; ++x) {
            if (grid.at({x, y}) != CellState::Free) continue;
            bool ok = true;
            for (int dy = -r; dy <= r && ok; ++dy) {
                for (int dx = -r; dx <= r && ok; ++dx) {
                    const double d2 = grid.resolution * grid.resolution * (dx * dx + dy * dy);
                    if (d2 > limit2) continue;
                    const GridCell n{x + dx, y + dy};
                    if (!grid.contains(n) || grid.at(n) != CellState::Free) ok = false;
                }
            }
            if (ok) out.push_back({x, y});
        }
    }
    return out;
}

std::vector<GridCell> coverage_path(const OccupancyGrid& grid, GridCell start, double clearance) {
    if (!grid.contains(start) || grid.at(start) != CellState::Free) {
        throw PreconditionViolation("coverage start cell is not free");
    }
    const std::vector<GridCell> cells = eroded_free_cells(grid, clearance);
    if (cells.empty()) throw NoInterior("no free cells survive erosion");

    const std::size_t n = static_cast<std::size_t>(grid.width) * grid.height;
    std::vector<char> allowed(n, 0);
    for (const GridCell& c : cells) allowed[flat(grid, c)] = 1;
    auto is_allowed = [&](GridCell c) { return grid.contains(c) && allowed[flat(grid, c)]; };

    if (!is_allowed(start)) {
        // Snap to the nearest surviving cell (Euclidean, scanline tie-break).
        const GridCell s0 = start;
        start = *std::min_element(cells.begin(), cells.end(), [&](GridCell a, GridCell b) {
            const long da = static_cast<long>(a.x - s0.x) * (a.x - s0.x) + static_cast<long>(a.y - s0.y) * (a.y - s0.y);
            const long db = static_cast<long>(b.x - s0.x) * (b.x - s0.x) + static_cast<long>(b.y - s0.y) * (b.y - s0.y);
            return std::tie(da, a.y, a.x) < std::tie(db, b.y, b.x);
        });
    }

    constexpr int kUnreached = std::numeric_limits<int>::max();
    std::vector<int> wave(n, kUnreached);
    std::deque<GridCell> queue{start};
    wave[flat(grid, start)] = 0;
    std::size_t reachable = 0;
    while (!queue.empty()) {
        const GridCell c = queue.front();
        queue.pop_front();
        ++reachable;
        for (int k = 0; k < 4; ++k) {
            const GridCell nb{c.x + kDx[k], c.y + kDy[k]};
            if (is_allowed(nb) && wave[flat(grid, nb)] == kUnreached) {
                wave[flat(grid, nb)] = wave[flat(grid, c)] + 1;
                queue.push_back(nb);
            }
        }
    }

    auto better = [&](GridCell a, GridCell b) {
        return std::make_tuple(wave[flat(grid, a)], a.y, a.x) < std::make_tuple(wave[flat(grid, b)], b.y, b.x);
    };

    std::vector<char> visited(n, 0);
    std::vector<GridCell> path{start};
    visited[flat(grid, start)] = 1;
    std::size_t covered = 1;
    GridCell cur = start;
    while (covered < reachable) {
        bool stepped = false;
        GridCell next{};
        for (int k = 0; k < 4; ++k) {
            const GridCell nb{cur.x + kDx[k], cur.y + kDy[k]};
            if (!is_allowed(nb) || visited[flat(grid, nb)]) continue;
            if (!stepped || better(nb, next)) next = nb;
            stepped = true;
        }
        if (stepped) {
            path.push_back(next);
            visited[flat(grid, next)] = 1;
            ++covered;
            cur = next;
            continue;
        }
        // Dead end: shortest path to the closest unvisited cell.
        std::vector<int> parent(n, -1);
        std::vector<int> depth(n, -1);
        std::deque<GridCell> q{cur};
        depth[flat(grid, cur)] = 0;
        int found_depth = -1;
        GridCell target{};
        bool have_target = false;
        while (!q.empty()) {
            const GridCell c = q.front();
            q.pop_front();
            const int d = depth[flat(grid, c)];
            if (found_depth >= 0 && d > found_depth) break;
            if (!visited[flat(grid, c)]) {
                if (!have_target || better(c, target)) target = c;
                have_target = true;
                found_depth = d;
                continue;
            }
            for (int k = 0; k < 4; ++k) {
                const GridCell nb{c.x + kDx[k], c.y + kDy[k]};
                if (!is_allowed(nb) || depth[flat(grid, nb)] >= 0) continue;
                depth[flat(grid, nb)] = d + 1;
                parent[flat(grid, nb)] = static_cast<int>(flat(grid, c));
                q.push_back(nb);
            }
        }
        std::vector<GridCell> bridge;
        for (std::size_t at = flat(grid, target); at != flat(grid, cur);
             at = static_cast<std::size_t>(parent[at])) {
            bridge.push_back({static_cast<int>(at % grid.width), static_cast<int>(at / grid.width)});
        }
        std::reverse(bridge.begin(), bridge.end());
        path.insert(path.end(), bridge.begin(), bridge.end());
        visited[flat(grid, target)] = 1;
        ++covered;
        cur = target;
    }
    return path;
}

namespace {
void assign_headings(std::vector<Waypoint>& wps) {
    for (std::size_t i = 0; i + 1 < wps.size(); ++i) {
        const double dx = wps[i + 1].x - wps[i].x;
        const double dy = wps[i + 1].y - wps[i].y;
        wps[i].yaw = (dx == 0.0 && dy == 0.0) ? (i > 0 ? wps[i - 1].yaw : 0.0) : std::atan2(dy, dx);
    }
    if (wps.size() >= 2) wps.back().yaw = wps[wps.size() - 2].yaw;
}
}  // namespace

std::vector<Waypoint> to_waypoints(const OccupancyGrid& grid, const std::vector<GridCell>& cells) {
    std::vector<Waypoint> out;
    out.reserve(cells.size());
    for (const GridCell& c : cells) {
        const Eigen::Vector2d p = grid.center_of(c);
        out.push_back({p.x(), p.y(), 0.0});
    }
    assign_headings(out);
    return out;
}

std::vector<Waypoint> subsample_goals(const std::vector<Waypoint>& waypoints, std::size_t stride) {
    if (stride < 1) throw PreconditionViolation("goal stride must be >= 1");
    std::vector<Waypoint> out;
    for (std::size_t i = 0; i < waypoints.size(); i += stride) out.push_back(waypoints[i]);
    if (!waypoints.empty() && (waypoints.size() - 1) % stride != 0) out.push_back(waypoints.back());
    assign_headings(out);
    return out;
}

std::vector<Waypoint> route_goals(const OccupancyGrid& grid, const std::vector<Waypoint>& path, std::size_t stride) {
    if (stride < 1) throw PreconditionViolation("goal stride must be >= 1");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < path.size(); i += stride) idx.push_back(i);
    if (!path.empty() && idx.back() != path.size() - 1) idx.push_back(path.size() - 1);

    auto line_clear = [&](const Waypoint& a, const Waypoint& b) {
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        const int steps = std::max(1, static_cast<int>(std::ceil(len / (0.25 * grid.resolution))));
        for (int s = 0; s <= steps; ++s) {
            const double f = static_cast<double>(s) / steps;
            const GridCell c = grid.cell_of({a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)});
            if (!grid.contains(c) || grid.at(c) != CellState::Free) return false;
        }
        return true;
    };

    std::vector<Waypoint> out;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        out.push_back(path[idx[k]]);
        if (k + 1 < idx.size() && !line_clear(path[idx[k]], path[idx[k + 1]])) {
            for (std::size_t j = idx[k] + 1; j < idx[k + 1]; ++j) out.push_back(path[j]);
        }
    }
    assign_headings(out);
    return out;
}

void save_goals(const std::vector<Waypoint>& goals, const std::filesystem::path& file) {
    std::ofstream os(file, std::ios::trunc);
    if (!os) throw Error("cannot write " + file.string());
    char buf[128];
    for (const auto& g : goals) {
        std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", g.x, g.y, g.yaw);
        os << buf;
    }
}

std::vector<Waypoint> load_goals(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) throw Error("cannot read " + file.string());
    std::vector<Waypoint> goals;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        Waypoint w;
        if (!(ls >> w.x >> w.y >> w.yaw)) throw FormatError(file.string(), line_no, "expected 'x y yaw'");
        goals.push_back(w);
    }
    return goals;
}

PointCloud raycast_scan(const MeshIndex& model, const Pose& sensor_pose, const LidarSpec& spec, std::uint64_t seed) {
    validate(spec);
    PointCloud cloud;
    if (model.size() == 0) return cloud;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const Eigen::Matrix3d r = sensor_pose.rotation_matrix();
    const Eigen::Vector3d& origin = sensor_pose.translation();
    constexpr double kDeg = std::numbers::pi / 180.0;
    cloud.points.reserve(static_cast<std::size_t>(spec.channels) * spec.horizontal_steps);
    for (int ch = 0; ch < spec.channels; ++ch) {
        const double el_deg =
            spec.channels == 1
                ? 0.5 * (spec.vertical_fov_min_deg + spec.vertical_fov_max_deg)
                : spec.vertical_fov_min_deg +
                      ch * (spec.vertical_fov_max_deg - spec.vertical_fov_min_deg) / (spec.channels - 1);
        const double el = el_deg * kDeg;
        for (int h = 0; h < spec.horizontal_steps; ++h) {
            const double az = 2.0 * std::numbers::pi * h / spec.horizontal_steps;
            const Eigen::Vector3d dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
            const double n = noise(rng);  // drawn for every ray so the stream does not depend on hits
            const auto hit = model.raycast(origin, r * dir, spec.max_range);
            if (!hit) continue;
            const double range = hit->distance + spec.noise_sigma * n;
            if (range <= 0.0) continue;
            cloud.points.push_back((dir * range).cast<float>());
        }
    }
    return cloud;
}

PointCloud raycast_scan(const BuildingModel& model, const Pose& sensor_pose, const LidarSpec& spec,
                        std::uint64_t seed) {
    return raycast_scan(MeshIndex(model), sensor_pose, spec, seed);
}

std::vector<Pose> interpolate_trajectory(const std::vector<Waypoint>& goals, double step, double sensor_height) {
    if (goals.empty()) throw PreconditionViolation("goal list is empty");
    if (!(step > 0.0)) throw PreconditionViolation("interpolation step must be > 0");
    std::vector<Pose> poses;
    poses.push_back(Pose::from_xyz_yaw(goals[0].x, goals[0].y, sensor_height, goals[0].yaw));
    for (std::size_t k = 0; k + 1 < goals.size(); ++k) {
        const Waypoint& a = goals[k];
        const Waypoint& b = goals[k + 1];
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        if (len == 0.0) continue;
        const double yaw = std::atan2(b.y - a.y, b.x - a.x);
        const int steps = std::max(1, static_cast<int>(std::ceil(len / step - 1e-9)));
        for (int s = 1; s <= steps; ++s) {
            const double f = static_cast<double>(s) / steps;
            poses.push_back(Pose::from_xyz_yaw(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y), sensor_height, yaw));
        }
    }
    if (goals.size() > 1) {
        const Waypoint& last = goals.back();
        poses.push_back(Pose::from_xyz_yaw(last.x, last.y, sensor_height, last.yaw));
    }
    return poses;
}

Session simulate_session(const BuildingModel& model, const std::vector<Waypoint>& goals, const LidarSpec& spec,
                         const SimulationParams& params) {
    validate(spec);
    if (!(params.speed > 0.0) || !(params.scan_period > 0.0)) {
        throw PreconditionViolation("speed and scan period must be > 0");
    }
    const std::vector<Pose> poses =
        interpolate_trajectory(goals, params.speed * params.scan_period, params.sensor_height);
    const MeshIndex index(model);

    Session s;
    s.spacing = params.keyframe_spacing;
    s.lidar = spec;
    s.frame_label = "model";
    // Scans are seeded by trajectory step, so casting only at kept poses gives
    // the same keyframes as casting at every step.
    for (std::size_t i : select_keyframes(poses, params.keyframe_spacing)) {
        PointCloud cloud = raycast_scan(index, poses[i], spec, mix_seed(params.seed, i));
        Descriptor d = compute_descriptor(cloud, params.scan_context);
        s.graph.nodes.push_back(poses[i]);
        s.keyframes.push_back({std::move(cloud), std::move(d)});
    }
    s.graph.odometry_edges = chain_edges(s.graph.nodes);
    return s;
}

Session inject_drift(const Session& gt, const DriftModel& drift) {
    if (drift.trans_drift_per_m < 0.0 || drift.yaw_drift_per_m < 0.0 || drift.trans_noise_sigma < 0.0 ||
        drift.rot_noise_sigma < 0.0) {
        throw PreconditionViolation("drift rates must be nonnegative");
    }
    Session out = gt;
    if (drift.trans_drift_per_m == 0.0 && drift.yaw_drift_per_m == 0.0 && drift.trans_noise_sigma == 0.0 &&
        drift.rot_noise_sigma == 0.0) {
        return out;
    }
    std::mt19937_64 rng(drift.seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (GraphEdge& e : out.graph.odometry_edges) {
        const double len = e.relative.translation().norm();
        Eigen::Vector3d t = e.relative.translation() * (1.0 + drift.trans_drift_per_m);
        Eigen::Quaterniond q =
            e.relative.rotation() * Eigen::Quaterniond(Eigen::AngleAxisd(drift.yaw_drift_per_m * len, Eigen::Vector3d::UnitZ()));
        const Eigen::Vector3d tn(unit(rng), unit(rng), unit(rng));
        const Eigen::Vector3d rn(unit(rng), unit(rng), unit(rng));
        t += drift.trans_noise_sigma * tn;
        q = q * exp(Twist{Eigen::Vector3d::Zero(), drift.rot_noise_sigma * rn}).rotation();
        e.relative = Pose(t, q);
    }
    if (!out.graph.nodes.empty()) {
        for (const GraphEdge& e : out.graph.odometry_edges) {
            out.graph.nodes[e.to] = compose(out.graph.nodes[e.from], e.relative);
        }
    }
    return out;
}

Session reframe(const Session& session, const Pose& offset) {
    Session out = session;
    for (Pose& p : out.graph.nodes) p = compose(offset, p);
    return out;
}

}  // namespace bimslam
