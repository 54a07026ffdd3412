#include "bimslam/session.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <Eigen/Cholesky>

#include "bimslam/error.hpp"

namespace bimslam {

namespace fs = std::filesystem;

namespace {

std::string indexed_name(std::size_t i, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06zu.%s", i, ext);
    return buf;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void write_edge(std::ostream& os, const GraphEdge& e) {
    os << "EDGE_SE3:QUAT " << e.from << ' ' << e.to << ' ' << format_pose(e.relative);
    for (int r = 0; r < 6; ++r) {
        for (int c = r; c < 6; ++c) os << ' ' << format_double(e.information(r, c));
    }
    os << '\n';
}

bool is_spd(const Matrix6d& m) {
    if (!m.allFinite() || !m.isApprox(m.transpose(), 1e-9)) return false;
    Eigen::LLT<Matrix6d> llt(m);
    return llt.info() == Eigen::Success;
}

}  // namespace

void validate(const LidarSpec& spec) {
    if (spec.channels < 1) throw PreconditionViolation("lidar channels must be >= 1");
    if (spec.horizontal_steps < 1) throw PreconditionViolation("lidar horizontal steps must be >= 1");
    if (!(spec.max_range > 0.0)) throw PreconditionViolation("lidar max_range must be > 0");
    if (!(spec.noise_sigma >= 0.0)) throw PreconditionViolation("lidar noise_sigma must be >= 0");
    if (spec.vertical_fov_min_deg > spec.vertical_fov_max_deg) throw PreconditionViolation("vertical fov min > max");
}

void validate(const PoseGraph& graph) {
    const std::size_t n = graph.nodes.size();
    for (const auto& e : graph.odometry_edges) {
        if (e.to != e.from + 1 || e.to >= n) throw PreconditionViolation("odometry edge must join i -> i+1");
        if (!is_spd(e.information)) throw PreconditionViolation("odometry information is not SPD");
    }
    for (const auto& e : graph.loop_edges) {
        if (e.from >= n || e.to >= n) throw PreconditionViolation("loop edge references a missing node");
        if (!is_spd(e.information)) throw PreconditionViolation("loop information is not SPD");
    }
}

void validate(const Session& session) {
    validate(session.graph);
    if (session.graph.nodes.size() != session.keyframes.size()) {
        throw MissingKeyframe("session has " + std::to_string(session.graph.nodes.size()) + " nodes but " +
                              std::to_string(session.keyframes.size()) + " keyframes");
    }
}

void write_graph(const PoseGraph& graph, std::ostream& os) {
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        os << "VERTEX_SE3:QUAT " << i << ' ' << format_pose(graph.nodes[i]) << '\n';
    }
    for (const auto& e : graph.odometry_edges) write_edge(os, e);
    for (const auto& e : graph.loop_edges) write_edge(os, e);
}

PoseGraph read_graph(std::istream& is, const std::string& name) {
    std::map<std::size_t, Pose> vertices;
    struct RawEdge {
        GraphEdge edge;
        std::size_t line;
    };
    std::vector<RawEdge> edges;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "VERTEX_SE3:QUAT") {
            long long id = -1;
            if (!(ls >> id) || id < 0) throw FormatError(name, line_no, "bad vertex id");
            std::string rest;
            std::getline(ls, rest);
            Pose p;
            if (!parse_pose(rest, p)) throw FormatError(name, line_no, "bad vertex pose");
            if (!vertices.emplace(static_cast<std::size_t>(id), p).second) {
                throw FormatError(name, line_no, "duplicate vertex " + std::to_string(id));
            }
        } else if (tag == "EDGE_SE3:QUAT") {
            long long a = -1, b = -1;
            if (!(ls >> a >> b) || a < 0 || b < 0) throw FormatError(name, line_no, "bad edge ids");
            double v[7];
            for (double& x : v) {
                if (!(ls >> x)) throw FormatError(name, line_no, "bad edge measurement");
            }
            std::ostringstream pose_text;
            pose_text.precision(17);
            for (double x : v) pose_text << x << ' ';
            GraphEdge e;
            e.from = static_cast<std::size_t>(a);
            e.to = static_cast<std::size_t>(b);
            if (!parse_pose(pose_text.str(), e.relative)) throw FormatError(name, line_no, "bad edge measurement");
            for (int r = 0; r < 6; ++r) {
                for (int c = r; c < 6; ++c) {
                    double x = 0.0;
                    if (!(ls >> x) || !std::isfinite(x)) throw FormatError(name, line_no, "bad information entry");
                    e.information(r, c) = x;
                    e.information(c, r) = x;
                }
            }
            if (!is_spd(e.information)) throw FormatError(name, line_no, "information matrix is not SPD");
            edges.push_back({e, line_no});
        } else {
            throw FormatError(name, line_no, "unknown record '" + tag + "'");
        }
    }

    PoseGraph graph;
    graph.nodes.reserve(vertices.size());
    std::size_t expect = 0;
    for (const auto& [id, pose] : vertices) {
        if (id != expect) throw FormatError(name, 0, "vertex ids are not dense: missing " + std::to_string(expect));
        graph.nodes.push_back(pose);
        ++expect;
    }
    for (const auto& raw : edges) {
        const auto& e = raw.edge;
        if (e.from >= graph.nodes.size() || e.to >= graph.nodes.size()) {
            throw FormatError(name, raw.line, "edge references missing node " +
                                                  std::to_string(std::max(e.from, e.to)) + " of " +
                                                  std::to_string(graph.nodes.size()));
        }
        if (e.to == e.from + 1) {
            graph.odometry_edges.push_back(e);
        } else {
            graph.loop_edges.push_back(e);
        }
    }
    return graph;
}

void save_session(const Session& session, const fs::path& dir) {
    validate(session);
    fs::create_directories(dir / "keyframes");
    fs::create_directories(dir / "descriptors");
    {
        std::ofstream os(dir / "poses.graph", std::ios::trunc);
        if (!os) throw Error("cannot write " + (dir / "poses.graph").string());
        write_graph(session.graph, os);
    }
    for (std::size_t i = 0; i < session.keyframes.size(); ++i) {
        save_cloud(session.keyframes[i].cloud, dir / "keyframes" / indexed_name(i, "pc"));
        save_descriptor(session.keyframes[i].descriptor, dir / "descriptors" / indexed_name(i, "dsc"));
    }
    std::ofstream meta(dir / "meta.txt", std::ios::trunc);
    if (!meta) throw Error("cannot write " + (dir / "meta.txt").string());
    const double sc_radius = session.keyframes.empty() ? 10.0 : session.keyframes.front().descriptor.max_radius;
    const LidarSpec& l = session.lidar;
    meta << "keyframes=" << session.keyframes.size() << '\n'
         << "spacing=" << format_double(session.spacing) << '\n'
         << "frame_label=" << session.frame_label << '\n'
         << "sc_max_radius=" << format_double(sc_radius) << '\n'
         << "lidar_channels=" << l.channels << '\n'
         << "lidar_vfov_min_deg=" << format_double(l.vertical_fov_min_deg) << '\n'
         << "lidar_vfov_max_deg=" << format_double(l.vertical_fov_max_deg) << '\n'
         << "lidar_horizontal_steps=" << l.horizontal_steps << '\n'
         << "lidar_max_range=" << format_double(l.max_range) << '\n'
         << "lidar_noise_sigma=" << format_double(l.noise_sigma) << '\n';
}

Session load_session(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error("session directory not found: " + dir.string());
    const fs::path meta_file = dir / "meta.txt";
    std::ifstream meta(meta_file);
    if (!meta) throw Error("cannot read " + meta_file.string());
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(meta, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError(meta_file.string(), line_no, "expected key=value");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto num = [&](const std::string& key, double fallback) {
        auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw FormatError(meta_file.string(), 0, "bad value for " + key);
        }
    };

    Session s;
    s.spacing = num("spacing", 1.0);
    if (auto it = kv.find("frame_label"); it != kv.end()) s.frame_label = it->second;
    s.lidar.channels = static_cast<int>(num("lidar_channels", s.lidar.channels));
    s.lidar.vertical_fov_min_deg = num("lidar_vfov_min_deg", s.lidar.vertical_fov_min_deg);
    s.lidar.vertical_fov_max_deg = num("lidar_vfov_max_deg", s.lidar.vertical_fov_max_deg);
    s.lidar.horizontal_steps = static_cast<int>(num("lidar_horizontal_steps", s.lidar.horizontal_steps));
    s.lidar.max_range = num("lidar_max_range", s.lidar.max_range);
    s.lidar.noise_sigma = num("lidar_noise_sigma", s.lidar.noise_sigma);
    const double sc_radius = num("sc_max_radius", 10.0);

    const fs::path graph_file = dir / "poses.graph";
    std::ifstream gs(graph_file);
    if (!gs) throw Error("cannot read " + graph_file.string());
    s.graph = read_graph(gs, graph_file.string());

    const std::size_t n = s.graph.nodes.size();
    if (kv.count("keyframes") && static_cast<std::size_t>(num("keyframes", 0)) != n) {
        throw MissingKeyframe("meta.txt lists " + kv["keyframes"] + " keyframes, graph has " + std::to_string(n));
    }
    s.keyframes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const fs::path pc = dir / "keyframes" / indexed_name(i, "pc");
        const fs::path dsc = dir / "descriptors" / indexed_name(i, "dsc");
        if (!fs::exists(pc) || !fs::exists(dsc)) {
            throw MissingKeyframe("keyframe " + std::to_string(i) + " missing in " + dir.string());
        }
        s.keyframes[i].cloud = load_cloud(pc);
        s.keyframes[i].descriptor = load_descriptor(dsc, sc_radius);
    }
    if (fs::exists(dir / "keyframes" / indexed_name(n, "pc"))) {
        throw MissingKeyframe("keyframe " + std::to_string(n) + " has no graph node in " + dir.string());
    }
    validate(s);
    return s;
}

std::vector<std::size_t> select_keyframes(const std::vector<Pose>& poses, double spacing) {
    if (!(spacing > 0.0)) throw PreconditionViolation("keyframe spacing must be > 0");
    std::vector<std::size_t> kept;
    if (poses.empty()) return kept;
    kept.push_back(0);
    double travelled = 0.0;
    for (std::size_t i = 1; i < poses.size(); ++i) {
        travelled += translation_error_m(poses[i - 1], poses[i]);
        // Relative slack absorbs rounding in the accumulated sum.
        if (travelled >= spacing * (1.0 - 1e-9)) {
            kept.push_back(i);
            travelled = 0.0;
        }
    }
    return kept;
}

std::vector<GraphEdge> chain_edges(const std::vector<Pose>& nodes) {
    std::vector<GraphEdge> edges;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        edges.push_back({i, i + 1, between(nodes[i], nodes[i + 1]), Matrix6d::Identity()});
    }
    return edges;
}

Session sample_keyframes(const std::vector<std::pair<Pose, PointCloud>>& trajectory, double spacing,
                         const ScanContextParams& sc) {
    if (trajectory.empty()) throw PreconditionViolation("trajectory is empty");
    std::vector<Pose> poses;
    poses.reserve(trajectory.size());
    for (const auto& [pose, cloud] : trajectory) poses.push_back(pose);

    Session s;
    s.spacing = spacing;
    for (std::size_t i : select_keyframes(poses, spacing)) {
        s.graph.nodes.push_back(trajectory[i].first);
        s.keyframes.push_back({trajectory[i].second, compute_descriptor(trajectory[i].second, sc)});
    }
    s.graph.odometry_edges = chain_edges(s.graph.nodes);
    return s;
}

void save_trajectory(const std::vector<Pose>& poses, const fs::path& file) {
    std::ofstream os(file, std::ios::trunc);
    if (!os) throw Error("cannot write " + file.string());
    for (std::size_t i = 0; i < poses.size(); ++i) os << i << ' ' << format_pose(poses[i]) << '\n';
}

std::vector<Pose> load_trajectory(const fs::path& file) {
    std::ifstream is(file);
    if (!is) throw Error("cannot read " + file.string());
    std::vector<Pose> poses;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        double stamp = 0.0;
        if (!(ls >> stamp)) throw FormatError(file.string(), line_no, "bad timestamp");
        std::string rest;
        std::getline(ls, rest);
        Pose p;
        if (!parse_pose(rest, p)) throw FormatError(file.string(), line_no, "bad pose");
        poses.push_back(p);
    }
    return poses;
}

}  // namespace bimslam
