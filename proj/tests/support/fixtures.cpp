#include "fixtures.hpp"

#include "bimslam/scan_context.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace fixtures {

using bimslam::TriangleMesh;
using Eigen::Vector3d;

void add_box(TriangleMesh& mesh, const Box& box) {
    const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
    for (int k = 0; k < 8; ++k) {
        mesh.vertices.emplace_back((k & 1) ? box.hi.x() : box.lo.x(), (k & 2) ? box.hi.y() : box.lo.y(),
                                   (k & 4) ? box.hi.z() : box.lo.z());
    }
    static constexpr std::uint32_t quads[6][4] = {
        {0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5},
    };
    for (const auto& q : quads) {
        mesh.faces.push_back({base + q[0], base + q[1], base + q[2]});
        mesh.faces.push_back({base + q[0], base + q[2], base + q[3]});
    }
}

TriangleMesh box_mesh(const Box& box) {
    TriangleMesh m;
    add_box(m, box);
    return m;
}

TriangleMesh visible_box_mesh(const Box& box) {
    TriangleMesh m = box_mesh(box);
    m.faces.erase(m.faces.begin(), m.faces.begin() + 2);
    return m;
}

bimslam::BuildingModel two_room_model() {
    TriangleMesh m;
    // Shell: inward-facing quads.
    add_box(m, {{0, 0, -0.1}, {20, 15, 0}});
    add_box(m, {{0, 0, 3}, {20, 15, 3.1}});
    add_box(m, {{-0.1, 0, 0}, {0, 15, 3}});
    add_box(m, {{20, 0, 0}, {20.1, 15, 3}});
    add_box(m, {{0, -0.1, 0}, {20, 0, 3}});
    add_box(m, {{0, 15, 0}, {20, 15.1, 3}});
    // Interior wall with a door and lintel.
    add_box(m, {{11.9, 0, 0}, {12.1, 6, 3}});
    add_box(m, {{11.9, 7.5, 0}, {12.1, 15, 3}});
    add_box(m, {{11.9, 6, 2.2}, {12.1, 7.5, 3}});
    // Column and partial wall.
    add_box(m, {{3.7, 9.7, 0}, {4.3, 10.3, 3}});
    add_box(m, {{15, 2.9, 0}, {18, 3.1, 3}});
    return m;
}

Eigen::Vector2d two_room_seed() { return {2.0, 2.0}; }

std::vector<Box> obstacle_boxes() {
    return {
        {{5.7, 4.3, 0.0}, {6.3, 4.7, 0.8}},
        {{15.8, 10.3, 0.0}, {16.2, 10.9, 0.8}},
    };
}

bimslam::BuildingModel two_room_world_with_obstacles() {
    TriangleMesh m = two_room_model();
    for (const Box& b : obstacle_boxes()) add_box(m, b);
    return m;
}

std::vector<bimslam::Waypoint> tour_goals(const Eigen::Vector2d& offset) {
    const double pts[][2] = {{2, 2}, {10, 2}, {10, 13}, {2, 13}, {2, 6.75}, {18, 6.75}, {18, 13}, {14, 13}, {14, 9}};
    std::vector<bimslam::Waypoint> goals;
    for (const auto& p : pts) goals.push_back({p[0] + offset.x(), p[1] + offset.y(), 0.0});
    for (std::size_t k = 0; k + 1 < goals.size(); ++k) {
        goals[k].yaw = std::atan2(goals[k + 1].y - goals[k].y, goals[k + 1].x - goals[k].x);
    }
    goals.back().yaw = goals[goals.size() - 2].yaw;
    return goals;
}

bimslam::BuildingModel box_room(double sx, double sy, double sz) {
    TriangleMesh m;
    add_box(m, {{0, 0, -0.1}, {sx, sy, 0}});
    add_box(m, {{0, 0, sz}, {sx, sy, sz + 0.1}});
    add_box(m, {{-0.1, 0, 0}, {0, sy, sz}});
    add_box(m, {{sx, 0, 0}, {sx + 0.1, sy, sz}});
    add_box(m, {{0, -0.1, 0}, {sx, 0, sz}});
    add_box(m, {{0, sy, 0}, {sx, sy + 0.1, sz}});
    add_box(m, {{0.25 * sx, 0.6 * sy, 0}, {0.25 * sx + 0.5, 0.6 * sy + 0.8, sz}});
    add_box(m, {{0.7 * sx, 0.2 * sy, 0}, {0.7 * sx + 1.2, 0.2 * sy + 0.3, 1.0}});
    return m;
}

bimslam::PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
    std::vector<double> cdf;
    double total = 0.0;
    for (std::size_t i = 0; i < mesh.triangle_count(); ++i) {
        total += mesh.triangle(i).area();
        cdf.push_back(total);
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bimslam::PointCloud out;
    for (std::size_t k = 0; k < n; ++k) {
        const double r = u(rng) * total;
        const std::size_t i = std::min<std::size_t>(
            static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin()), cdf.size() - 1);
        const auto t = mesh.triangle(i);
        double a = u(rng), b = u(rng);
        if (a + b > 1.0) {
            a = 1.0 - a;
            b = 1.0 - b;
        }
        out.points.push_back((t.a + a * (t.b - t.a) + b * (t.c - t.a)).cast<float>());
    }
    return out;
}

Vector3d random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vector3d v;
    do {
        v = Vector3d(n(rng), n(rng), n(rng));
    } while (v.norm() < 1e-6);
    return v.normalized();
}

bimslam::Pose random_pose(std::mt19937_64& rng, double max_t, double max_angle_rad) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Vector3d t = random_unit(rng) * (max_t * u(rng));
    const Eigen::AngleAxisd aa(max_angle_rad * u(rng), random_unit(rng));
    return {t, Eigen::Quaterniond(aa)};
}

double hausdorff(const std::vector<Vector3d>& a, const std::vector<Vector3d>& b) {
    auto directed = [](const std::vector<Vector3d>& x, const std::vector<Vector3d>& y) {
        double worst = 0.0;
        for (const auto& p : x) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : y) best = std::min(best, (p - q).squaredNorm());
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return std::max(directed(a, b), directed(b, a));
}

}  // namespace fixtures

namespace fixtures {

bimslam::Session golden_session() {
    using namespace bimslam;
    Session s;
    s.graph.nodes = {Pose::from_xyz_yaw(0, 0, 0.5, 0), Pose::from_xyz_yaw(1, 0, 0.5, 0.1),
                     Pose::from_xyz_yaw(2, 0.25, 0.5, 0.3)};
    s.graph.odometry_edges = chain_edges(s.graph.nodes);
    GraphEdge loop;
    loop.from = 0;
    loop.to = 2;
    loop.relative = between(s.graph.nodes[0], s.graph.nodes[2]);
    loop.information = Matrix6d::Identity() * 100.0;
    loop.information(0, 1) = loop.information(1, 0) = 0.5;
    s.graph.loop_edges.push_back(loop);
    for (std::size_t i = 0; i < 3; ++i) {
        Keyframe kf;
        for (int k = 0; k < 8; ++k) {
            const float a = 0.7f * static_cast<float>(k) + 0.1f * static_cast<float>(i);
            kf.cloud.points.emplace_back(3.0f * std::cos(a), 3.0f * std::sin(a), -0.25f + 0.1f * static_cast<float>(k));
        }
        kf.descriptor = compute_descriptor(kf.cloud);
        s.keyframes.push_back(kf);
    }
    s.spacing = 1.0;
    s.frame_label = "golden";
    return s;
}

}  // namespace fixtures

namespace fixtures {

ReferenceClustering reference_dbscan(const bimslam::PointCloud& points, double eps, std::size_t min_pts) {
    const std::size_t n = points.size();
    const double eps2 = eps * eps;
    auto sq = [&](std::size_t a, std::size_t b) {
        return (points.points[a].cast<double>() - points.points[b].cast<double>()).squaredNorm();
    };
    std::vector<char> core(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t count = 0;
        for (std::size_t k = 0; k < n; ++k) count += sq(i, k) <= eps2;
        core[i] = count >= min_pts;
    }
    std::vector<std::size_t> label(n, n);
    std::size_t next = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (!core[s] || label[s] != n) continue;
        std::vector<std::size_t> stack{s};
        label[s] = next;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            for (std::size_t k = 0; k < n; ++k) {
                if (core[k] && label[k] == n && sq(i, k) <= eps2) {
                    label[k] = next;
                    stack.push_back(k);
                }
            }
        }
        ++next;
    }
    ReferenceClustering out;
    std::vector<std::set<std::size_t>> groups(next);
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) {
            groups[label[i]].insert(i);
            continue;
        }
        std::size_t best = n;
        for (std::size_t k = 0; k < n; ++k) {
            if (!core[k] || sq(i, k) > eps2) continue;
            if (best == n || sq(i, k) < sq(i, best)) {
                best = k;
            } else if (sq(i, k) == sq(i, best)) {
                const auto& a = points.points[k];
                const auto& b = points.points[best];
                if (std::make_tuple(a.x(), a.y(), a.z()) < std::make_tuple(b.x(), b.y(), b.z())) best = k;
            }
        }
        if (best == n) {
            out.noise.insert(i);
        } else {
            groups[label[best]].insert(i);
        }
    }
    out.clusters.insert(groups.begin(), groups.end());
    return out;
}

ReferenceClustering as_sets(const bimslam::Clustering& c) {
    ReferenceClustering out;
    for (const auto& cl : c.clusters) out.clusters.insert(std::set<std::size_t>(cl.begin(), cl.end()));
    out.noise.insert(c.noise.begin(), c.noise.end());
    return out;
}

bimslam::PointCloud random_cluster_scene(std::mt19937_64& rng, std::size_t max_points) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    bimslam::PointCloud out;
    const int blobs = 1 + static_cast<int>(u(rng) * 4);
    for (int b = 0; b < blobs && out.size() < max_points; ++b) {
        const Eigen::Vector3d c(8.0 * u(rng), 8.0 * u(rng), 2.0 * u(rng));
        const double sigma = 0.05 + 0.3 * u(rng);
        const std::size_t n = static_cast<std::size_t>(u(rng) * 120);
        for (std::size_t k = 0; k < n && out.size() < max_points; ++k) {
            const Eigen::Vector3d p = c + sigma * Eigen::Vector3d(g(rng), g(rng), g(rng));
            out.points.push_back(p.cast<float>());
        }
    }
    // Lattice patch with spacing 0.25: many exactly tied distances.
    if (u(rng) < 0.5) {
        const Eigen::Vector3d o(std::floor(8.0 * u(rng)), std::floor(8.0 * u(rng)), 0.0);
        const int w = 2 + static_cast<int>(u(rng) * 6);
        for (int x = 0; x < w && out.size() < max_points; ++x) {
            for (int y = 0; y < w && out.size() < max_points; ++y) {
                if (u(rng) < 0.2) continue;
                out.points.push_back((o + Eigen::Vector3d(0.25 * x, 0.25 * y, 0.0)).cast<float>());
            }
        }
    }
    const std::size_t scatter = static_cast<std::size_t>(u(rng) * 60);
    for (std::size_t k = 0; k < scatter && out.size() < max_points; ++k) {
        out.points.emplace_back(static_cast<float>(8.0 * u(rng)), static_cast<float>(8.0 * u(rng)),
                                static_cast<float>(2.0 * u(rng)));
    }
    std::shuffle(out.points.begin(), out.points.end(), rng);
    return out;
}

}  // namespace fixtures

namespace fixtures {

double surface_hausdorff(const bimslam::TriangleMesh& a, const bimslam::TriangleMesh& b, std::size_t samples) {
    auto one_sided = [samples](const TriangleMesh& from, const TriangleMesh& to) {
        const bimslam::MeshIndex index(to);
        double worst = 0.0;
        for (const auto& v : from.vertices) worst = std::max(worst, index.distance(v));
        for (const auto& p : sample_surface(from, samples, 97).points) {
            worst = std::max(worst, index.distance(p.cast<double>()));
        }
        return worst;
    };
    return std::max(one_sided(a, b), one_sided(b, a));
}

}  // namespace fixtures
