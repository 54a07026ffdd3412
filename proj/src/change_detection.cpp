#include "bimslam/change_detection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "bimslam/error.hpp"
#include "bimslam/kdtree.hpp"

namespace bimslam {

double point_mesh_distance(const Eigen::Vector3d& p, const MeshIndex& model) {
    if (model.size() == 0) throw PreconditionViolation("model has no triangles");
    return model.distance(p);
}

double point_mesh_distance(const Eigen::Vector3d& p, const BuildingModel& model) {
    return point_mesh_distance(p, MeshIndex(model));
}

Classification classify(const PointCloud& map, const MeshIndex& model, double threshold) {
    if (!(threshold > 0.0)) throw PreconditionViolation("classification threshold must be > 0");
    if (model.size() == 0) throw PreconditionViolation("model has no triangles");
    Classification out;
    for (const Point& p : map.points) {
        if (model.distance(p.cast<double>()) <= threshold) {
            out.confirmed.points.push_back(p);
        } else {
            out.positive.points.push_back(p);
        }
    }
    return out;
}

Classification classify(const PointCloud& map, const BuildingModel& model, double threshold) {
    if (!(threshold > 0.0)) throw PreconditionViolation("classification threshold must be > 0");
    return classify(map, MeshIndex(model), threshold);
}

namespace {

struct DisjointSet {
    std::vector<std::size_t> parent;
    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

bool lex_less(const Point& a, const Point& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
}

}  // namespace

Clustering dbscan(const PointCloud& points, double eps, std::size_t min_pts) {
    if (!(eps > 0.0)) throw PreconditionViolation("dbscan eps must be > 0");
    if (min_pts < 1) throw PreconditionViolation("dbscan min_pts must be >= 1");
    const std::size_t n = points.size();
    Clustering out;
    if (n == 0) return out;

    const KdTree tree(to_double(points));
    std::vector<std::vector<std::size_t>> nbrs(n);
    std::vector<char> core(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        nbrs[i] = tree.radius_search(tree.point(i), eps);
        core[i] = nbrs[i].size() >= min_pts;
    }

    DisjointSet ds(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i]) continue;
        for (std::size_t k : nbrs[i]) {
            if (core[k]) ds.unite(i, k);
        }
    }

    std::vector<std::size_t> owner(n, n);  // representative core point per member
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) {
            owner[i] = i;
            continue;
        }
        std::size_t best = n;
        double best_d = 0.0;
        for (std::size_t k : nbrs[i]) {
            if (!core[k]) continue;
            const double d = (points.points[k].cast<double>() - points.points[i].cast<double>()).squaredNorm();
            if (best == n || d < best_d || (d == best_d && lex_less(points.points[k], points.points[best]))) {
                best = k;
                best_d = d;
            }
        }
        owner[i] = best;
    }

    std::map<std::size_t, std::size_t> label_of_root;
    for (std::size_t i = 0; i < n; ++i) {
        if (owner[i] == n) {
            out.noise.push_back(i);
            continue;
        }
        const std::size_t root = ds.find(owner[i]);
        auto [it, inserted] = label_of_root.try_emplace(root, out.clusters.size());
        if (inserted) out.clusters.emplace_back();
        out.clusters[it->second].push_back(i);
    }
    return out;
}

TriangleMesh voxel_mesh(const PointCloud& cluster, double voxel) {
    if (cluster.empty()) throw PreconditionViolation("voxel_mesh needs a nonempty cluster");
    if (!(voxel > 0.0)) throw PreconditionViolation("voxel size must be > 0");
    using Key = std::array<long long, 3>;
    std::map<Key, char> occupied;
    for (const Point& p : cluster.points) {
        const Key k{static_cast<long long>(std::floor(p.x() / voxel)), static_cast<long long>(std::floor(p.y() / voxel)),
                    static_cast<long long>(std::floor(p.z() / voxel))};
        occupied[k] = 1;
    }

    TriangleMesh mesh;
    std::map<Key, std::uint32_t> corner_ids;
    auto corner = [&](const Key& c) {
        auto [it, inserted] = corner_ids.try_emplace(c, static_cast<std::uint32_t>(mesh.vertices.size()));
        if (inserted) {
            mesh.vertices.emplace_back(static_cast<double>(c[0]) * voxel, static_cast<double>(c[1]) * voxel,
                                       static_cast<double>(c[2]) * voxel);
        }
        return it->second;
    };

    for (const auto& [k, unused] : occupied) {
        (void)unused;
        for (int axis = 0; axis < 3; ++axis) {
            for (int sign : {-1, 1}) {
                Key nb = k;
                nb[axis] += sign;
                if (occupied.count(nb)) continue;
                const int u = (axis + 1) % 3;
                const int w = (axis + 2) % 3;
                Key base = k;
                if (sign > 0) base[axis] += 1;
                Key c1 = base, c2 = base, c3 = base;
                c1[u] += 1;
                c2[u] += 1;
                c2[w] += 1;
                c3[w] += 1;
                std::array<std::uint32_t, 4> q{corner(base), corner(c1), corner(c2), corner(c3)};
                if (sign < 0) std::swap(q[1], q[3]);
                mesh.faces.push_back({q[0], q[1], q[2]});
                mesh.faces.push_back({q[0], q[2], q[3]});
            }
        }
    }
    return mesh;
}

ChangeSet detect_changes(const PointCloud& map, const BuildingModel& model, const ChangeParams& params) {
    ChangeSet out;
    out.params = params;
    Classification cls = classify(map, model, params.threshold);
    out.confirmed = std::move(cls.confirmed);
    out.positive = std::move(cls.positive);

    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < out.positive.size(); ++i) {
        const float z = out.positive.points[i].z();
        if (params.crop_z && (z < params.crop_z->first || z > params.crop_z->second)) continue;
        selected.push_back(i);
    }
    PointCloud subset;
    for (std::size_t i : selected) subset.points.push_back(out.positive.points[i]);

    const Clustering c = dbscan(subset, params.eps, params.min_pts);
    for (const auto& cl : c.clusters) {
        std::vector<std::size_t> idx;
        PointCloud pts;
        for (std::size_t k : cl) {
            idx.push_back(selected[k]);
            pts.points.push_back(subset.points[k]);
        }
        out.clusters.push_back(std::move(idx));
        out.meshes.push_back(voxel_mesh(pts, params.voxel));
    }
    for (std::size_t k : c.noise) out.noise.push_back(selected[k]);
    return out;
}

PointCloud cluster_points(const ChangeSet& changes, std::size_t cluster) {
    if (cluster >= changes.clusters.size()) throw IndexError("no cluster " + std::to_string(cluster));
    PointCloud out;
    for (std::size_t i : changes.clusters[cluster]) out.points.push_back(changes.positive.points[i]);
    return out;
}

std::string change_report(const ChangeSet& changes) {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "threshold=%.3f eps=%.3f min_pts=%zu voxel=%.3f\n", changes.params.threshold,
                  changes.params.eps, changes.params.min_pts, changes.params.voxel);
    os << buf;
    os << "points=" << changes.confirmed.size() + changes.positive.size() << '\n';
    os << "confirmed=" << changes.confirmed.size() << '\n';
    os << "positive=" << changes.positive.size() << '\n';
    os << "clusters=" << changes.clusters.size() << '\n';
    os << "noise=" << changes.noise.size() << '\n';
    for (std::size_t c = 0; c < changes.clusters.size(); ++c) {
        const PointCloud pts = cluster_points(changes, c);
        Eigen::Vector3f lo = pts.points.front(), hi = pts.points.front();
        for (const Point& p : pts.points) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        std::snprintf(buf, sizeof(buf),
                      "cluster %zu points=%zu triangles=%zu min=%.3f,%.3f,%.3f max=%.3f,%.3f,%.3f\n", c, pts.size(),
                      changes.meshes[c].triangle_count(), lo.x(), lo.y(), lo.z(), hi.x(), hi.y(), hi.z());
        os << buf;
    }
    return os.str();
}

void export_changes(const ChangeSet& changes, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    TriangleMesh combined;
    char name[32];
    for (std::size_t c = 0; c < changes.meshes.size(); ++c) {
        std::snprintf(name, sizeof(name), "cluster_%03zu.obj", c);
        save_obj(changes.meshes[c], dir / name);
        combined.merge(changes.meshes[c]);
    }
    save_obj(combined, dir / "changes.obj");
    save_cloud(changes.confirmed, dir / "confirmed.pc");
    save_cloud(changes.positive, dir / "positive.pc");
    std::ofstream os(dir / "report.txt", std::ios::trunc);
    if (!os) throw Error("cannot write " + (dir / "report.txt").string());
    os << change_report(changes);
}

}  // namespace bimslam
