#include "bimslam/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "bimslam/error.hpp"

namespace bimslam {

double TriangleMesh::surface_area() const {
    double sum = 0.0;
    for (std::size_t i = 0; i < faces.size(); ++i) sum += triangle(i).area();
    return sum;
}

void TriangleMesh::merge(const TriangleMesh& other) {
    const auto offset = static_cast<std::uint32_t>(vertices.size());
    vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
    for (const auto& f : other.faces) faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
}

void validate_model(const BuildingModel& model) {
    if (model.empty()) throw PreconditionViolation("model has no triangles");
    for (const auto& v : model.vertices) {
        if (!v.allFinite()) throw PreconditionViolation("model has a non-finite vertex");
    }
    for (std::size_t i = 0; i < model.faces.size(); ++i) {
        for (auto idx : model.faces[i]) {
            if (idx >= model.vertices.size()) throw PreconditionViolation("face references a missing vertex");
        }
        if (model.triangle(i).area() <= 1e-12) {
            throw PreconditionViolation("triangle " + std::to_string(i) + " is degenerate");
        }
    }
}

TriangleMesh load_obj(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) throw Error("cannot read " + file.string());
    TriangleMesh mesh;
    std::string line;
    std::size_t line_no = 0;
    auto parse_index = [&](const std::string& tok) -> std::uint32_t {
        const std::string head = tok.substr(0, tok.find('/'));
        long idx = 0;
        try {
            idx = std::stol(head);
        } catch (const std::exception&) {
            throw FormatError(file.string(), line_no, "bad face index '" + tok + "'");
        }
        if (idx < 0) idx = static_cast<long>(mesh.vertices.size()) + idx + 1;
        if (idx < 1 || static_cast<std::size_t>(idx) > mesh.vertices.size()) {
            throw FormatError(file.string(), line_no, "face index out of range '" + tok + "'");
        }
        return static_cast<std::uint32_t>(idx - 1);
    };
    while (std::getline(is, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Eigen::Vector3d v;
            if (!(ls >> v.x() >> v.y() >> v.z())) throw FormatError(file.string(), line_no, "bad vertex");
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<std::uint32_t> idx;
            std::string tok;
            while (ls >> tok) idx.push_back(parse_index(tok));
            if (idx.size() != 3) throw FormatError(file.string(), line_no, "face is not a triangle");
            mesh.faces.push_back({idx[0], idx[1], idx[2]});
        }
    }
    return mesh;
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& file) {
    std::ofstream os(file, std::ios::trunc);
    if (!os) throw Error("cannot write " + file.string());
    char buf[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
        os << buf;
    }
    for (const auto& f : mesh.faces) os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Triangle& t) {
    const Eigen::Vector3d ab = t.b - t.a;
    const Eigen::Vector3d ac = t.c - t.a;
    const Eigen::Vector3d ap = p - t.a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return t.a;

    const Eigen::Vector3d bp = p - t.b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return t.b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return t.a + ab * (d1 / (d1 - d3));

    const Eigen::Vector3d cp = p - t.c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return t.c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return t.a + ac * (d2 / (d2 - d6));

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        return t.b + (t.c - t.b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    const double denom = 1.0 / (va + vb + vc);
    return t.a + ab * (vb * denom) + ac * (vc * denom);
}

std::optional<double> intersect_ray_triangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                             const Triangle& t, double t_min, double t_max) {
    const Eigen::Vector3d e1 = t.b - t.a;
    const Eigen::Vector3d e2 = t.c - t.a;
    const Eigen::Vector3d pvec = dir.cross(e2);
    const double det = e1.dot(pvec);
    if (std::abs(det) < 1e-14) return std::nullopt;
    const double inv = 1.0 / det;
    const Eigen::Vector3d tvec = origin - t.a;
    const double u = tvec.dot(pvec) * inv;
    if (u < 0.0 || u > 1.0) return std::nullopt;
    const Eigen::Vector3d qvec = tvec.cross(e1);
    const double v = dir.dot(qvec) * inv;
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    const double dist = e2.dot(qvec) * inv;
    if (dist <= t_min || dist > t_max) return std::nullopt;
    return dist;
}

namespace {

bool axis_separates(const Eigen::Vector3d& axis, const Eigen::Vector3d& v0, const Eigen::Vector3d& v1,
                    const Eigen::Vector3d& v2, const Eigen::Vector3d& half) {
    if (axis.squaredNorm() < 1e-24) return false;
    const double p0 = axis.dot(v0);
    const double p1 = axis.dot(v1);
    const double p2 = axis.dot(v2);
    const double r = half.x() * std::abs(axis.x()) + half.y() * std::abs(axis.y()) + half.z() * std::abs(axis.z());
    return std::min({p0, p1, p2}) > r || std::max({p0, p1, p2}) < -r;
}

double box_sq_dist(const Eigen::Vector3d& p, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
    const Eigen::Vector3d d = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
    return d.squaredNorm();
}

bool ray_box(const Eigen::Vector3d& o, const Eigen::Vector3d& inv_dir, const Eigen::Vector3d& lo,
             const Eigen::Vector3d& hi, double t_max) {
    double t0 = 0.0;
    double t1 = t_max;
    for (int k = 0; k < 3; ++k) {
        double a = (lo[k] - o[k]) * inv_dir[k];
        double b = (hi[k] - o[k]) * inv_dir[k];
        if (std::isnan(a) || std::isnan(b)) {  // 0 * inf: ray parallel and on the slab plane
            if (o[k] < lo[k] || o[k] > hi[k]) return false;
            continue;
        }
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
        if (t0 > t1) return false;
    }
    return true;
}

}  // namespace

bool triangle_box_overlap(const Triangle& t, const Eigen::Vector3d& box_min, const Eigen::Vector3d& box_max) {
    const Eigen::Vector3d c = 0.5 * (box_min + box_max);
    const Eigen::Vector3d h = 0.5 * (box_max - box_min);
    const Eigen::Vector3d v0 = t.a - c;
    const Eigen::Vector3d v1 = t.b - c;
    const Eigen::Vector3d v2 = t.c - c;

    for (int k = 0; k < 3; ++k) {
        if (std::min({v0[k], v1[k], v2[k]}) > h[k] || std::max({v0[k], v1[k], v2[k]}) < -h[k]) return false;
    }
    const Eigen::Vector3d e[3] = {v1 - v0, v2 - v1, v0 - v2};
    if (axis_separates(e[0].cross(e[1]), v0, v1, v2, h)) return false;
    for (const auto& edge : e) {
        for (int k = 0; k < 3; ++k) {
            if (axis_separates(Eigen::Vector3d::Unit(k).cross(edge), v0, v1, v2, h)) return false;
        }
    }
    return true;
}

MeshIndex::MeshIndex(const TriangleMesh& mesh) {
    tris_.reserve(mesh.triangle_count());
    for (std::size_t i = 0; i < mesh.triangle_count(); ++i) tris_.push_back(mesh.triangle(i));
    ids_.resize(tris_.size());
    std::iota(ids_.begin(), ids_.end(), 0);
    if (!tris_.empty()) build(0, static_cast<std::uint32_t>(tris_.size()));

    std::vector<Triangle> sorted;
    sorted.reserve(tris_.size());
    for (auto id : ids_) sorted.push_back(mesh.triangle(id));
    tris_ = std::move(sorted);
}

std::int32_t MeshIndex::build(std::uint32_t begin, std::uint32_t end) {
    // During build tris_ is in original order and ids_ is permuted.
    Node node;
    node.lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    node.hi = -node.lo;
    for (std::uint32_t i = begin; i < end; ++i) {
        const Triangle& t = tris_[ids_[i]];
        node.lo = node.lo.cwiseMin(t.a).cwiseMin(t.b).cwiseMin(t.c);
        node.hi = node.hi.cwiseMax(t.a).cwiseMax(t.b).cwiseMax(t.c);
    }
    node.begin = begin;
    node.end = end;
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= 4) return id;

    int axis = 0;
    (node.hi - node.lo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    auto centroid = [&](std::size_t tid) {
        const Triangle& t = tris_[tid];
        return t.a[axis] + t.b[axis] + t.c[axis];
    };
    std::nth_element(ids_.begin() + begin, ids_.begin() + mid, ids_.begin() + end,
                     [&](std::size_t a, std::size_t b) {
                         const double ca = centroid(a);
                         const double cb = centroid(b);
                         return ca < cb || (ca == cb && a < b);
                     });
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

std::optional<MeshIndex::Hit> MeshIndex::raycast(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                                 double max_range) const {
    if (nodes_.empty()) return std::nullopt;
    const Eigen::Vector3d inv_dir = dir.cwiseInverse();
    std::optional<Hit> best;
    double t_best = max_range;
    std::vector<std::int32_t> stack{0};
    while (!stack.empty()) {
        const Node& n = nodes_[stack.back()];
        stack.pop_back();
        if (!ray_box(origin, inv_dir, n.lo, n.hi, t_best)) continue;
        if (n.left < 0) {
            for (std::uint32_t i = n.begin; i < n.end; ++i) {
                if (auto t = intersect_ray_triangle(origin, dir, tris_[i], 1e-9, t_best)) {
                    if (!best || *t < t_best || (*t == t_best && ids_[i] < best->triangle)) {
                        t_best = *t;
                        best = Hit{*t, ids_[i]};
                    }
                }
            }
            continue;
        }
        stack.push_back(n.right);
        stack.push_back(n.left);
    }
    return best;
}

MeshIndex::Closest MeshIndex::closest(const Eigen::Vector3d& p) const {
    Closest best;
    best.distance = std::numeric_limits<double>::infinity();
    if (nodes_.empty()) return best;
    double best_sq = std::numeric_limits<double>::infinity();
    std::vector<std::int32_t> stack{0};
    while (!stack.empty()) {
        const Node& n = nodes_[stack.back()];
        stack.pop_back();
        if (box_sq_dist(p, n.lo, n.hi) > best_sq) continue;
        if (n.left < 0) {
            for (std::uint32_t i = n.begin; i < n.end; ++i) {
                const Eigen::Vector3d q = closest_point_on_triangle(p, tris_[i]);
                const double d = (q - p).squaredNorm();
                if (d < best_sq || (d == best_sq && ids_[i] < best.triangle)) {
                    best_sq = d;
                    best.point = q;
                    best.triangle = ids_[i];
                }
            }
            continue;
        }
        const double dl = box_sq_dist(p, nodes_[n.left].lo, nodes_[n.left].hi);
        const double dr = box_sq_dist(p, nodes_[n.right].lo, nodes_[n.right].hi);
        if (dl <= dr) {
            stack.push_back(n.right);
            stack.push_back(n.left);
        } else {
            stack.push_back(n.left);
            stack.push_back(n.right);
        }
    }
    best.distance = std::sqrt(best_sq);
    return best;
}

}  // namespace bimslam
